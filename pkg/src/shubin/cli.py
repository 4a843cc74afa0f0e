"""Command-line front end.

Subcommands ``spectrum``, ``classify``, ``check``, ``expand`` and ``iterate``.
Settings come from command-line flags, then a ``key=value`` config file
(``--config``), then built-in defaults, in that order of precedence.

Exit codes: 0 success, 2 operator not elliptic, 3 truncation did not
converge, 4 insufficient data, 1 any other error.
"""

import argparse
from dataclasses import dataclass, fields, replace
import hashlib
import os
from pathlib import Path
import sys
import tempfile

import numpy as np

from . import expansion as ex
from . import spectral as sc
from .errors import (
    DomainError,
    InsufficientDataError,
    NotEllipticError,
    NonConvergenceError,
    ParseError,
    ShubinError,
    TruncationError,
    ValidationError,
)
from .hermite import (
    BasisSpec,
    derivative_matrix,
    gaussian_coefficients,
    grlex_indices,
    position_matrix,
)
from .io import fmt, publish, read_csv, read_keyvalue, write_csv
from .operators import (
    assemble,
    ellipticity_check,
    model_operator,
    read_operator,
)


@dataclass(frozen=True)
class RunConfig:
    """Settings of one run; every field can come from a flag or the config file."""

    model: str = "1,2,2"
    op: str = None
    J: int = 200
    tol: float = 1e-10
    residual_tol: float = sc.RESIDUAL_TOL
    N: int = None
    pad: int = None
    route_tol: float = ex.ROUTE_TOL
    window: str = None
    decay_window: str = None
    Mmax: int = None
    r_max: float = ex.SEMINORM_R_MAX
    fn: str = "gaussian:1.0"
    out: str = "."
    no_cache: bool = False

    def __post_init__(self):
        for name in ("tol", "residual_tol", "route_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.J < 1:
            raise ValidationError(f"J must be >= 1, got {self.J}")
        for name in ("window", "decay_window"):
            if getattr(self, name) is not None:
                parse_window(getattr(self, name))


def _flag(v):
    return str(v).strip().lower() in ("1", "true", "yes", "on")


_TYPES = {"model": str, "op": str, "J": int, "tol": float, "residual_tol": float, "N": int,
          "pad": int, "route_tol": float, "window": str, "decay_window": str,
          "Mmax": int, "r_max": float, "fn": str, "out": str, "no_cache": _flag}


def parse_window(text):
    try:
        lo, hi = (int(v) for v in str(text).split(":"))
    except ValueError:
        raise ValidationError(f"window must look like lo:hi, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise ValidationError(f"window {text!r} is not well ordered")
    return lo, hi


def build_config(args):
    """Defaults, overridden by the config file, overridden by explicit flags."""
    types = _TYPES
    values = {}
    if getattr(args, "config", None):
        for key, raw in read_keyvalue(args.config).items():
            if key not in types:
                raise ValidationError(f"{args.config}: unknown config key {key!r}")
            try:
                values[key] = types[key](raw)
            except ValueError:
                raise ValidationError(f"{args.config}: bad value for {key}: {raw!r}") from None
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None and v is not False:
            values[f.name] = v
    return RunConfig(**values)


# ----------------------------------------------------------------------------
# helpers


def load_operator(cfg):
    if cfg.op:
        return read_operator(cfg.op)
    try:
        n, m, k = (int(v) for v in cfg.model.split(","))
    except ValueError:
        raise ValidationError(f"--model expects n,m,k, got {cfg.model!r}") from None
    return model_operator(n, m, k)


def _gate(P):
    report = ellipticity_check(P, grid=64 if P.n == 1 else 24)
    if not report.elliptic:
        w = report.witness
        raise NotEllipticError(
            f"operator is not globally elliptic ({report.verdict}): "
            f"|p(x, xi)|/Lambda = {report.min_modulus:.3g} at x = {np.round(w.x, 6).tolist()}, "
            f"xi = {np.round(w.xi, 6).tolist()}",
            report,
        )
    return report


def _cache_path(cfg, P, J):
    key = f"{P.digest()}|N={cfg.N}|pad={cfg.pad}|tol={fmt(float(cfg.tol))}|rtol={fmt(float(cfg.residual_tol))}|J={J}"
    name = hashlib.sha256(key.encode()).hexdigest()[:20]
    return Path(cfg.out) / ".cache" / f"spectrum-{name}.npz"


def _save_npz(path, **arrays):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        publish(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def compute_spectrum(cfg, P, J=None):
    """Certified decomposition for the run; reuses the on-disk cache when allowed."""
    J = J or cfg.J
    path = _cache_path(cfg, P, J)
    if not cfg.no_cache and path.exists():
        with np.load(path) as z:
            spec = BasisSpec(P.n, int(z["N"]), int(z["pad"]))
            history = tuple((int(N), z[f"history_{i}"]) for i, N in enumerate(z["history_N"]))
            return sc.SpectralDecomposition(z["eigenvalues"], z["eigenvectors"], int(z["J_trusted"]),
                                            spec, P.params, z["residuals"], history)
    _gate(P)
    if cfg.N is not None:
        pad = P.axis_order if cfg.pad is None else cfg.pad
        spec = BasisSpec(P.n, cfg.N, pad)
        dec = sc.eigendecompose(assemble(P, spec), J, cfg.residual_tol)
        dec = replace(dec, history=((cfg.N, dec.eigenvalues.copy()),))
    else:
        _, dec = sc.convergence_study(P, J, cfg.tol, cfg.residual_tol, check_ellipticity=False)
    if not cfg.no_cache:
        extra = {f"history_{i}": lam for i, (_, lam) in enumerate(dec.history)}
        _save_npz(path, eigenvalues=dec.eigenvalues, eigenvectors=dec.eigenvectors,
                  J_trusted=dec.J_trusted, N=dec.spec.N, pad=dec.spec.pad, residuals=dec.residuals,
                  history_N=np.array([N for N, _ in dec.history], dtype=np.int64), **extra)
    return dec


def _read_coefficients(path):
    header, rows = read_csv(path)
    cols = {name: i for i, name in enumerate(header)}
    if "re" in cols:
        re_i, im_i = cols["re"], cols.get("im")
    elif "value" in cols:
        re_i, im_i = cols["value"], None
    else:
        raise ParseError(f"{path}: coefficient file needs a 're' or 'value' column", line=1)
    values = []
    for lineno, row in enumerate(rows, start=2):
        try:
            re = float(row[re_i])
            im = float(row[im_i]) if im_i is not None else 0.0
        except (ValueError, IndexError):
            raise ParseError(f"{path}: bad coefficient row {row!r}", line=lineno) from None
        values.append(complex(re, im))
    values = np.array(values)
    if not np.all(np.isfinite(values)):
        raise ParseError(f"{path}: nonfinite coefficient")
    return values if np.any(values.imag) else values.real


def resolve_function(cfg, P):
    """Decomposition, eigen-coefficients and Hermite coordinates for ``--fn``.

    ``gaussian:s`` is exp(-|x|^2/s^2) through its closed-form Hermite
    coordinates; ``hermite:i`` is h_i (``i`` a grlex position or a
    comma-separated multi-index); ``eigen:i`` is the i-th eigenfunction
    (1-based); ``coeffs:path`` injects eigen-coefficients from a CSV file.
    """
    kind, _, arg = cfg.fn.partition(":")
    if kind == "coeffs":
        values = _read_coefficients(arg)
        dec = compute_spectrum(cfg, P, max(cfg.J, values.shape[0]))
        padded = np.zeros(dec.J_trusted, dtype=values.dtype)
        if values.shape[0] > dec.J_trusted:
            raise TruncationError(f"{values.shape[0]} coefficients exceed the {dec.J_trusted} trusted eigenpairs")
        padded[: values.shape[0]] = values
        c = sc.ExpansionCoefficients(padded, dec)
        return dec, c, ex.hermite_coordinates(c, dec)
    if kind == "eigen":
        i = int(arg)
        if i < 1:
            raise DomainError(f"eigen index is 1-based, got {i}")
        dec = compute_spectrum(cfg, P, max(cfg.J, i))
        if i > dec.J_trusted:
            raise TruncationError(f"eigenfunction {i} is beyond the {dec.J_trusted} trusted pairs")
        e = np.zeros(dec.J_trusted)
        e[i - 1] = 1.0
        return dec, sc.ExpansionCoefficients(e, dec, 0.0), dec.eigenvectors[:, i - 1].copy()
    dec = compute_spectrum(cfg, P)
    if kind == "gaussian":
        width = float(arg) if arg else 1.0
        h = gaussian_coefficients(dec.spec, width)
    elif kind == "hermite":
        idx = [int(v) for v in arg.split(",")]
        h = np.zeros(dec.spec.size)
        if len(idx) == 1 and P.n > 1:
            h[idx[0]] = 1.0
        else:
            if len(idx) != P.n:
                raise DomainError(f"hermite multi-index needs {P.n} entries")
            pos = np.flatnonzero((grlex_indices(P.n, dec.spec.N) == np.array(idx)).all(axis=1))
            if pos.size == 0:
                raise TruncationError(f"h_{tuple(idx)} is outside the truncation")
            h[pos[0]] = 1.0
    else:
        raise ValidationError(f"unknown function spec {cfg.fn!r}")
    return dec, ex.expand_hermite(h, dec), h


def _out(cfg, name):
    return Path(cfg.out) / name


def _say(msg):
    print(msg, flush=True)


# ----------------------------------------------------------------------------
# subcommands


def cmd_spectrum(cfg):
    P = load_operator(cfg)
    try:
        dec = compute_spectrum(cfg, P)
    except NonConvergenceError as exc:
        rows = [(N, j + 1, float(v)) for N, lam in (exc.spectra or ()) for j, v in enumerate(lam)]
        write_csv(_out(cfg, "nonconvergence.csv"), ("N", "j", "lambda"), rows)
        raise
    sc.write_spectrum_csv(_out(cfg, "spectrum.csv"), dec)
    window = parse_window(cfg.window) if cfg.window else None
    fit = sc.weyl_fit(dec, window)
    sc.write_weyl_csv(_out(cfg, "weyl.csv"), fit)
    _say(f"N={dec.spec.N} J_trusted={dec.J_trusted} lambda_1={fmt(float(dec.eigenvalues[0]))}")
    _say(f"exponent_hat={fit.exponent_hat:.6f} exponent_theory={fit.exponent_theory:.6f} "
         f"window={fit.window[0]}:{fit.window[1]}")
    return 0


def cmd_classify(cfg):
    P = load_operator(cfg)
    dec, c, h = resolve_function(cfg, P)
    conf = ex.ClassifyConfig(
        route_tol=cfg.route_tol,
        M_max=cfg.Mmax,
        r_max=cfg.r_max,
        decay_window=parse_window(cfg.decay_window) if cfg.decay_window else None,
    )
    cls = ex.classify(dec, c, h, P.params, conf)
    if not cls.raw_estimates:
        usable = int(np.count_nonzero(np.abs(c.values) > sc.NOISE_FLOOR * np.abs(c.values).max()))
        raise InsufficientDataError("no regularity route could be fitted: " + "; ".join(
            f"{k}: {v}" for k, v in sorted(cls.gaps.items())), usable=usable)
    ex.write_coefficients_csv(_out(cfg, "coefficients.csv"), c)
    series = cls.details.get("series")
    if series is not None:
        ex.write_iterates_csv(_out(cfg, "iterates.csv"), series)
    semi = cls.details.get("seminorms")
    if semi is not None:
        write_csv(_out(cfg, "seminorms.csv"), ("r", "seminorm"),
                  ((float(r), float(v)) for r, v in zip(semi.orders, semi.norms)))
    ex.write_classification(_out(cfg, "classification.txt"), cls)
    _say(ex.classification_text(cls).rstrip("\n"))
    return 0


def cmd_expand(cfg):
    P = load_operator(cfg)
    dec, c, _ = resolve_function(cfg, P)
    ex.write_coefficients_csv(_out(cfg, "coefficients.csv"), c)
    _say(f"J={len(c)} tail_mass={fmt(float(c.tail_mass))}")
    return 0


def cmd_iterate(cfg):
    P = load_operator(cfg)
    dec, c, _ = resolve_function(cfg, P)
    series = ex.iterate_norms(dec, c, cfg.Mmax or 20)
    ex.write_iterates_csv(_out(cfg, "iterates.csv"), series)
    if series.M_max >= ex.GEVREY_MIN_M:
        fit = ex.gevrey_fit(series)
        _say(f"M_max={series.M_max} theta_hat={fit.theta_hat:.6f}")
    else:
        _say(f"M_max={series.M_max}")
    return 0


def _run_checks(cfg, P):
    rows = []

    def record(name, ok, detail):
        rows.append((name, "PASS" if ok else "FAIL", detail))
        return ok

    report = ellipticity_check(P, grid=64 if P.n == 1 else 24)
    w = report.witness
    record("ellipticity", report.elliptic,
           f"{report.verdict} min|p|/Lambda={report.min_modulus:.6g} witness x={np.round(w.x, 6).tolist()} "
           f"xi={np.round(w.xi, 6).tolist()}")
    if not report.elliptic:
        return rows, 2
    N = cfg.N or 64
    pad = P.axis_order if cfg.pad is None else cfg.pad
    try:
        if N <= 2 * P.axis_order:
            raise TruncationError(
                f"N = {N} leaves no block free of truncation effects for band {P.axis_order}"
            )
        spec = BasisSpec(P.n, N, pad)
        A = assemble(P, spec)
    except TruncationError as exc:
        record("truncation", False, str(exc))
        return rows, 1
    record("truncation", True, f"N={N} pad={pad}")
    record("hermitian", A.hermitian_defect <= sc.DEFECT_TOL, f"defect={A.hermitian_defect:.3g}")
    J = min(10, A.size)
    dec = sc.eigendecompose(A, J, cfg.residual_tol)
    V = dec.eigenvectors
    orth = float(np.abs(V.conj().T @ V - np.eye(J)).max())
    record("orthonormality", orth <= 1e-10, f"max|V^H V - I|={orth:.3g}")
    record("positivity", bool(dec.eigenvalues[0] > 0), f"lambda_1={fmt(float(dec.eigenvalues[0]))}")
    suite = ex.random_suite(P.n, 20, min(16, N // 2), seed=0)
    c1 = ex.elliptic_estimate_check(P, suite, spec).C_empirical
    c2 = ex.elliptic_estimate_check(P, suite, BasisSpec(P.n, 2 * N, pad)).C_empirical
    record("elliptic_estimate", np.isfinite(c1) and abs(c2 - c1) <= 0.05 * c1,
           f"C(N)={c1:.6g} C(2N)={c2:.6g}")
    if N >= 2:
        X, Dm = position_matrix(N).matrix, derivative_matrix(N).matrix
        C = (Dm @ X - X @ Dm).toarray()[: N - 1, : N - 1]
        err = float(np.abs(C + 1j * np.eye(N - 1)).max())
        record("commutator", err <= 1e-12, f"max|[D,x] + iI|={err:.3g}")
    return rows, 0 if all(r[1] == "PASS" for r in rows) else 1


def cmd_check(cfg):
    P = load_operator(cfg)
    rows, code = _run_checks(cfg, P)
    write_csv(_out(cfg, "check.csv"), ("check", "status", "detail"), rows)
    width = max(len(r[0]) for r in rows)
    for name, status, detail in rows:
        _say(f"{name:<{width}}  {status}  {detail}")
    return code


COMMANDS = {
    "spectrum": cmd_spectrum,
    "classify": cmd_classify,
    "check": cmd_check,
    "expand": cmd_expand,
    "iterate": cmd_iterate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--model", help="builtin model operator (-Delta)^{m/2} + |x|^k as n,m,k (default 1,2,2)")
    src.add_argument("--op", help="operator spec file")
    common.add_argument("-J", type=int, help="number of eigenpairs (default 200)")
    common.add_argument("--tol", type=float, help="relative eigenvalue change accepted by the doubling study (default 1e-10)")
    common.add_argument("--residual-tol", dest="residual_tol", type=float, help="residual certificate, relative to max(1, lambda) (default 1e-8)")
    common.add_argument("--N", type=int, help="fixed truncation per axis instead of the doubling study")
    common.add_argument("--pad", type=int, help="assembly padding per axis (default: operator order)")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--fn", help="function: gaussian:s | hermite:i | eigen:i | coeffs:file.csv")
    common.add_argument("--Mmax", type=int, help="largest iterate power (default adaptive for classify, 20 for iterate)")
    common.add_argument("--window", help="Weyl fit window lo:hi (1-based, inclusive)")
    common.add_argument("--decay-window", dest="decay_window", help="coefficient-decay window lo:hi")
    common.add_argument("--route-tol", dest="route_tol", type=float, help="largest accepted disagreement between routes (default 0.25)")
    common.add_argument("--r-max", dest="r_max", type=float, help="largest seminorm order tried (default 12)")
    common.add_argument("--no-cache", dest="no_cache", action="store_true", help="do not read or write the spectrum cache")
    common.add_argument("--config", help="key=value file; flags override it, it overrides defaults")

    parser = argparse.ArgumentParser(
        prog="shubin",
        description="Spectra, eigenfunction expansions and Gelfand-Shilov regularity diagnostics "
                    "for anisotropic Shubin operators.",
        epilog="Precedence: command-line flags > --config file > defaults. "
               "Exit codes: 0 ok, 1 error, 2 not elliptic, 3 no convergence, 4 insufficient data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "converged spectrum and Weyl-law fit (spectrum.csv, weyl.csv)",
        "classify": "three-route regularity classification of --fn",
        "check": "ellipticity, truncation, Hermitian and elliptic-estimate checks",
        "expand": "eigen-coefficients of --fn (coefficients.csv)",
        "iterate": "log |P^M u| series of --fn (iterates.csv)",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ShubinError as exc:
        print(f"shubin {args.command}: error: {exc}", file=sys.stderr)
        if isinstance(exc, NonConvergenceError) and exc.spectra:
            for N, lam in exc.spectra:
                head = ", ".join(fmt(float(v)) for v in lam[:5])
                print(f"  N={N}: {head}, ...", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"shubin {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
