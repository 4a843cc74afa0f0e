"""Exception hierarchy.

Every error raised on purpose derives from :class:`ShubinError` so the CLI
can map it onto a stable exit code.
"""


class ShubinError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(ShubinError, ValueError):
    """Input outside the mathematical domain (nonfinite point, nonpositive eigenvalue, ...)."""


class CapabilityError(ShubinError, ValueError):
    """Request exceeds what the implementation supports (too many nodes, J > size, ...)."""


class ValidationError(ShubinError, ValueError):
    """Operator violates a structural constraint (parity of m, k; anisotropic order)."""


class ParseError(ValidationError):
    """Malformed operator-spec document."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class TruncationError(ShubinError, ValueError):
    """Padding too small for exact entries, or data beyond the trusted range."""


class HermitianDefectError(ShubinError, ValueError):
    """Spectral path requested on a matrix that is not Hermitian enough."""


class NotEllipticError(ShubinError):
    """Principal symbol vanishes (or may vanish) off the origin."""

    exit_code = 2

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class NonConvergenceError(ShubinError):
    """Truncation cap reached before the requested eigenvalues settled."""

    exit_code = 3

    def __init__(self, message, spectra=None):
        self.spectra = spectra
        super().__init__(message)


class InsufficientDataError(ShubinError):
    """Too few usable coefficients for a fit."""

    exit_code = 4

    def __init__(self, message, usable=None):
        self.usable = usable
        super().__init__(message)


class FitError(ShubinError):
    """Least-squares design is degenerate or ill-conditioned."""


class LevelSetError(ShubinError, ValueError):
    """Seminorm order r has no (alpha, beta) with |alpha|/m + |beta|/k = r."""
