"""Lowest eigenpairs of sparse Hermitian Galerkin matrices.

The matrix is first split into the connected components of its sparsity
graph (parity classes of the model operators, single entries of diagonal
matrices), so decoupled blocks come back with exactly decoupled
eigenvectors. Each block is then handled by size:

* 1 x 1 blocks: read off directly;
* small or dense-ish blocks: LAPACK ``eigh`` on the lowest requested index range;
* long narrow-band blocks: banded eigenvalues (``eigvals_banded``, bisection)
  followed by shifted inverse iteration with ``solve_banded``; a Rayleigh-Ritz
  step is deliberately avoided because forming Q^H A Q costs eps*|A| in the
  low eigenvalues once |A| is large;
* large blocks of multi-dimensional bases: ARPACK Lanczos in shift-invert mode.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .hermite import band_storage

DENSE_LARGE_MAX = 6000
BAND_MAX = 16
CLUSTER_RTOL = 1e-7


def _bandwidth(B):
    C = B.tocoo()
    if C.nnz == 0:
        return 0
    return int(np.abs(C.row - C.col).max())


def _dense_lowest(B, J):
    w, V = sla.eigh(B.toarray(), subset_by_index=[0, J - 1], driver="evr")
    return w, V


def _banded_lowest(B, b, J):
    S = B.shape[0]
    ab = band_storage(B, b)
    w = sla.eigvals_banded(ab, select="i", select_range=(0, J - 1))
    full = np.zeros((2 * b + 1, S), dtype=ab.dtype)
    Bd = sp.dia_array(B)
    for off in range(-b, b + 1):
        d = Bd.diagonal(off)
        if off >= 0:
            full[b - off, off:] = d
        else:
            full[b - off, : S + off] = d
    norm = float(np.abs(full).sum(axis=0).max()) or 1.0
    rng = np.random.default_rng(12345)
    start = rng.standard_normal(S)
    V = np.zeros((S, J), dtype=ab.dtype)
    eps = np.finfo(np.float64).eps
    for j in range(J):
        shifted = full.copy()
        shifted[b] -= w[j]
        v = start.astype(ab.dtype)
        mates = [i for i in range(j) if abs(w[i] - w[j]) <= CLUSTER_RTOL * max(1.0, abs(w[j]))]
        for _ in range(3):
            try:
                v = sla.solve_banded((b, b), shifted, v, check_finite=False)
            except np.linalg.LinAlgError:
                shifted[b] -= 8 * eps * norm
                v = sla.solve_banded((b, b), shifted, v, check_finite=False)
            for i in mates:
                v = v - V[:, i] * np.vdot(V[:, i], v)
            v = v / np.linalg.norm(v)
        V[:, j] = v
    # inverse iteration leaves well separated vectors orthogonal to rounding;
    # QR only touches the rare clustered case and keeps column order
    gram = V.conj().T @ V
    if np.abs(gram - np.eye(J)).max() > 1e-13:
        Q, R = np.linalg.qr(V)
        V = Q * np.sign(np.diagonal(R).real + (np.diagonal(R).real == 0))
    return w, V


def _sparse_lowest(B, J):
    sigma = -1.0
    w, V = spla.eigsh(sp.csc_array(B), k=J, sigma=sigma, which="LM")
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _block_lowest(B, J, dims):
    S = B.shape[0]
    b = _bandwidth(B)
    # banded bisection keeps small eigenvalues accurate relative to themselves;
    # dense eigh only reaches eps*|A| absolute, which matters once |A| ~ 1e7
    if b <= BAND_MAX and S > 4 * b + 8:
        return _banded_lowest(B, b, J)
    if S <= DENSE_LARGE_MAX:
        return _dense_lowest(B, J)
    return _sparse_lowest(B, J)


def lowest_eigenpairs(A, J, dims=1):
    """The ``J`` lowest eigenpairs of the sparse Hermitian matrix ``A``.

    Returns ``(eigenvalues, eigenvectors)`` in ascending order.
    """
    A = sp.csr_array(A)
    size = A.shape[0]
    pattern = sp.csr_array((np.ones(A.nnz), A.indices, A.indptr), shape=A.shape)
    ncomp, labels = csgraph.connected_components(pattern, directed=False)
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=ncomp)
    starts = np.concatenate(([0], np.cumsum(counts)))

    values, owners = [], []
    blocks = []
    singles = np.flatnonzero(counts == 1)
    if singles.size:
        idx = order[starts[singles]]
        values.append(A.diagonal()[idx].real)
        owners.append(np.stack([np.full(idx.size, -1), idx], axis=1))
    for c in np.flatnonzero(counts > 1):
        idx = order[starts[c] : starts[c + 1]]
        B = A[idx][:, idx]
        Jb = min(J, idx.size)
        w, V = _block_lowest(B, Jb, dims)
        blocks.append((idx, V))
        values.append(np.asarray(w).real)
        owners.append(np.stack([np.full(Jb, len(blocks) - 1), np.arange(Jb)], axis=1))
    values = np.concatenate(values)
    owners = np.concatenate(owners)
    pick = np.argsort(values, kind="stable")[:J]

    dtype = np.result_type(A.dtype, *(V.dtype for _, V in blocks)) if blocks else A.dtype
    vecs = np.zeros((size, pick.size), dtype=dtype)
    for col, p in enumerate(pick):
        block, local = owners[p]
        if block < 0:
            vecs[local, col] = 1.0
        else:
            idx, V = blocks[block]
            vecs[idx, col] = V[:, local]
    return values[pick], vecs


def matrix_free_lowest(operator, size, J):
    """Lanczos on a matrix-free operator (bases beyond two dimensions)."""
    lin = spla.LinearOperator((size, size), matvec=operator, dtype=np.complex128)
    w, V = spla.eigsh(lin, k=J, which="SA")
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]
