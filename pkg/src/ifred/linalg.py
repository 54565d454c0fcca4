"""Sparse symmetric positive definite assembly and direct solves.

The factorization is SuperLU with a symmetric fill-reducing ordering and
diagonal pivoting only, so the pivots it produces are those of an LDL^T
factorization: a non-positive pivot means the matrix is not positive
definite.

Residuals are checked as normwise backward errors
``|b - Ax|_inf / (|A|_inf |x|_inf + |b|_inf)``. The plain ratio
``|b - Ax| / |b|`` is not usable as a contract for finite element systems,
whose right-hand sides shrink like h^2 while the rounding floor of ``Ax``
does not.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, DefinitenessError, SolverError

SYMMETRY_RTOL = 1e-14
RESIDUAL_RTOL = 1e-13


class SparseSymMatrix:
    """CSR matrix known to be symmetric; thin wrapper over scipy.sparse."""

    def __init__(self, csr: sp.csr_matrix, check: bool = True):
        csr = sp.csr_matrix(csr, dtype=float)
        csr.sum_duplicates()
        csr.sort_indices()
        if check:
            _check_symmetric(csr)
        self.csr = csr

    @property
    def dim(self) -> int:
        return self.csr.shape[0]

    @property
    def shape(self):
        return self.csr.shape

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def __matmul__(self, x):
        return self.csr @ x

    def __repr__(self):
        return f"SparseSymMatrix(dim={self.dim}, nnz={self.csr.nnz})"


def _check_symmetric(csr):
    if csr.shape[0] != csr.shape[1]:
        raise AssemblyError(f"matrix is not square: {csr.shape}")
    diff = abs(csr - csr.T)
    if diff.nnz == 0:
        return
    scale = max(abs(csr).max(), np.finfo(float).tiny)
    worst = diff.max()
    if worst > SYMMETRY_RTOL * scale:
        raise AssemblyError(f"matrix asymmetric: max |A - A^T| = {worst:.3e} (scale {scale:.3e})")


def assemble_from_triplets(dim: int, triplets=None, *, rows=None, cols=None,
                           values=None) -> SparseSymMatrix:
    """Build a symmetric matrix from (row, col, value) triplets, summing duplicates.

    Either pass ``triplets`` as an iterable of 3-tuples or the three parallel
    arrays ``rows``, ``cols``, ``values`` (the fast path used by assembly).
    """
    if triplets is not None:
        arr = list(triplets)
        rows = np.array([t[0] for t in arr], dtype=np.int64)
        cols = np.array([t[1] for t in arr], dtype=np.int64)
        values = np.array([t[2] for t in arr], dtype=float)
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if len(rows) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= dim or cols.max() >= dim):
        raise AssemblyError(f"triplet index out of range for dimension {dim}")
    coo = sp.coo_matrix((values, (rows, cols)), shape=(dim, dim))
    return SparseSymMatrix(coo.tocsr())


class SPDFactor:
    """Factor once, solve many. Solves are deterministic and read-only."""

    def __init__(self, A: SparseSymMatrix | sp.spmatrix):
        csr = A.csr if isinstance(A, SparseSymMatrix) else sp.csr_matrix(A)
        self.A = csr
        self._norm_A = float(abs(csr).sum(axis=1).max()) if csr.shape[0] else 0.0
        if csr.shape[0] == 0:
            self._lu = None
            return
        try:
            self._lu = spla.splu(
                csr.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                options={"SymmetricMode": True})
        except RuntimeError as exc:  # exactly singular
            raise DefinitenessError(f"factorization failed: {exc}") from exc
        pivots = self._lu.U.diagonal()
        if not np.all(pivots > 0):
            bad = int(np.sum(pivots <= 0))
            raise DefinitenessError(f"{bad} non-positive pivots; matrix is not positive definite")

    def backward_error(self, x: np.ndarray, b: np.ndarray) -> float:
        """Normwise backward error |b - Ax| / (|A| |x| + |b|), infinity norms."""
        r = b - self.A @ x
        denom = self._norm_A * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
        return 0.0 if denom == 0 else float(np.abs(r).max(initial=0.0) / denom)

    def solve(self, b: np.ndarray, rtol: float = RESIDUAL_RTOL) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self._lu is None:
            return b.copy()
        x = self._lu.solve(b)
        if self.backward_error(x, b) > rtol:
            # one step of iterative refinement before giving up
            x = x + self._lu.solve(b - self.A @ x)
            err = self.backward_error(x, b)
            if err > rtol:
                raise SolverError(f"relative residual {err:.3e} exceeds {rtol:.1e}")
        return x


def solve_spd(A: SparseSymMatrix, b: np.ndarray) -> np.ndarray:
    return SPDFactor(A).solve(b)
