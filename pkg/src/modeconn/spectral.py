"""Spectral gap of a normalized adjacency and the effective propagation factor."""

from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp

from .errors import IsolatedNodeError, NonSymmetricError
from .linalg import dense_top_eigenvalues, subspace_top_eigenvalues

DENSE_LIMIT = 2000


@dataclass(frozen=True)
class SpectralReport:
    top_eigenvalues: tuple
    delta: float
    lambda_eff: object  # float, or None when d_min == 0
    d_min: int
    n: int
    method: str = "dense"

    def as_dict(self):
        return {
            "top_eigenvalues": list(self.top_eigenvalues),
            "delta": self.delta,
            "lambda_eff": self.lambda_eff,
            "d_min": self.d_min,
            "n": self.n,
            "method": self.method,
        }


def _as_matrix(a):
    M = getattr(a, "matrix", a)
    return M if sp.issparse(M) else np.asarray(M, dtype=np.float64)


def _check_symmetric(M):
    diff = (M - M.T)
    if sp.issparse(diff):
        worst = abs(diff).max() if diff.nnz else 0.0
        scale = abs(M).max() if M.nnz else 0.0
    else:
        worst = np.abs(diff).max() if diff.size else 0.0
        scale = np.abs(M).max() if M.size else 0.0
    if worst > 1e-12 * max(scale, 1.0):
        raise NonSymmetricError(f"matrix is not symmetric (max asymmetry {worst:.3g})")


def _min_offdiag_degree(M):
    S = sp.csr_matrix(M)
    S.eliminate_zeros()
    offdiag = np.diff(S.indptr) - (S.diagonal() != 0)
    return int(offdiag.min())


def gap_from_eigenvalues(eigs):
    """``1 - max |λ_i|`` over all but the algebraically largest eigenvalue.

    Clamped to ``[0, 2]`` so roundoff on disconnected graphs cannot push it
    below zero.
    """
    eigs = np.asarray(eigs, dtype=np.float64)
    top = int(np.argmax(eigs))
    rest = np.delete(eigs, top)
    if not rest.size:
        return 1.0
    return float(min(2.0, max(0.0, 1.0 - np.max(np.abs(rest)))))


def effective_propagation(delta, n, d_min, constants=None):
    """``λ_eff = 1 − Δ + C₂ √(log n / d_min)`` with the natural log."""
    from .bounds import BoundConstants

    c = constants or BoundConstants()
    if d_min < 1:
        raise IsolatedNodeError("effective propagation needs d_min >= 1")
    return 1.0 - delta + c.C2 * math.sqrt(math.log(n) / d_min)


def spectral_gap(a, k=2, method="auto", constants=None, tol=1e-8):
    """Top-``k`` eigenvalues by magnitude and the spectral gap of ``a``.

    ``method='auto'`` uses the dense symmetric solver up to n = 2000 and
    block power iteration beyond. ``d_min`` is read off the sparsity
    pattern (off-diagonal nonzeros per row).
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    M = _as_matrix(a)
    n = M.shape[0]
    _check_symmetric(M)
    k = min(k, n)
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "iterative"
    if method == "dense":
        eigs = dense_top_eigenvalues(M, k)
    elif method == "iterative":
        eigs = subspace_top_eigenvalues(sp.csr_matrix(M), k, tol=tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    delta = gap_from_eigenvalues(eigs) if n > 1 else 1.0
    d_min = _min_offdiag_degree(M)
    lam = effective_propagation(delta, n, d_min, constants) if d_min >= 1 else None
    return SpectralReport(tuple(float(x) for x in eigs), delta, lam, d_min, n, method)
