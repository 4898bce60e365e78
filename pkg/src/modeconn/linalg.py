"""Iterative eigen/singular-value routines used by the graph and bound code."""

import logging

import numpy as np
import scipy.sparse as sp

from . import rng as _rng

logger = logging.getLogger(__name__)


def _start_vector(n, seed=0):
    # fixed pseudo-random start: avoids exact orthogonality to the top vector
    v = 1.0 + 0.5 * _rng.standard_normal(_rng.make_rng(seed), n)
    return v / np.linalg.norm(v)


# below this smaller dimension a dense SVD is cheap and exact to roundoff
DENSE_SVD_LIMIT = 512


def spectral_norm(M, tol=1e-10, max_iter=100_000, method="auto"):
    """Largest singular value of ``M``.

    ``method="dense"`` uses LAPACK's SVD; ``"power"`` iterates on ``MᵀM`` (or
    ``MMᵀ`` when that is smaller) until the Rayleigh quotient changes by less
    than ``tol`` relative to itself. ``"auto"`` picks the SVD when the smaller
    dimension is at most ``DENSE_SVD_LIMIT``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("spectral_norm needs a nonempty 2-D matrix")
    if method not in ("auto", "dense", "power"):
        raise ValueError(f"unknown method {method!r}")
    if not np.any(M):
        return 0.0
    if method == "dense" or (method == "auto" and min(M.shape) <= DENSE_SVD_LIMIT):
        return float(np.linalg.norm(M, 2))
    G = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    v = _start_vector(G.shape[0])
    lam = float(v @ G @ v)
    for _ in range(max_iter):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ G @ v)
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    else:
        logger.warning("spectral_norm: no convergence after %d iterations", max_iter)
    return float(np.sqrt(max(lam, 0.0)))


def dense_top_eigenvalues(S, k):
    """Top-``k`` eigenvalues of a symmetric matrix by magnitude (dense solver)."""
    dense = S.toarray() if sp.issparse(S) else np.asarray(S, dtype=np.float64)
    w = np.linalg.eigvalsh(dense)
    order = np.argsort(-np.abs(w), kind="stable")
    return w[order[:k]]


def subspace_top_eigenvalues(S, k, tol=1e-8, oversample=4, max_iter=20_000, seed=0):
    """Top-``k`` eigenvalues by magnitude via block power iteration.

    Orthogonal iteration with Rayleigh-Ritz on a block of ``k + oversample``
    vectors; each sweep deflates the converged directions through the QR
    step. Stops when every wanted Ritz pair has residual below ``tol``, which
    bounds the eigenvalue error for symmetric ``S``.
    """
    n = S.shape[0]
    b = min(n, k + oversample)
    Q = _rng.standard_normal(_rng.make_rng(seed), n * b).reshape(n, b)
    Q, _ = np.linalg.qr(Q)
    theta = np.zeros(b)
    for it in range(max_iter):
        Y = S @ Q
        T = Q.T @ Y
        T = 0.5 * (T + T.T)
        theta, V = np.linalg.eigh(T)
        order = np.argsort(-np.abs(theta), kind="stable")
        theta, V = theta[order], V[:, order]
        X = Q @ V
        R = Y @ V - X * theta
        if np.all(np.linalg.norm(R[:, :k], axis=0) <= tol):
            return theta[:k]
        Q, _ = np.linalg.qr(Y @ V)
    logger.warning("subspace iteration: no convergence after %d sweeps", max_iter)
    return theta[:k]
