"""Two-class contextual stochastic block model (CSBM) generator."""

from dataclasses import dataclass, replace
import math
import warnings

import numpy as np

from . import rng as _rng
from .errors import InvalidParamsError
from .graph import GraphDataset


class HomophilyBoundaryWarning(UserWarning):
    """Emitted when a sweep produces ``p_in == p_out`` (homophily exactly 0.5)."""


@dataclass(frozen=True)
class CsbmParams:
    """CSBM parameters.

    Class means sit at ``∓mu_gap/2`` on the first feature axis and ``sigma`` is
    the per-coordinate feature standard deviation. ``p_in == p_out`` is
    accepted as a degenerate boundary (see :attr:`is_boundary`).
    """

    n: int
    d: int
    p_in: float
    p_out: float
    sigma: float = 1.0
    mu_gap: float = 2.0

    def __post_init__(self):
        if self.n < 2:
            raise InvalidParamsError("n must be at least 2")
        if self.d < 1:
            raise InvalidParamsError("d must be at least 1")
        if not (0.0 <= self.p_out <= self.p_in <= 1.0) or self.p_in == 0.0:
            raise InvalidParamsError(
                f"need 0 <= p_out <= p_in <= 1 with p_in > 0, got p_in={self.p_in}, p_out={self.p_out}"
            )
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise InvalidParamsError("sigma must be finite and >= 0")
        if not math.isfinite(self.mu_gap):
            raise InvalidParamsError("mu_gap must be finite")

    def homophily(self):
        return self.p_in / (self.p_in + self.p_out)

    def density(self):
        return self.p_in + self.p_out

    def separability(self):
        """``mu_gap / sigma``; infinite for noiseless features."""
        return math.inf if self.sigma == 0 else self.mu_gap / self.sigma

    @property
    def is_boundary(self):
        return self.p_in == self.p_out

    def as_dict(self):
        return {
            "n": self.n,
            "d": self.d,
            "p_in": self.p_in,
            "p_out": self.p_out,
            "sigma": self.sigma,
            "mu_gap": self.mu_gap,
        }


@dataclass(frozen=True)
class ExpectedSpectrum:
    lambda1: float
    lambda2: float
    delta: float


def class_means(params):
    means = np.zeros((2, params.d))
    means[0, 0] = -params.mu_gap / 2.0
    means[1, 0] = params.mu_gap / 2.0
    return means


def generate_csbm(params, seed, train_frac=0.1, test_frac=0.2, name=None):
    """Sample a CSBM graph.

    Nodes ``0..n/2-1`` form class 0 and the rest class 1. Random draws come
    from one Philox stream in a fixed order: one uniform per unordered pair
    ``(i, j)``, ``i < j``, row-major; then ``n*d`` Box-Muller normals for the
    features, row-major; then a Fisher-Yates permutation of each class (class
    0 first) whose prefix gives the stratified train and test nodes.
    """
    if params.n % 2:
        raise InvalidParamsError(f"n must be even, got {params.n}")
    if not (0.0 <= train_frac and 0.0 <= test_frac and train_frac + test_frac <= 1.0):
        raise InvalidParamsError("train/test fractions must be >= 0 and sum to <= 1")
    n, half = params.n, params.n // 2
    rng = _rng.make_rng(seed)
    Y = np.repeat(np.array([0, 1], dtype=np.int64), half)

    src, dst = [], []
    for i in range(n - 1):
        u = _rng.uniform(rng, n - i - 1)
        j = np.arange(i + 1, n)
        p = np.where(Y[j] == Y[i], params.p_in, params.p_out)
        hit = j[u < p]
        src.append(np.full(len(hit), i, dtype=np.int64))
        dst.append(hit)
    edges = np.stack([np.concatenate(src), np.concatenate(dst)], axis=1) if n > 1 else np.zeros((0, 2), int)

    noise = _rng.standard_normal(rng, n * params.d).reshape(n, params.d)
    X = class_means(params)[Y] + params.sigma * noise

    n_train = int(round(train_frac * half))
    n_test = int(round(test_frac * half))
    train = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    for c in (0, 1):
        members = np.arange(c * half, (c + 1) * half)
        perm = members[_rng.permutation(rng, half)]
        train[perm[:n_train]] = True
        test[perm[n_train:n_train + n_test]] = True

    return GraphDataset(
        n=n, edges=edges, X=X, Y=Y, train_mask=train, test_mask=test, C=2,
        name=name or f"csbm-seed{seed}",
    )


def expected_spectrum(params):
    p = params.density()
    if p <= 0:
        raise InvalidParamsError("density must be positive")
    lam2 = (params.p_in - params.p_out) / p
    return ExpectedSpectrum(lambda1=1.0, lambda2=lam2, delta=2.0 * params.p_out / p)


def expected_normalized_adjacency(params):
    """Dense ``E[A] / d̄`` with ``E[A] = (p_in+p_out)/2·J + (p_in−p_out)/2·xxᵀ``.

    ``d̄ = n(p_in+p_out)/2`` is the expected degree. The diagonal carries
    ``p_in`` (the rank-2 form), so the nonzero eigenvalues are exactly ``1``
    and ``(p_in−p_out)/(p_in+p_out)``.
    """
    n, half = params.n, params.n // 2
    x = np.concatenate([np.ones(half), -np.ones(n - half)])
    A_bar = (params.p_in + params.p_out) / 2.0 + (params.p_in - params.p_out) / 2.0 * np.outer(x, x)
    d_bar = n * params.density() / 2.0
    return A_bar / d_bar


SWEEP_AXES = ("density", "homophily", "sigma")


def sweep_grid(axis, values, base):
    """Parameter list varying exactly one of density, homophily or sigma.

    Density sweeps keep ``h`` of ``base`` fixed, homophily sweeps keep
    ``p = p_in + p_out`` fixed; ``p_in = h·p`` and ``p_out = (1−h)·p``.
    """
    if axis not in SWEEP_AXES:
        raise InvalidParamsError(f"unknown sweep axis {axis!r}")
    out = []
    for v in values:
        v = float(v)
        if axis == "sigma":
            if v < 0:
                raise InvalidParamsError("sigma must be >= 0")
            out.append(replace(base, sigma=v))
            continue
        h, p = base.homophily(), base.density()
        if axis == "density":
            p = v
        else:
            h = v
        p_in, p_out = h * p, (1.0 - h) * p
        if not (0.0 <= p_out <= p_in <= 1.0) or p <= 0 or h < 0.5 or h > 1.0:
            raise InvalidParamsError(
                f"{axis}={v} gives p_in={p_in}, p_out={p_out} outside 0 <= p_out <= p_in <= 1"
            )
        if p_in == p_out:
            warnings.warn(
                f"{axis}={v}: p_in == p_out, homophily at the 0.5 boundary",
                HomophilyBoundaryWarning,
                stacklevel=2,
            )
        out.append(replace(base, p_in=p_in, p_out=p_out))
    return out
