"""Evaluators for the barrier upper/lower bounds and the generalization bound.

Every big-O expression is evaluated with implied constant 1 and natural logs.
"""

from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np

from .errors import DimensionError, InvalidParamsError, InvalidSplitError
from .linalg import spectral_norm


@dataclass(frozen=True)
class BoundConstants:
    """Constants entering the bounds.

    ``C_L`` is the curvature offset of the barrier upper bound, ``C1``/``C2``
    the community-separation and concentration constants, ``L_ell`` the
    Lipschitz constant of softmax cross-entropy in the logits and ``L_F`` the
    curvature constant of the quadratic lower bound.
    """

    C_L: float = 0.0
    C1: float = 1.0
    C2: float = 1.0
    L_ell: float = math.sqrt(2.0)
    L_F: float = 1.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not math.isfinite(v):
                raise InvalidParamsError(f"{name} must be finite")
        if self.C_L < 0:
            raise InvalidParamsError("C_L must be >= 0")
        if self.C1 <= 0 or self.C2 <= 0 or self.L_F <= 0:
            raise InvalidParamsError("C1, C2 and L_F must be > 0")

    def as_dict(self):
        return asdict(self)


def _pair_weights(theta_a, theta_b):
    if not theta_a.same_shape(theta_b):
        raise DimensionError("modes have different shapes")
    return theta_a.weights, theta_b.weights


def downstream_norm_factors(theta_a, theta_b):
    """``N_l`` for each layer: min over the two modes of the product of
    spectral norms of the layers after ``l``. The last layer gets 1."""
    wa, wb = _pair_weights(theta_a, theta_b)
    na = [spectral_norm(W, tol=1e-10) for W in wa]
    nb = [spectral_norm(W, tol=1e-10) for W in wb]
    L = len(wa)
    N = []
    for l in range(L):
        N.append(min(math.prod(na[l + 1:]), math.prod(nb[l + 1:])))
    return N, na, nb


@dataclass(frozen=True)
class Theorem32Terms:
    value_at_0: float
    value_at_1: float
    weighted_sum: float
    N: tuple
    diff_norms: tuple

    @property
    def bound(self):
        return max(self.value_at_0, self.value_at_1)


def theorem32_terms(theta_a, theta_b, X_norm, lambda_eff, constants=None):
    """Both endpoint values of the affine-in-λ upper bound.

    ``value_at_1 = L_ell · lambda_eff · X_norm · Σ_l N_l ‖W_a^l − W_b^l‖₂``
    (sum over layers 1..L) and ``value_at_0 = C_L``.
    """
    c = constants or BoundConstants()
    wa, wb = _pair_weights(theta_a, theta_b)
    N, _, _ = downstream_norm_factors(theta_a, theta_b)
    diffs = [spectral_norm(A - B, tol=1e-10) for A, B in zip(wa, wb)]
    s = math.fsum(Nl * dl for Nl, dl in zip(N, diffs))
    v1 = c.L_ell * lambda_eff * X_norm * s
    return Theorem32Terms(float(c.C_L), float(v1), float(s), tuple(N), tuple(diffs))


def theorem32_bound(theta_a, theta_b, X_norm, lambda_eff, constants=None, lambda_grid=101):
    """Max over a uniform λ grid of ``(1−λ) C_L + λ · value_at_1``."""
    if lambda_grid < 2:
        raise ValueError("lambda_grid must be >= 2")
    t = theorem32_terms(theta_a, theta_b, X_norm, lambda_eff, constants)
    lam = np.linspace(0.0, 1.0, lambda_grid)
    return float(np.max((1.0 - lam) * t.value_at_0 + lam * t.value_at_1))


def corollary_bound(theta_a, theta_b, X_norm, delta, n, d_min, constants=None):
    """Graph-property form: the upper bound with ``λ_eff`` built from Δ."""
    from .spectral import effective_propagation

    lam = effective_propagation(delta, n, d_min, constants)
    return theorem32_bound(theta_a, theta_b, X_norm, lam, constants)


def csbm_bound(params, n, d, d_min, constants=None):
    """``σ √(d log n) (C2 √(log n / d_min) − (h − ½)² (p_in + p_out) / C1)``.

    May be negative; callers that report it clamp at zero.
    """
    c = constants or BoundConstants()
    if d_min < 1:
        from .errors import IsolatedNodeError

        raise IsolatedNodeError("csbm bound needs d_min >= 1")
    h = params.homophily()
    logn = math.log(n)
    inner = c.C2 * math.sqrt(logn / d_min) - (h - 0.5) ** 2 / c.C1 * params.density()
    return params.sigma * math.sqrt(d * logn) * inner


def barrier_lower_bound(theta_a, theta_b, L_F):
    """``(L_F / 8) ‖θ_a − θ_b‖²``, the formula as stated (no sign check)."""
    if not theta_a.same_shape(theta_b):
        raise DimensionError("modes have different shapes")
    if not L_F > 0:
        raise InvalidParamsError("L_F must be > 0")
    diff = theta_a.flatten() - theta_b.flatten()
    return L_F / 8.0 * float(diff @ diff)


@dataclass(frozen=True)
class CurvatureEstimate:
    L_F: float
    midpoint_deviation: float
    assumption_violated: bool


def estimate_curvature_constant(theta_a, theta_b, midpoint_deviation):
    """``L_F ≈ 8 · dev / ‖Δθ‖²`` from the measured midpoint excess over the chord.

    A non-positive deviation means the path is not curved upward at the
    midpoint; the estimate is then flagged and ``L_F`` falls back to the
    smallest positive float so downstream formulas stay defined.
    """
    diff = theta_a.flatten() - theta_b.flatten()
    sq = float(diff @ diff)
    if sq == 0.0:
        return CurvatureEstimate(math.nan, float(midpoint_deviation), True)
    est = 8.0 * midpoint_deviation / sq
    if est > 0:
        return CurvatureEstimate(est, float(midpoint_deviation), False)
    return CurvatureEstimate(np.finfo(float).tiny, float(midpoint_deviation), True)


@dataclass(frozen=True)
class CurvatureDiagnostic:
    measured_barrier: float
    C_L_measured: float
    bound: float
    within_bound: bool

    def as_dict(self):
        return asdict(self)


def path_curvature_constant(profile, which="train"):
    """``max |∂²L/∂α²| / 8`` along a path profile, from grid second differences.

    For a twice-differentiable path loss this caps the excess over the chord,
    so it is the measured stand-in for ``C_L``.
    """
    al, loss = profile.alphas, profile.loss(which)
    if al.size < 3:
        return 0.0
    second = np.gradient(np.gradient(loss, al), al)
    return float(np.max(np.abs(second))) / 8.0


def curvature_diagnostic(terms, profile, which="train"):
    """Compare the measured barrier with the upper bound at the measured ``C_L``.

    ``terms`` is a :class:`Theorem32Terms`. The comparison is informational:
    the bound's constants are asymptotic, so a miss is reported, not raised.
    """
    from .paths import loss_barrier

    barrier = loss_barrier(profile, which).loss_barrier
    c_l = path_curvature_constant(profile, which)
    bound = max(c_l, terms.value_at_1)
    return CurvatureDiagnostic(barrier, c_l, bound, bool(barrier <= bound))


def _check_gen_inputs(n, m, T, delta_conf):
    if not 0 < m < n:
        raise InvalidSplitError(f"need 0 < m < n, got m={m}, n={n}")
    if T < 2:
        raise InvalidParamsError("T must be >= 2")
    if not 0.0 < delta_conf < 1.0:
        raise InvalidParamsError("delta_conf must be in (0, 1)")


def split_factor(n, m):
    """``n^{3/2} / (m (n − m))``."""
    return n ** 1.5 / (m * (n - m))


def generalization_bound(barrier, n, m, T, rho, delta_conf):
    """``8 B n^{3/2} / (m (n−m)) · log T · T^ρ · log(1/δ)`` with ``c(T) = T``."""
    _check_gen_inputs(n, m, T, delta_conf)
    return 8.0 * barrier * split_factor(n, m) * math.log(T) * T ** rho * math.log(1.0 / delta_conf)


RATE_CASES = ("a", "b", "c", "d")


def rate_case(alpha):
    """Map a step-size exponent ``α ∈ (0, 1]`` to its convergence-rate regime label."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidParamsError(f"alpha must be in (0, 1], got {alpha}")
    if alpha < 0.5:
        return "a"
    if alpha == 0.5:
        return "b"
    if alpha < 1.0:
        return "c"
    return "d"


def rate_case_bound(barrier, n, m, T, delta_conf, alpha):
    """Generalization rate with α-dependent powers of log T and T.

    The Lipschitz prefactor is ``8 B n^{3/2}/(m(n−m))``; cases a–c add the
    ``T^{−α}`` optimisation remainder and case d adds ``log T log³(1/δ) / T``.
    """
    _check_gen_inputs(n, m, T, delta_conf)
    case = rate_case(alpha)
    pre = 8.0 * barrier * split_factor(n, m)
    logT, logd = math.log(T), math.log(1.0 / delta_conf)
    if case == "a":
        return pre * math.sqrt(logT) * T ** (0.5 - alpha) * logd + T ** -alpha
    if case == "b":
        return pre * logT * logd + T ** -alpha
    if case == "c":
        return pre * math.sqrt(logT) * logd + T ** -alpha
    return pre * math.sqrt(logT) * logd + logT * logd ** 3 / T


def activation_lipschitz(act):
    """Lipschitz constant of relu (1), leaky_relu and elu (``max(1, α)``).

    Accepts an :class:`~modeconn.gnn.Activation` or a spec string such as
    ``"elu(1.5)"``.
    """
    from .gnn import Activation

    if isinstance(act, str):
        act = Activation.parse(act)
    if act.kind == "relu":
        return 1.0
    if act.kind in ("leaky_relu", "elu"):
        return max(1.0, float(act.alpha))
    raise InvalidParamsError(f"no Lipschitz constant for {act.kind!r}")


@dataclass(frozen=True)
class BoundReport:
    theorem32_bound: float
    corollary_bound: float
    csbm_bound: object  # float or None when no CSBM parameters are known
    lower_bound: float
    gen_bound: float
    inputs_echo: dict = field(default_factory=dict)

    @property
    def csbm_bound_clamped(self):
        return None if self.csbm_bound is None else max(0.0, self.csbm_bound)

    def as_dict(self):
        return {
            "theorem32_bound": self.theorem32_bound,
            "corollary_bound": self.corollary_bound,
            "csbm_bound": self.csbm_bound,
            "csbm_bound_clamped": self.csbm_bound_clamped,
            "lower_bound": self.lower_bound,
            "gen_bound": self.gen_bound,
            "inputs_echo": self.inputs_echo,
        }

    def to_json(self):
        from .io import dumps_json

        return dumps_json(self.as_dict())

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d.pop("csbm_bound_clamped", None)
        return cls(**d)


def evaluate_bounds(theta_a, theta_b, g, spectral, barrier, constants=None,
                    csbm_params=None, T=None, rho=0.25, delta_conf=0.05):
    """Evaluate every bound for one mode pair on graph ``g``.

    ``spectral`` is a :class:`~modeconn.spectral.SpectralReport` of the
    graph's normalized adjacency; ``barrier`` the measured loss barrier used
    by the generalization bound; ``T`` defaults to the training epoch count
    in the mode provenance, or 200.
    """
    from .graph import feature_spectral_norm
    from .spectral import effective_propagation

    c = constants or BoundConstants()
    X_norm = feature_spectral_norm(g.X)
    lam = effective_propagation(spectral.delta, g.n, spectral.d_min, c)
    terms = theorem32_terms(theta_a, theta_b, X_norm, lam, c)
    t32 = theorem32_bound(theta_a, theta_b, X_norm, lam, c)
    cb = csbm_bound(csbm_params, g.n, g.d, spectral.d_min, c) if csbm_params is not None else None
    lb = barrier_lower_bound(theta_a, theta_b, c.L_F)
    m = int(np.count_nonzero(g.train_mask))
    T = int(T or 200)
    gen = generalization_bound(max(barrier, 0.0), g.n, m, T, rho, delta_conf)
    echo = {
        "constants": c.as_dict(),
        "X_norm": X_norm,
        "delta": spectral.delta,
        "lambda_eff": lam,
        "n": g.n,
        "d": g.d,
        "d_min": spectral.d_min,
        "m": m,
        "T": T,
        "rho": rho,
        "delta_conf": delta_conf,
        "barrier": barrier,
        "N": list(terms.N),
        "diff_norms": list(terms.diff_norms),
        "value_at_0": terms.value_at_0,
        "value_at_1": terms.value_at_1,
        "csbm_params": csbm_params.as_dict() if csbm_params is not None else None,
    }
    return BoundReport(t32, t32, cb, lb, gen, echo)
