"""Interpolation paths between modes, loss barriers and loss-landscape planes."""

from dataclasses import dataclass
import math

import numpy as np

from . import rng as _rng
from .errors import AlphaRangeError, CollinearModesError, DimensionError, TrainingDivergedError
from .gnn import (
    Optimizer,
    TrainConfig,
    _backward,
    _forward,
    _mask_index,
    evaluate_metrics,
    masked_cross_entropy,
    propagation_operator,
)
from .graph import normalize_adjacency


@dataclass(frozen=True, eq=False)
class PathSpec:
    theta_a: object
    theta_b: object
    control: object = None

    def __post_init__(self):
        if not self.theta_a.same_shape(self.theta_b):
            raise DimensionError("path endpoints have different shapes")
        if self.control is not None and not self.theta_a.same_shape(self.control):
            raise DimensionError("Bezier control point has a different shape")

    @property
    def kind(self):
        return "linear" if self.control is None else "bezier"

    @classmethod
    def linear(cls, theta_a, theta_b):
        return cls(theta_a, theta_b)

    @classmethod
    def bezier(cls, theta_a, theta_b, control):
        return cls(theta_a, theta_b, control)

    def reversed(self):
        return PathSpec(self.theta_b, self.theta_a, self.control)


def point_on_path(spec, alpha):
    """Parameters at ``alpha`` on the segment or quadratic Bezier curve.

    ``alpha`` 0 and 1 return the endpoints themselves, bit for bit.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise AlphaRangeError(f"alpha={alpha} outside [0, 1]")
    a, b = spec.theta_a, spec.theta_b
    if alpha == 0.0:
        return a.with_weights(a.weights)
    if alpha == 1.0:
        return a.with_weights(b.weights)
    # offsets from theta_a, so coincident points reproduce theta_a exactly
    if spec.control is None:
        ws = [Wa + alpha * (Wb - Wa) for Wa, Wb in zip(a.weights, b.weights)]
    else:
        c1, c2 = 2.0 * alpha * (1.0 - alpha), alpha ** 2
        ws = [Wa + c1 * (Wc - Wa) + c2 * (Wb - Wa)
              for Wa, Wc, Wb in zip(a.weights, spec.control.weights, b.weights)]
    return a.with_weights(ws)


@dataclass(frozen=True, eq=False)
class PathProfile:
    alphas: np.ndarray
    train_loss: np.ndarray
    test_loss: np.ndarray
    train_acc: np.ndarray
    test_acc: np.ndarray

    def __post_init__(self):
        al = np.asarray(self.alphas, dtype=np.float64)
        if al.ndim != 1 or al.size < 2 or al[0] != 0.0 or al[-1] != 1.0 or np.any(np.diff(al) <= 0):
            raise ValueError("alphas must increase strictly from 0 to 1")
        object.__setattr__(self, "alphas", al)
        for name in ("train_loss", "test_loss", "train_acc", "test_acc"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != al.shape or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite and aligned with alphas")
            object.__setattr__(self, name, v)

    def loss(self, which):
        return self.train_loss if which == "train" else self.test_loss

    def acc(self, which):
        return self.train_acc if which == "train" else self.test_acc

    def resampled(self, alphas):
        """Profile linearly interpolated onto another grid."""
        alphas = np.asarray(alphas, dtype=np.float64)
        return PathProfile(
            alphas,
            *(np.interp(alphas, self.alphas, getattr(self, k))
              for k in ("train_loss", "test_loss", "train_acc", "test_acc")),
        )

    def rows(self):
        return list(zip(self.alphas, self.train_loss, self.test_loss, self.train_acc, self.test_acc))


def evaluate_path(spec, g, a=None, grid_size=25, alphas=None):
    """Train/test loss and accuracy at ``grid_size`` uniform points in [0, 1]."""
    if alphas is None:
        if grid_size < 3:
            raise ValueError("grid_size must be >= 3")
        alphas = np.linspace(0.0, 1.0, grid_size)
    if spec.theta_a.arch == "gcn" and a is None:
        a = normalize_adjacency(g)
    cols = {"train_loss": [], "test_loss": [], "train_acc": [], "test_acc": []}
    for alpha in alphas:
        m = evaluate_metrics(point_on_path(spec, alpha), g, a)
        cols["train_loss"].append(m.train_loss)
        cols["test_loss"].append(m.test_loss)
        cols["train_acc"].append(m.train_acc)
        cols["test_acc"].append(m.test_acc)
    return PathProfile(np.asarray(alphas, dtype=np.float64), **cols)


@dataclass(frozen=True, eq=False)
class BarrierReport:
    loss_barrier: float
    acc_barrier: float
    argmax_alpha: float
    deviation: np.ndarray
    which: str = "train"

    def as_dict(self):
        return {
            "which": self.which,
            "loss_barrier": self.loss_barrier,
            "acc_barrier": self.acc_barrier,
            "argmax_alpha": self.argmax_alpha,
            "deviation": [float(x) for x in self.deviation],
        }


def loss_barrier(profile, which="train"):
    """Grid maximum of path loss minus the chord between endpoint losses.

    The accuracy barrier is the matching maximum of chord accuracy minus path
    accuracy. Both deviations vanish at the endpoints, so both barriers are
    >= 0; the first grid point attaining the maximum is reported.
    """
    al = profile.alphas
    loss = profile.loss(which)
    acc = profile.acc(which)
    chord = loss[0] + al * (loss[-1] - loss[0])
    dev = loss - chord
    k = int(np.argmax(dev))
    acc_chord = acc[0] + al * (acc[-1] - acc[0])
    acc_dev = acc_chord - acc
    return BarrierReport(
        loss_barrier=float(dev[k]),
        acc_barrier=float(np.max(acc_dev)),
        argmax_alpha=float(al[k]),
        deviation=dev,
        which=which,
    )


def midpoint(theta_a, theta_b):
    return point_on_path(PathSpec(theta_a, theta_b), 0.5)


def train_bezier_control(theta_a, theta_b, g, a=None, cfg=None, seed=0, control=None):
    """Fit the Bezier control point by stochastic descent on E_alpha[L(phi(alpha))].

    The control starts at the linear midpoint. Each of ``cfg.epochs`` steps
    draws one ``alpha ~ U(0, 1)``, takes the training-loss gradient at
    ``phi(alpha)`` and scales it by ``2 alpha (1 - alpha)`` before the
    optimizer update. Endpoints never move.
    """
    cfg = cfg or TrainConfig()
    spec = PathSpec(theta_a, theta_b)
    if theta_a.arch == "gcn" and a is None:
        a = normalize_adjacency(g)
    S = propagation_operator(theta_a.arch, g, a)
    idx = _mask_index(g, "train")
    ctrl = control if control is not None else midpoint(theta_a, theta_b)
    rng = _rng.make_rng(seed)
    drop_rng = _rng.make_rng(_rng.derive_seed(seed, 1))
    opt = Optimizer(cfg, ctrl.shapes)
    weights = list(ctrl.weights)
    for step in range(cfg.epochs):
        alpha = float(_rng.uniform(rng, 1)[0])
        coef = 2.0 * alpha * (1.0 - alpha)
        spec = PathSpec(theta_a, theta_b, ctrl)
        p = point_on_path(spec, alpha)
        tr = _forward(p, S, g.X, cfg.dropout, drop_rng)
        loss = masked_cross_entropy(tr, g, idx, cfg.reduction)
        if not math.isfinite(loss):
            raise TrainingDivergedError(step)
        grads = _backward(p, tr, S, g.Y, idx, g.C, cfg.reduction)
        weights = opt.step(weights, [coef * G for G in grads])
        if not all(np.all(np.isfinite(W)) for W in weights):
            raise TrainingDivergedError(step)
        ctrl = ctrl.with_weights(weights)
    return ctrl


@dataclass(frozen=True, eq=False)
class LandscapeGrid:
    xs: np.ndarray
    ys: np.ndarray
    losses: np.ndarray  # shape (len(ys), len(xs))
    anchors: dict
    origin: object
    u: np.ndarray
    v: np.ndarray

    def params_at(self, x, y):
        return self.origin.unflatten(self.origin.flatten() + x * self.u + y * self.v)

    def rows(self):
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                yield x, y, self.losses[j, i]


def plane_basis(theta_a, theta_b, theta_c):
    """Gram-Schmidt basis ``(u, v)`` of the plane through three parameter sets."""
    fa, fb, fc = theta_a.flatten(), theta_b.flatten(), theta_c.flatten()
    du = fb - fa
    nu = np.linalg.norm(du)
    if nu < 1e-12:
        raise CollinearModesError("theta_a and theta_b coincide")
    u = du / nu
    dc = fc - fa
    w = dc - (dc @ u) * u
    nv = np.linalg.norm(w)
    if nv < 1e-12 * max(1.0, np.linalg.norm(dc)):
        raise CollinearModesError("theta_c lies on the line through theta_a and theta_b")
    v = w / nv
    anchors = {"a": (0.0, 0.0), "b": (float(nu), 0.0), "c": (float(dc @ u), float(nv))}
    return u, v, anchors


def landscape_plane(theta_a, theta_b, theta_c, g, a=None, grid=(21, 21), extent=1.2):
    """Training loss over the plane spanned by three modes.

    Points are ``theta_a + x u + y v``. The x and y ranges cover the anchor
    bounding box scaled by ``extent`` about its centre.
    """
    u, v, anchors = plane_basis(theta_a, theta_b, theta_c)
    if theta_a.arch == "gcn" and a is None:
        a = normalize_adjacency(g)
    nx, ny = int(grid[0]), int(grid[1])
    ax = np.array([p[0] for p in anchors.values()])
    ay = np.array([p[1] for p in anchors.values()])

    def span(vals, count):
        lo, hi = vals.min(), vals.max()
        mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0 * extent
        return np.linspace(mid - half, mid + half, count)

    xs, ys = span(ax, nx), span(ay, ny)
    base = theta_a.flatten()
    losses = np.empty((ny, nx))
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            p = theta_a.unflatten(base + x * u + y * v)
            losses[j, i] = evaluate_metrics(p, g, a).train_loss
    return LandscapeGrid(xs, ys, losses, anchors, theta_a, u, v)
