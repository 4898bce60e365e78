"""GCN / mean-aggregation / MLP models with manual backprop and training."""

from dataclasses import asdict, dataclass, field
import math
import re

import numpy as np

from . import rng as _rng
from .errors import DimensionError, EmptyMaskError, InvalidParamsError, TrainingDivergedError
from .graph import normalize_adjacency

ARCHS = ("gcn", "sage_mean", "mlp")
PROB_FLOOR = 1e-12

_DEFAULT_ALPHA = {"relu": 0.0, "leaky_relu": 0.01, "elu": 1.0}


@dataclass(frozen=True)
class Activation:
    kind: str = "relu"
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in _DEFAULT_ALPHA:
            raise InvalidParamsError(f"unknown activation {self.kind!r}")
        if self.kind == "elu" and not self.alpha > 0:
            raise InvalidParamsError("elu needs alpha > 0")

    @classmethod
    def parse(cls, text):
        """Parse ``relu``, ``leaky_relu(0.2)`` or ``elu(1.5)``."""
        if isinstance(text, Activation):
            return text
        m = re.fullmatch(r"\s*([a-z_]+)\s*(?:\(\s*([^)]*)\s*\))?\s*", str(text))
        if not m:
            raise InvalidParamsError(f"cannot parse activation {text!r}")
        kind, arg = m.group(1), m.group(2)
        if kind not in _DEFAULT_ALPHA:
            raise InvalidParamsError(f"unknown activation {kind!r}")
        alpha = float(arg) if arg else _DEFAULT_ALPHA[kind]
        return cls(kind, alpha)

    def __str__(self):
        return "relu" if self.kind == "relu" else f"{self.kind}({self.alpha!r})"

    def __call__(self, x):
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "leaky_relu":
            return np.where(x > 0, x, self.alpha * x)
        return np.where(x > 0, x, self.alpha * np.expm1(np.minimum(x, 0.0)))

    def derivative(self, x):
        # subgradient at 0 taken from the negative side (0 for relu)
        if self.kind == "relu":
            return (x > 0).astype(np.float64)
        if self.kind == "leaky_relu":
            return np.where(x > 0, 1.0, self.alpha)
        return np.where(x > 0, 1.0, self.alpha * np.exp(np.minimum(x, 0.0)))


@dataclass(frozen=True, eq=False)
class ModelParams:
    arch: str
    layer_dims: tuple
    weights: tuple
    activation: Activation = field(default_factory=Activation)

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise InvalidParamsError(f"unknown architecture {self.arch!r}")
        dims = tuple(int(x) for x in self.layer_dims)
        if len(dims) < 2 or min(dims) < 1:
            raise DimensionError(f"bad layer_dims {dims}")
        ws = []
        for l, W in enumerate(self.weights):
            W = np.array(W, dtype=np.float64)
            if l + 1 >= len(dims) or W.shape != (dims[l], dims[l + 1]):
                raise DimensionError(f"weight {l} has shape {W.shape}, layer_dims {dims}")
            if not np.all(np.isfinite(W)):
                raise InvalidParamsError(f"weight {l} has non-finite entries")
            W.setflags(write=False)
            ws.append(W)
        if len(ws) != len(dims) - 1:
            raise DimensionError(f"{len(ws)} weights for layer_dims {dims}")
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "activation", Activation.parse(self.activation))

    @property
    def num_layers(self):
        return len(self.weights)

    @property
    def shapes(self):
        return [W.shape for W in self.weights]

    @property
    def num_params(self):
        return sum(W.size for W in self.weights)

    def flatten(self):
        return np.concatenate([W.ravel() for W in self.weights])

    def unflatten(self, vec):
        """New params with this architecture and the weights taken from ``vec``."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.num_params,):
            raise DimensionError(f"expected {self.num_params} values, got {vec.shape}")
        ws, k = [], 0
        for shape in self.shapes:
            size = shape[0] * shape[1]
            ws.append(vec[k:k + size].reshape(shape).copy())
            k += size
        return ModelParams(self.arch, self.layer_dims, tuple(ws), self.activation)

    def with_weights(self, weights):
        return ModelParams(self.arch, self.layer_dims, tuple(weights), self.activation)

    def same_shape(self, other):
        return (
            self.arch == other.arch
            and self.layer_dims == other.layer_dims
            and self.activation == other.activation
        )


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Per-layer activations ``H[0..L]`` (``H[L]`` is ``Z``), logits and softmax.

    ``pre`` and ``inputs`` keep the pre-activations and the (possibly
    dropped-out) layer inputs needed by backprop.
    """

    H: list
    Z: np.ndarray
    P: np.ndarray
    pre: list = field(default_factory=list, repr=False)
    inputs: list = field(default_factory=list, repr=False)
    drop_masks: list = field(default_factory=list, repr=False)


def softmax(Z):
    Z = np.asarray(Z, dtype=np.float64)
    e = np.exp(Z - Z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def propagation_operator(arch, g, a=None):
    if arch == "gcn":
        return (a if a is not None else normalize_adjacency(g)).matrix
    if arch == "sage_mean":
        return g.mean_adjacency
    return None


def _forward(p, S, X, dropout=0.0, rng=None):
    H, pre, inputs, masks = [X], [], [], []
    h = X
    L = p.num_layers
    for l, W in enumerate(p.weights):
        if dropout > 0 and l > 0:
            keep = _rng.uniform(rng, h.size).reshape(h.shape) >= dropout
            mask = keep / (1.0 - dropout)
            h = h * mask
            masks.append(mask)
        else:
            masks.append(None)
        inputs.append(h)
        m = h @ W
        if S is not None:
            m = S @ m
        pre.append(m)
        h = m if l == L - 1 else p.activation(m)
        H.append(h)
    Z = H[-1]
    return ForwardTrace(H=H, Z=Z, P=softmax(Z), pre=pre, inputs=inputs, drop_masks=masks)


def forward(p, g, a=None):
    """Evaluation-mode forward pass (no dropout).

    Hidden layers apply aggregation, weight and activation; the last layer is
    aggregation and weight only, followed by softmax. ``mlp`` skips
    aggregation.
    """
    if p.layer_dims[0] != g.d:
        raise DimensionError(f"model expects d={p.layer_dims[0]}, graph has d={g.d}")
    if p.layer_dims[-1] != g.C:
        raise DimensionError(f"model emits {p.layer_dims[-1]} classes, graph has C={g.C}")
    return _forward(p, propagation_operator(p.arch, g, a), g.X)


def _mask_index(g, which):
    if isinstance(which, str):
        idx = np.flatnonzero(g.mask(which))
    else:
        idx = np.asarray(which, dtype=np.int64)
    if idx.size == 0:
        raise EmptyMaskError(f"mask {which if isinstance(which, str) else '<custom>'} is empty")
    return idx


def masked_cross_entropy(tr, g, which="train", reduction="mean"):
    """Cross-entropy in nats over the masked nodes; ``reduction`` is mean or sum."""
    idx = _mask_index(g, which)
    p_true = np.maximum(tr.P[idx, g.Y[idx]], PROB_FLOOR)
    total = -np.sum(np.log(p_true))
    return float(total / idx.size if reduction == "mean" else total)


def masked_accuracy(tr, g, which="train"):
    idx = _mask_index(g, which)
    pred = np.argmax(tr.P[idx], axis=1)  # first maximum wins ties
    return float(np.mean(pred == g.Y[idx]))


def _backward(p, tr, S, Y, idx, C, reduction="mean"):
    dZ = np.zeros_like(tr.Z)
    dZ[idx] = tr.P[idx]
    dZ[idx, Y[idx]] -= 1.0
    # gradient of the unclamped loss; differs only where P[i, y] < 1e-12
    if reduction == "mean":
        dZ /= idx.size
    grads = [None] * p.num_layers
    dM = dZ
    for l in range(p.num_layers - 1, -1, -1):
        G = dM if S is None else S.T @ dM
        grads[l] = tr.inputs[l].T @ G
        if l == 0:
            break
        dH = G @ p.weights[l].T
        if tr.drop_masks[l] is not None:
            dH = dH * tr.drop_masks[l]
        dM = dH * p.activation.derivative(tr.pre[l - 1])
    return grads


def backward(p, g, a=None, which="train", reduction="mean"):
    """Exact gradients of :func:`masked_cross_entropy` w.r.t. every weight."""
    S = propagation_operator(p.arch, g, a)
    tr = forward(p, g, a)
    return _backward(p, tr, S, g.Y, _mask_index(g, which), g.C, reduction)


def loss_and_grad(p, g, a=None, which="train", reduction="mean"):
    S = propagation_operator(p.arch, g, a)
    tr = forward(p, g, a)
    idx = _mask_index(g, which)
    return masked_cross_entropy(tr, g, idx, reduction), _backward(p, tr, S, g.Y, idx, g.C, reduction)



def finite_difference_grad(p, g, a=None, h=1e-5, which="train", reduction="mean"):
    """Central differences ``(L(θ + h e_k) − L(θ − h e_k)) / 2h`` for every weight."""
    S = propagation_operator(p.arch, g, a)
    idx = _mask_index(g, which)
    flat = p.flatten()
    out = np.empty_like(flat)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        lp = masked_cross_entropy(_forward(p.unflatten(flat), S, g.X), g, idx, reduction)
        flat[k] = old - h
        lm = masked_cross_entropy(_forward(p.unflatten(flat), S, g.X), g, idx, reduction)
        flat[k] = old
        out[k] = (lp - lm) / (2.0 * h)
    return p.unflatten(out).weights


def gradient_check(p, g, a=None, h=1e-5, floor=1e-5, which="train", reduction="mean"):
    """Largest ``|analytic − fd| / max(|analytic|, |fd|, floor)`` over all weights.

    The floor keeps coordinates whose gradient is at the finite-difference
    roundoff level (about 1e-11 for O(1) losses) from dominating.
    """
    an = np.concatenate([G.ravel() for G in backward(p, g, a, which, reduction)])
    fd = np.concatenate([G.ravel() for G in finite_difference_grad(p, g, a, h, which, reduction)])
    denom = np.maximum(np.maximum(np.abs(an), np.abs(fd)), floor)
    return float(np.max(np.abs(an - fd) / denom)) if an.size else 0.0


def kink_margin(p, g, a=None):
    """Smallest ``|pre-activation|`` over hidden layers (inf for one layer).

    Finite differences straddling a ReLU kink are meaningless, so gradient
    checks skip instances whose margin is comparable to the step.
    """
    tr = forward(p, g, a)
    hidden = tr.pre[:-1]
    return float(min((np.min(np.abs(m)) for m in hidden if m.size), default=np.inf))

# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0
    weight_decay: float = 5e-4
    init: str = "glorot"
    init_scale: float = 0.1
    data_order_seed: int = 0
    batch_fraction: float = 1.0
    dropout: float = 0.0
    hidden: int = 64
    num_layers: int = 2
    activation: str = "relu"
    reduction: str = "mean"

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidParamsError("epochs must be >= 0")
        if self.lr < 0 or not math.isfinite(self.lr):
            raise InvalidParamsError("lr must be finite and >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise InvalidParamsError(f"unknown optimizer {self.optimizer!r}")
        if self.init not in ("glorot", "uniform"):
            raise InvalidParamsError(f"unknown init {self.init!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidParamsError("dropout must be in [0, 1)")
        if not 0.0 < self.batch_fraction <= 1.0:
            raise InvalidParamsError("batch_fraction must be in (0, 1]")
        if self.num_layers < 1 or self.hidden < 1:
            raise InvalidParamsError("need num_layers >= 1 and hidden >= 1")
        if self.reduction not in ("mean", "sum"):
            raise InvalidParamsError("reduction must be mean or sum")
        Activation.parse(self.activation)

    def as_dict(self):
        return asdict(self)

    def layer_dims(self, d, C):
        return (d,) + (self.hidden,) * (self.num_layers - 1) + (C,)


def init_params(arch, layer_dims, activation="relu", init="glorot", scale=0.1, seed=0):
    """Initial weights, drawn layer by layer (row-major) from one Philox stream.

    ``glorot``: U(-a, a) with ``a = sqrt(6 / (fan_in + fan_out))``;
    ``uniform``: U(-scale, scale).
    """
    rng = _rng.make_rng(seed)
    ws = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        a = math.sqrt(6.0 / (fan_in + fan_out)) if init == "glorot" else float(scale)
        u = _rng.uniform(rng, fan_in * fan_out).reshape(fan_in, fan_out)
        ws.append(a * (2.0 * u - 1.0))
    return ModelParams(arch, tuple(layer_dims), tuple(ws), Activation.parse(activation))


class Optimizer:
    """SGD (optionally with momentum) or Adam; weight decay is added to the gradient."""

    def __init__(self, cfg, shapes):
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, weights, grads):
        cfg = self.cfg
        self.t += 1
        out = []
        for k, (W, g) in enumerate(zip(weights, grads)):
            if cfg.weight_decay:
                g = g + cfg.weight_decay * W
            if cfg.optimizer == "sgd":
                if cfg.momentum:
                    self.m[k] = cfg.momentum * self.m[k] + g
                    g = self.m[k]
                out.append(W - cfg.lr * g)
                continue
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g * g
            m_hat = self.m[k] / (1.0 - cfg.beta1 ** self.t)
            v_hat = self.v[k] / (1.0 - cfg.beta2 ** self.t)
            out.append(W - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps))
        return out


@dataclass(frozen=True)
class Metrics:
    train_loss: float
    test_loss: float
    train_acc: float
    test_acc: float

    @property
    def generalization_gap(self):
        return self.test_loss - self.train_loss

    def as_dict(self):
        d = asdict(self)
        d["generalization_gap"] = self.generalization_gap
        return d


@dataclass(frozen=True, eq=False)
class Mode:
    params: ModelParams
    metrics: Metrics
    provenance: dict = field(default_factory=dict)


def evaluate_metrics(p, g, a=None, reduction="mean"):
    tr = forward(p, g, a)
    return Metrics(
        train_loss=masked_cross_entropy(tr, g, "train", reduction),
        test_loss=masked_cross_entropy(tr, g, "test", reduction),
        train_acc=masked_accuracy(tr, g, "train"),
        test_acc=masked_accuracy(tr, g, "test"),
    )


def _check_finite(loss, weights, epoch):
    if not math.isfinite(loss) or not all(np.all(np.isfinite(W)) for W in weights):
        raise TrainingDivergedError(epoch)


def train_mode(g, cfg=None, arch="gcn", seed=0, a=None):
    """Train one mode from the init drawn with ``seed``.

    Full batch by default. With ``batch_fraction < 1`` every epoch shuffles
    the training nodes with the ``cfg.data_order_seed`` stream and takes one
    step per batch. Dropout masks use a stream derived from ``seed``.
    """
    cfg = cfg or TrainConfig()
    if arch not in ARCHS:
        raise InvalidParamsError(f"unknown architecture {arch!r}")
    if arch == "gcn" and a is None:
        a = normalize_adjacency(g)
    p = init_params(arch, cfg.layer_dims(g.d, g.C), cfg.activation, cfg.init, cfg.init_scale, seed)
    S = propagation_operator(arch, g, a)
    train_idx = _mask_index(g, "train")
    order_rng = _rng.make_rng(cfg.data_order_seed)
    drop_rng = _rng.make_rng(_rng.derive_seed(seed, 1))
    opt = Optimizer(cfg, p.shapes)
    weights = list(p.weights)
    batch = max(1, math.ceil(cfg.batch_fraction * train_idx.size))
    for epoch in range(cfg.epochs):
        if batch >= train_idx.size:
            batches = [train_idx]
        else:
            perm = train_idx[_rng.permutation(order_rng, train_idx.size)]
            batches = [perm[k:k + batch] for k in range(0, perm.size, batch)]
        for idx in batches:
            tr = _forward(p, S, g.X, cfg.dropout, drop_rng)
            loss = masked_cross_entropy(tr, g, idx, cfg.reduction)
            _check_finite(loss, weights, epoch)
            grads = _backward(p, tr, S, g.Y, idx, g.C, cfg.reduction)
            weights = opt.step(weights, grads)
            try:
                p = p.with_weights(weights)
            except InvalidParamsError as exc:
                raise TrainingDivergedError(epoch) from exc
    metrics = evaluate_metrics(p, g, a, cfg.reduction)
    _check_finite(metrics.train_loss, p.weights, cfg.epochs)
    prov = {"graph_id": g.fingerprint(), "graph_name": g.name, "arch": arch, "seed": int(seed),
            "epochs": int(cfg.epochs), "train_config": cfg.as_dict()}
    return Mode(params=p, metrics=metrics, provenance=prov)
