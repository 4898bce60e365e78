"""Correlation statistics, Wasserstein-1, mode-connectivity distance and transfer."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import IncompatibleDomainsError, UndefinedCorrelationError
from .gnn import TrainConfig, evaluate_metrics, train_mode
from .graph import normalize_adjacency
from .paths import PathSpec, evaluate_path


def generalization_gap(mode):
    """Test loss minus train loss of a trained mode."""
    return mode.metrics.test_loss - mode.metrics.train_loss


@dataclass(frozen=True)
class CorrelationReport:
    pearson: float
    spearman: float
    r_squared: float
    sample_count: int

    def as_dict(self):
        return {
            "pearson": self.pearson,
            "spearman": self.spearman,
            "r_squared": self.r_squared,
            "sample_count": self.sample_count,
        }


def correlations(xs, ys):
    """Pearson, Spearman (midranks for ties) and the R² of the y-on-x fit."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("xs and ys must be 1-D and of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 pairs")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    r = float(np.clip(stats.pearsonr(x, y).statistic, -1.0, 1.0))
    rho = float(np.clip(stats.spearmanr(x, y).statistic, -1.0, 1.0))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return CorrelationReport(r, rho, r2, int(x.size))


def wasserstein1(a, b):
    """1-D Wasserstein-1 distance between two equal-weight empirical samples.

    Equal sizes use the sorted-matching formula; otherwise the CDF difference
    is integrated over the merged support.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("wasserstein1 needs nonempty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    return float(stats.wasserstein_distance(a, b))


def mode_connectivity_distance(profile_a, profile_b, which="test"):
    """d_MC: W1 between the loss values of two path profiles.

    Loss values on the α grid are treated as equal-weight samples. A profile on
    a different grid is first resampled onto the grid of ``profile_a``.
    """
    if not np.array_equal(profile_a.alphas, profile_b.alphas):
        profile_b = profile_b.resampled(profile_a.alphas)
    return wasserstein1(profile_a.loss(which), profile_b.loss(which))


@dataclass(frozen=True)
class DomainPairReport:
    d_mc: float
    delta_da: float
    source_loss: float
    target_loss: float

    def as_dict(self):
        return {
            "d_mc": self.d_mc,
            "delta_da": self.delta_da,
            "source_loss": self.source_loss,
            "target_loss": self.target_loss,
        }


def _mode_pair_profile(g, cfg, seed, arch, grid_size):
    a = normalize_adjacency(g) if arch == "gcn" else None
    ma = train_mode(g, cfg, arch, seed, a)
    mb = train_mode(g, cfg, arch, seed + 1, a)
    return ma, evaluate_path(PathSpec.linear(ma.params, mb.params), g, a, grid_size)


def vanilla_transfer(source, target, cfg=None, seed=0, arch="gcn", grid_size=25, which="test"):
    """Train on the source graph and evaluate the unchanged model on the target.

    The source mode (init ``seed``) gives ``ℒ_S`` on the source test mask and
    ``ℒ_T`` on the target test mask. Mode pairs with inits ``seed`` and
    ``seed + 1`` on each domain give the two linear-path profiles whose
    ``which`` losses feed d_MC.
    """
    if source.d != target.d or source.C != target.C:
        raise IncompatibleDomainsError(
            f"source (d={source.d}, C={source.C}) and target (d={target.d}, C={target.C}) differ"
        )
    cfg = cfg or TrainConfig()
    mode_s, prof_s = _mode_pair_profile(source, cfg, seed, arch, grid_size)
    _, prof_t = _mode_pair_profile(target, cfg, seed, arch, grid_size)
    a_t = normalize_adjacency(target) if arch == "gcn" else None
    src_loss = mode_s.metrics.test_loss
    tgt_loss = evaluate_metrics(mode_s.params, target, a_t).test_loss
    return DomainPairReport(
        d_mc=mode_connectivity_distance(prof_s, prof_t, which),
        delta_da=tgt_loss - src_loss,
        source_loss=src_loss,
        target_loss=tgt_loss,
    )


def transferability_check(pairs):
    """Correlation between d_MC and the domain gap over several domain pairs."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 domain pairs")
    return correlations([p.d_mc for p in pairs], [p.delta_da for p in pairs])

