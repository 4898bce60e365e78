import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modeconn.analysis import (
    DomainPairReport,
    correlations,
    generalization_gap,
    mode_connectivity_distance,
    transferability_check,
    vanilla_transfer,
    wasserstein1,
)
from modeconn.csbm import CsbmParams, generate_csbm
from modeconn.errors import IncompatibleDomainsError, UndefinedCorrelationError
from modeconn.gnn import TrainConfig, train_mode
from modeconn.paths import PathProfile

from conftest import random_graph

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12)


def profile(losses, alphas=None):
    al = np.linspace(0, 1, len(losses)) if alphas is None else alphas
    z = np.zeros(len(losses))
    return PathProfile(al, losses, losses, z, z)


def test_correlation_examples():
    rep = correlations([1, 2, 3, 4], [2, 1, 4, 3])
    assert rep.spearman == pytest.approx(0.6)
    assert rep.pearson == pytest.approx(0.6)
    assert rep.sample_count == 4
    lin = correlations([0, 1, 2, 5], [1, 3, 5, 11])
    assert lin.pearson == pytest.approx(1.0) and lin.spearman == pytest.approx(1.0)
    assert lin.r_squared == pytest.approx(1.0)
    assert correlations([1, 2, 3], [3, 2, 1]).spearman == pytest.approx(-1.0)


def test_correlation_errors():
    with pytest.raises(UndefinedCorrelationError):
        correlations([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        correlations([1, 2], [1, 2])
    with pytest.raises(ValueError):
        correlations([1, 2, 3], [1, 2])


def test_wasserstein_oracles():
    assert wasserstein1([0, 1], [0, 3]) == 1.0
    assert wasserstein1([0.0], [2.5]) == 2.5
    assert wasserstein1([3, 1, 2], [1, 2, 3]) == 0.0
    # unequal sizes: uniform {0, 1} against the point 0.5
    assert wasserstein1([0, 1], [0.5]) == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(samples, st.floats(-50, 50))
def test_wasserstein_translation(xs, c):
    ys = [x + c for x in xs]
    assert wasserstein1(xs, ys) == pytest.approx(abs(c), abs=1e-9)


def test_dmc_hand_case():
    a, b = profile([1.0, 2.0, 1.0]), profile([1.0, 3.0, 2.0])
    assert mode_connectivity_distance(a, b) == pytest.approx(2 / 3, rel=1e-15)
    assert mode_connectivity_distance(a, a) == 0.0


def test_dmc_reversal_invariance(rng):
    la, lb = rng.random(9), rng.random(9)
    d = mode_connectivity_distance(profile(la), profile(lb))
    assert mode_connectivity_distance(profile(la[::-1]), profile(lb)) == pytest.approx(d, abs=1e-15)
    assert mode_connectivity_distance(profile(lb), profile(la)) == pytest.approx(d, abs=1e-15)


def test_dmc_resamples_other_grid():
    a = profile([0.0, 1.0, 0.0])
    b = profile([0.0, 0.5, 1.0, 0.5, 0.0])
    assert mode_connectivity_distance(a, b) == 0.0


def test_generalization_gap(small_csbm):
    m = train_mode(small_csbm, TrainConfig(epochs=20), "gcn", 0)
    assert generalization_gap(m) == m.metrics.test_loss - m.metrics.train_loss


CFG = TrainConfig(epochs=30)


@pytest.fixture(scope="module")
def domain():
    return generate_csbm(CsbmParams(n=100, d=3, p_in=0.12, p_out=0.03), seed=5)


def test_transfer_to_itself_is_zero(domain):
    rep = vanilla_transfer(domain, domain, CFG, seed=4)
    assert rep.d_mc == 0.0
    assert rep.delta_da == 0.0
    assert rep.source_loss == rep.target_loss


def test_transfer_permutation_invariance(domain):
    perm = np.random.default_rng(0).permutation(domain.n)
    base = vanilla_transfer(domain, domain, CFG, seed=4)
    rep = vanilla_transfer(domain, domain.permuted(perm), CFG, seed=4)
    assert abs(rep.d_mc - base.d_mc) < 1e-8
    assert abs(rep.delta_da - base.delta_da) < 1e-8


def test_transfer_incompatible_domains(domain, rng):
    other = random_graph(rng, 10, 5, 2)
    with pytest.raises(IncompatibleDomainsError):
        vanilla_transfer(domain, other, CFG)
    other_c = random_graph(rng, 10, 3, 4)
    with pytest.raises(IncompatibleDomainsError):
        vanilla_transfer(domain, other_c, CFG)


def test_transferability_perfect_when_proportional():
    pairs = [DomainPairReport(d, 2 * d, 0.0, 2 * d) for d in (0.1, 0.4, 0.2, 0.9)]
    rep = transferability_check(pairs)
    assert rep.pearson == pytest.approx(1.0) and rep.spearman == pytest.approx(1.0)
    with pytest.raises(ValueError):
        transferability_check(pairs[:2])
    assert math.isfinite(rep.r_squared)
