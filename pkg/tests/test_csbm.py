import math
import warnings

import numpy as np
import pytest

from modeconn.csbm import (
    CsbmParams,
    HomophilyBoundaryWarning,
    class_means,
    expected_normalized_adjacency,
    expected_spectrum,
    generate_csbm,
    sweep_grid,
)
from modeconn.errors import InvalidParamsError
from modeconn.graph import edge_homophily


def test_param_validation():
    with pytest.raises(InvalidParamsError):
        CsbmParams(n=10, d=2, p_in=0.1, p_out=0.2)
    with pytest.raises(InvalidParamsError):
        CsbmParams(n=10, d=0, p_in=0.2, p_out=0.1)
    with pytest.raises(InvalidParamsError):
        CsbmParams(n=10, d=2, p_in=0.2, p_out=0.1, sigma=-1)
    p = CsbmParams(n=10, d=2, p_in=0.3, p_out=0.3)
    assert p.is_boundary and p.homophily() == 0.5


def test_derived_quantities():
    p = CsbmParams(n=10, d=3, p_in=0.6, p_out=0.2, sigma=0.5, mu_gap=3.0)
    assert p.homophily() == pytest.approx(0.75)
    assert p.density() == pytest.approx(0.8)
    assert p.separability() == 6.0
    np.testing.assert_array_equal(class_means(p), [[-1.5, 0, 0], [1.5, 0, 0]])


def test_expected_spectrum_hand_values():
    s = expected_spectrum(CsbmParams(n=10, d=1, p_in=0.8, p_out=0.2))
    assert s.lambda1 == 1.0
    assert s.lambda2 == pytest.approx(0.6)
    assert s.delta == pytest.approx(0.4)


def test_expected_matrix_eigenvalues():
    params = CsbmParams(n=60, d=1, p_in=0.5, p_out=0.1)
    w = np.sort(np.linalg.eigvalsh(expected_normalized_adjacency(params)))[::-1]
    assert w[0] == pytest.approx(1.0, abs=1e-12)
    assert w[1] == pytest.approx(expected_spectrum(params).lambda2, abs=1e-12)
    np.testing.assert_allclose(w[2:], 0.0, atol=1e-12)


def test_generation_deterministic_and_seed_sensitive():
    p = CsbmParams(n=100, d=3, p_in=0.2, p_out=0.05)
    a, b, c = generate_csbm(p, 4), generate_csbm(p, 4), generate_csbm(p, 5)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()


def test_labels_masks_and_split_sizes():
    g = generate_csbm(CsbmParams(n=200, d=2, p_in=0.1, p_out=0.02), 1)
    np.testing.assert_array_equal(g.Y[:100], 0)
    np.testing.assert_array_equal(g.Y[100:], 1)
    for cls in (0, 1):
        members = g.Y == cls
        assert np.count_nonzero(g.train_mask & members) == 10
        assert np.count_nonzero(g.test_mask & members) == 20
    assert not np.any(g.train_mask & g.test_mask)


def test_edge_rates_match_probabilities():
    p = CsbmParams(n=400, d=1, p_in=0.1, p_out=0.02)
    g = generate_csbm(p, 11)
    same = g.Y[g.edges[:, 0]] == g.Y[g.edges[:, 1]]
    pairs_in = 2 * math.comb(200, 2)
    pairs_out = 200 * 200
    rate_in = np.count_nonzero(same) / pairs_in
    rate_out = np.count_nonzero(~same) / pairs_out
    # binomial standard errors are ~1.5e-3 and ~7e-4
    assert abs(rate_in - 0.1) < 0.006
    assert abs(rate_out - 0.02) < 0.003
    assert abs(edge_homophily(g) - p.p_in * pairs_in / (p.p_in * pairs_in + p.p_out * pairs_out)) < 0.03


def test_feature_distribution():
    p = CsbmParams(n=2000, d=2, p_in=0.001, p_out=0.0, sigma=0.5, mu_gap=4.0)
    g = generate_csbm(p, 2)
    m0, m1 = g.X[g.Y == 0].mean(axis=0), g.X[g.Y == 1].mean(axis=0)
    np.testing.assert_allclose(m0, [-2.0, 0.0], atol=0.05)
    np.testing.assert_allclose(m1, [2.0, 0.0], atol=0.05)
    assert g.X[g.Y == 0].std(axis=0) == pytest.approx([0.5, 0.5], abs=0.03)


def test_noiseless_features():
    g = generate_csbm(CsbmParams(n=10, d=2, p_in=0.5, p_out=0.1, sigma=0.0), 0)
    np.testing.assert_array_equal(g.X[:, 0], np.repeat([-1.0, 1.0], 5))


def test_odd_n_rejected():
    with pytest.raises(InvalidParamsError):
        generate_csbm(CsbmParams(n=11, d=1, p_in=0.5, p_out=0.1), 0)


def test_sweep_grid_keeps_other_axes():
    base = CsbmParams(n=100, d=2, p_in=0.08, p_out=0.02)
    for q in sweep_grid("density", [0.05, 0.2], base):
        assert q.homophily() == pytest.approx(0.8)
    for q, h in zip(sweep_grid("homophily", [0.6, 0.9], base), [0.6, 0.9]):
        assert q.density() == pytest.approx(0.1)
        assert q.homophily() == pytest.approx(h)
    assert [q.sigma for q in sweep_grid("sigma", [0.5, 2], base)] == [0.5, 2.0]


def test_sweep_grid_boundary_and_range():
    base = CsbmParams(n=100, d=2, p_in=0.08, p_out=0.02)
    with pytest.warns(HomophilyBoundaryWarning):
        sweep_grid("homophily", [0.5], base)
    with pytest.raises(InvalidParamsError):
        sweep_grid("homophily", [0.3], base)
    with pytest.raises(InvalidParamsError):
        sweep_grid("density", [1.5], base)
    with pytest.raises(InvalidParamsError):
        sweep_grid("bogus", [1], base)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sweep_grid("homophily", [0.7], base)
