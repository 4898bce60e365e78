import math

import numpy as np
import pytest
import scipy.sparse as sp

from modeconn.bounds import BoundConstants
from modeconn.csbm import CsbmParams, generate_csbm
from modeconn.errors import IsolatedNodeError, NonSymmetricError
from modeconn.graph import GraphDataset, normalize_adjacency
from modeconn.spectral import effective_propagation, gap_from_eigenvalues, spectral_gap


def clique_graph(sizes):
    edges, off = [], 0
    for s in sizes:
        edges += [(off + i, off + j) for i in range(s) for j in range(i + 1, s)]
        off += s
    n = off
    return GraphDataset(n, edges, np.zeros((n, 1)), [0] * n, [True] + [False] * (n - 1), [False] * n, 2)


def test_two_disjoint_triangles_have_zero_gap():
    rep = spectral_gap(normalize_adjacency(clique_graph([3, 3])))
    assert abs(rep.delta) < 1e-8
    np.testing.assert_allclose(rep.top_eigenvalues, [1.0, 1.0], atol=1e-12)
    assert rep.d_min == 2


def test_complete_graph_gap_is_one():
    rep = spectral_gap(normalize_adjacency(clique_graph([7])), k=3)
    assert rep.delta == pytest.approx(1.0, abs=1e-12)
    assert rep.top_eigenvalues[0] == pytest.approx(1.0)


def test_gap_helper():
    assert gap_from_eigenvalues([1.0, -0.7, 0.3]) == pytest.approx(0.3)
    assert gap_from_eigenvalues([0.3, 1.0]) == pytest.approx(0.7)
    assert gap_from_eigenvalues([1.0, 1.0 + 1e-15]) == 0.0


def test_nonsymmetric_rejected():
    M = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NonSymmetricError):
        spectral_gap(M)
    with pytest.raises(NonSymmetricError):
        spectral_gap(np.array([[0.0, 1.0], [0.5, 0.0]]))


def test_isolated_node_has_no_lambda_eff():
    g = GraphDataset(3, [(0, 1)], np.zeros((3, 1)), [0, 1, 0], [1, 0, 0], [0, 1, 1], 2)
    rep = spectral_gap(normalize_adjacency(g))
    assert rep.d_min == 0 and rep.lambda_eff is None


def test_effective_propagation_examples():
    c0 = BoundConstants(C2=1e-300)
    assert effective_propagation(1.0, 100, 5, c0) == pytest.approx(0.0, abs=1e-100)
    assert effective_propagation(0.0, 100, 5, c0) == pytest.approx(1.0)
    val = effective_propagation(0.4, 2000, 100)
    assert val == pytest.approx(0.6 + math.sqrt(math.log(2000) / 100), rel=1e-15)
    assert round(val, 4) == 0.8757
    with pytest.raises(IsolatedNodeError):
        effective_propagation(0.4, 10, 0)


def test_dense_and_iterative_agree():
    g = generate_csbm(CsbmParams(n=400, d=1, p_in=0.05, p_out=0.01), 3)
    a = normalize_adjacency(g)
    dense = spectral_gap(a, k=3, method="dense")
    it = spectral_gap(a, k=3, method="iterative")
    np.testing.assert_allclose(it.top_eigenvalues, dense.top_eigenvalues, atol=1e-6)
    assert abs(it.delta - dense.delta) < 1e-6
    assert it.method == "iterative" and dense.method == "dense"


def test_sampled_gap_near_expected_at_n2000():
    params = CsbmParams(n=2000, d=1, p_in=0.8, p_out=0.2)
    rep = spectral_gap(normalize_adjacency(generate_csbm(params, 0)))
    assert abs(rep.delta - 0.4) <= math.sqrt(math.log(2000) / rep.d_min)
    assert 0.0 <= rep.delta <= 2.0
