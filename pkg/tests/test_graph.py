import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modeconn.errors import InvalidGraphError, NoEdgesError
from modeconn.graph import (
    GraphDataset,
    degree_stats,
    edge_homophily,
    feature_spectral_norm,
    normalize_adjacency,
)

from conftest import random_graph


def path_graph(n=4):
    return GraphDataset(
        n=n,
        edges=[(i + 1, i) for i in range(n - 1)],
        X=np.eye(n),
        Y=[i % 2 for i in range(n)],
        train_mask=[True] + [False] * (n - 1),
        test_mask=[False] + [True] * (n - 1),
        C=2,
    )


def test_edges_are_canonical():
    g = GraphDataset(3, [(2, 0), (1, 0)], np.zeros((3, 1)), [0, 1, 0], [1, 0, 0], [0, 1, 1], 2)
    np.testing.assert_array_equal(g.edges, [[0, 1], [0, 2]])
    assert g.num_edges == 2
    with pytest.raises(ValueError):
        g.edges[0, 0] = 5


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 1), (1, 0)], [(0, 3)], [(-1, 0)]])
def test_invalid_edges_rejected(edges):
    with pytest.raises(InvalidGraphError):
        GraphDataset(3, edges, np.zeros((3, 1)), [0, 1, 0], [1, 0, 0], [0, 1, 1], 2)


def test_overlapping_masks_rejected():
    with pytest.raises(InvalidGraphError):
        GraphDataset(2, [(0, 1)], np.zeros((2, 1)), [0, 1], [1, 1], [1, 0], 2)


def test_label_out_of_range_rejected():
    with pytest.raises(InvalidGraphError):
        GraphDataset(2, [(0, 1)], np.zeros((2, 1)), [0, 2], [1, 0], [0, 1], 2)


def test_normalization_on_path_graph():
    # degrees with self-loops: 2, 3, 3, 2
    S = normalize_adjacency(path_graph()).toarray()
    dt = np.array([2.0, 3.0, 3.0, 2.0])
    expected = (np.eye(4) + np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1)) / np.sqrt(np.outer(dt, dt))
    np.testing.assert_allclose(S, expected, rtol=0, atol=1e-15)


@given(st.integers(1, 9), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_normalization_matches_dense_formula(n, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 2, 2)
    A = g.adjacency.toarray() + np.eye(n)
    dinv = 1.0 / np.sqrt(A.sum(axis=1))
    S = normalize_adjacency(g)
    np.testing.assert_allclose(S.toarray(), dinv[:, None] * A * dinv[None, :], atol=1e-15)
    M = S.matrix
    assert (M != M.T).nnz == 0  # exactly symmetric
    assert np.max(np.abs(np.linalg.eigvalsh(S.toarray()))) <= 1.0 + 1e-12


def test_no_self_loop_variant_zero_rows_for_isolated():
    g = GraphDataset(3, [(0, 1)], np.zeros((3, 1)), [0, 1, 0], [1, 0, 0], [0, 1, 1], 2)
    S = normalize_adjacency(g, self_loops=False).toarray()
    np.testing.assert_array_equal(S[2], 0.0)
    assert S[0, 1] == 1.0


def test_triples_cover_matrix():
    g = path_graph()
    r, c, v = normalize_adjacency(g).triples()
    assert len(v) == 4 + 2 * 3


def test_mean_adjacency_rows_sum_to_one():
    g = random_graph(np.random.default_rng(2), 7, 2, 2)
    np.testing.assert_allclose(np.asarray(g.mean_adjacency.sum(axis=1)).ravel(), 1.0)


def test_homophily_and_degrees():
    g = path_graph()  # labels 0,1,0,1 alternate: no same-label edges
    assert edge_homophily(g) == 0.0
    assert degree_stats(g) == (1, 1.5)
    empty = GraphDataset(2, [], np.zeros((2, 1)), [0, 0], [1, 0], [0, 1], 2)
    with pytest.raises(NoEdgesError):
        edge_homophily(empty)


def test_feature_norm():
    X = np.random.default_rng(0).normal(size=(30, 4))
    assert feature_spectral_norm(X) == pytest.approx(np.linalg.norm(X, 2), rel=1e-9)


def test_fingerprint_and_permutation():
    g = random_graph(np.random.default_rng(5), 8, 3, 3)
    assert g.fingerprint() == random_graph(np.random.default_rng(5), 8, 3, 3).fingerprint()
    perm = np.random.default_rng(1).permutation(8)
    h = g.permuted(perm)
    assert h.fingerprint() != g.fingerprint()
    np.testing.assert_array_equal(h.X, g.X[perm])
    # relabelled adjacency is the permuted adjacency
    A, B = g.adjacency.toarray(), h.adjacency.toarray()
    np.testing.assert_array_equal(B, A[np.ix_(perm, perm)])
    inv = np.argsort(perm)
    np.testing.assert_array_equal(h.permuted(inv).edges, g.edges)
