"""Graph container, adjacency normalization and structural statistics."""

from dataclasses import dataclass, field
from functools import cached_property
import hashlib

import numpy as np
import scipy.sparse as sp

from .errors import InvalidGraphError, NoEdgesError
from .linalg import spectral_norm


def _canonical_edges(edges, n):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise InvalidGraphError(f"edge endpoint outside [0, {n})")
    if np.any(e[:, 0] == e[:, 1]):
        raise InvalidGraphError("self-loops are not allowed in edges")
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    e = np.stack([lo, hi], axis=1)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e = e[order]
    if len(e) > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
        raise InvalidGraphError("duplicate edges")
    return e


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """Undirected node-classification graph ``(A, X, Y)`` with train/test masks.

    ``edges`` is stored canonically: one ``(i, j)`` row per undirected edge with
    ``i < j``, sorted lexicographically.
    """

    n: int
    edges: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    train_mask: np.ndarray
    test_mask: np.ndarray
    C: int
    name: str = field(default="graph")

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise InvalidGraphError("graph needs at least one node")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", _canonical_edges(self.edges, n))
        X = np.array(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != n or X.shape[1] < 1:
            raise InvalidGraphError(f"X must be {n} x d with d >= 1, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidGraphError("X has non-finite entries")
        Y = np.array(self.Y, dtype=np.int64)
        C = int(self.C)
        if C < 2:
            raise InvalidGraphError("need at least two classes")
        if Y.shape != (n,) or Y.min() < 0 or Y.max() >= C:
            raise InvalidGraphError("labels must be n integers in [0, C)")
        train = np.array(self.train_mask, dtype=bool)
        test = np.array(self.test_mask, dtype=bool)
        if train.shape != (n,) or test.shape != (n,):
            raise InvalidGraphError("masks must have length n")
        if np.any(train & test):
            raise InvalidGraphError("train and test masks overlap")
        for name, arr in (("X", X), ("Y", Y), ("train_mask", train), ("test_mask", test), ("C", C)):
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.edges.setflags(write=False)

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def num_edges(self):
        return len(self.edges)

    @cached_property
    def adjacency(self):
        """Symmetric 0/1 adjacency as CSR, no self-loops."""
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def degrees(self):
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    @cached_property
    def mean_adjacency(self):
        """Row-normalized ``D^-1 (A + I)`` used by mean aggregation."""
        A = self.adjacency + sp.identity(self.n, format="csr")
        inv = 1.0 / (self.degrees + 1.0)
        return sp.csr_matrix(sp.diags(inv) @ A)

    def mask(self, which):
        if which == "train":
            return self.train_mask
        if which == "test":
            return self.test_mask
        raise ValueError(f"unknown mask {which!r}")

    def fingerprint(self):
        """SHA-256 over the canonical content; used as the graph id."""
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        h.update(np.int64(self.C).tobytes())
        for arr in (self.edges, self.X, self.Y, self.train_mask, self.test_mask):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def permuted(self, perm):
        """Relabel nodes so that old node ``perm[k]`` becomes new node ``k``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.n)
        return GraphDataset(
            n=self.n,
            edges=inv[self.edges],
            X=self.X[perm],
            Y=self.Y[perm],
            train_mask=self.train_mask[perm],
            test_mask=self.test_mask[perm],
            C=self.C,
            name=self.name,
        )


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    n: int
    matrix: sp.csr_matrix
    self_loops: bool = True

    def triples(self):
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def toarray(self):
        return self.matrix.toarray()


def normalize_adjacency(g, self_loops=True):
    """Symmetric normalization ``D̃^-1/2 (A + I) D̃^-1/2``.

    With ``self_loops=False`` the plain ``D^-1/2 A D^-1/2`` is built and
    isolated nodes get an all-zero row.
    """
    n = g.n
    e = g.edges
    deg = g.degrees.astype(np.float64) + (1.0 if self_loops else 0.0)
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    # each off-diagonal value computed once and mirrored
    w = dinv[e[:, 0]] * dinv[e[:, 1]]
    rows = [e[:, 0], e[:, 1]]
    cols = [e[:, 1], e[:, 0]]
    vals = [w, w]
    if self_loops:
        idx = np.arange(n)
        rows.append(idx)
        cols.append(idx)
        vals.append(dinv * dinv)
    M = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    M.sort_indices()
    return NormalizedAdjacency(n=n, matrix=M, self_loops=self_loops)


def edge_homophily(g):
    """Fraction of edges joining same-label endpoints."""
    if g.num_edges == 0:
        raise NoEdgesError("edge homophily is undefined on an edgeless graph")
    same = g.Y[g.edges[:, 0]] == g.Y[g.edges[:, 1]]
    return float(np.mean(same))


def degree_stats(g):
    """``(d_min, d_mean)`` of the adjacency without self-loops."""
    deg = g.degrees
    return int(deg.min()), float(deg.mean())


def feature_spectral_norm(X):
    """``‖X‖₂`` by power iteration on ``XᵀX`` (relative tolerance 1e-10)."""
    return spectral_norm(X, tol=1e-10)
