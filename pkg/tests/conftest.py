import numpy as np
import pytest

from modeconn.gnn import Activation, ModelParams
from modeconn.graph import GraphDataset

# criterion number -> (status, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


def random_graph(rng, n, d, C, edge_prob=0.4, train_prob=0.6):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < edge_prob]
    train = rng.random(n) < train_prob
    train[0] = True
    test = ~train
    return GraphDataset(
        n=n,
        edges=np.array(pairs, dtype=np.int64).reshape(-1, 2),
        X=rng.normal(size=(n, d)),
        Y=rng.integers(0, C, n),
        train_mask=train,
        test_mask=test,
        C=C,
    )


def random_params(rng, arch, dims, activation="relu", scale=1.0):
    ws = [scale * rng.normal(size=(dims[i], dims[i + 1])) for i in range(len(dims) - 1)]
    return ModelParams(arch, tuple(dims), tuple(ws), Activation.parse(activation))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_csbm():
    from modeconn.csbm import CsbmParams, generate_csbm

    return generate_csbm(CsbmParams(n=120, d=4, p_in=0.1, p_out=0.02), seed=3)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status:7s} {detail}")
