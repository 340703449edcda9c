import os

import numpy as np
import pytest

from problem_encodings import AtspInstance, MaxCutInstance, build_problem


def pytest_collection_modifyitems(config, items):
    if os.getenv('FVQE_RUN_SLOW') == '1':
        return
    skip_slow = pytest.mark.skip(reason="set FVQE_RUN_SLOW=1 to run slow sweeps")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def no_log_file(monkeypatch):
    monkeypatch.setenv('FVQE_LOG_FILE', '')


@pytest.fixture
def triangle():
    return MaxCutInstance(3, ((1, 2, 1.0), (1, 3, 0.5), (2, 3, 0.5)))


@pytest.fixture
def triangle_problem(triangle):
    return build_problem(triangle, instance_id='triangle')


def complete_maxcut(n: int, seed: int) -> MaxCutInstance:
    """Complete graph with random weights; odd cycles keep the lower bound loose."""
    rng = np.random.default_rng(seed)
    edges = []
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            edges.append((u, v, float(1.0 - rng.random())))
    return MaxCutInstance(n, tuple(edges))


def random_atsp(n: int, seed: int) -> AtspInstance:
    rng = np.random.default_rng(seed)
    W = 1.0 - rng.random((n, n))
    np.fill_diagonal(W, 0.0)
    return AtspInstance(n, W)
