"""Shared naive oracles and the acceptance summary hook."""

import numpy as np
import pytest
from hypothesis import settings

# first calls load compiled numba kernels; wall-clock deadlines are meaningless here
settings.register_profile("ike", deadline=None, max_examples=60)
settings.load_profile("ike")

ACCEPTANCE_LINES: list[str] = []


def naive_route(tree, x) -> int:
    """Walk one iTree's preorder arrays in plain Python (independent of the numba router)."""
    k = 0
    while tree.feature[k] >= 0:
        if x[tree.feature[k]] < tree.threshold[k]:
            k = k + 1
        else:
            k = k + int(tree.right[k])
    return int(tree.leaf[k])


def naive_nearest(x, dims, anchors) -> int:
    best, arg = np.inf, -1
    for j in range(anchors.shape[0]):
        dist = 0.0
        for c, q in enumerate(dims):
            diff = float(x[q]) - float(anchors[j, c])
            dist += diff * diff
        if dist < best:
            best, arg = dist, j
    return arg


def naive_matches(a, b) -> int:
    return int(sum(1 for u, v in zip(a, b) if u == v))


def sort_topk(scores, k):
    """Full-sort oracle: descending score, ascending id."""
    order = sorted(range(len(scores)), key=lambda i: (-int(scores[i]), i))
    return order[:k]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
