from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from umskel.metric import MetricMeasureSpace
from umskel.trim import WeightedTree

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def point_spaces(draw, min_n=2, max_n=24, dims=(1, 2), zero_weights=True):
    """Random Euclidean spaces on a coarse lattice (so ties happen) with
    random, sometimes zero, weights."""
    n = draw(st.integers(min_n, max_n))
    dim = draw(st.sampled_from(dims))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 40, size=(n, dim)).astype(float)
    w = rng.integers(0 if zero_weights else 1, 5, size=n).astype(float)
    if w.sum() == 0:
        w[0] = 1.0
    space = MetricMeasureSpace.from_coords(pts, w)
    if space.n < min_n:
        pts = np.arange(min_n, dtype=float)[:, None]
        space = MetricMeasureSpace.from_coords(pts, np.ones(min_n))
    return space


@pytest.fixture
def line_space():
    return lambda xs, w=None: MetricMeasureSpace.from_coords(np.asarray(xs, float), w)


def equilateral(n: int, w=None) -> MetricMeasureSpace:
    d = np.ones((n, n)) - np.eye(n)
    return MetricMeasureSpace.from_matrix(d, w)


def random_tree(seed, max_depth=12):
    """Random tree with a sub-additive premeasure (some zero leaves)."""
    rng = np.random.default_rng(seed)
    parent, depth = [-1], [0]
    frontier = [0]
    while frontier:
        u = frontier.pop()
        if depth[u] >= max_depth or (depth[u] > 1 and rng.random() < 0.35):
            continue
        for _ in range(int(rng.integers(1, 4))):
            parent.append(u)
            depth.append(depth[u] + 1)
            frontier.append(len(parent) - 1)
    m = len(parent)
    children = [[] for _ in range(m)]
    for v in range(1, m):
        children[parent[v]].append(v)
    xi = np.zeros(m)
    for v in reversed(range(m)):
        if children[v]:
            xi[v] = rng.uniform(0.2, 1.0) * sum(xi[c] for c in children[v])
        else:
            xi[v] = 0.0 if rng.random() < 0.1 else rng.uniform(0.1, 2.0)
    label = [0.0 if not children[v] else 2.0 ** -depth[v] for v in range(m)]
    leaves = [v for v in range(m) if not children[v]]
    point = [-1] * m
    for k, v in enumerate(leaves):
        point[v] = k
    if xi[0] == 0:
        xi[leaves[0]] = 1.0
        for v in reversed(range(m)):
            if children[v]:
                xi[v] = max(xi[v], 0.5 * sum(xi[c] for c in children[v]))
    return WeightedTree(parent, children, label, xi, point)


def dyadic(depth):
    """Balanced binary ultrametric: depth-k nodes have label 2^-k and mass 2^-k."""
    parent, label, level, children = [-1], [1.0], [0], [[]]
    frontier = [0]
    for k in range(1, depth + 1):
        nxt = []
        for u in frontier:
            for _ in range(2):
                v = len(parent)
                parent.append(u)
                children.append([])
                children[u].append(v)
                label.append(2.0 ** -k if k < depth else 0.0)
                level.append(k)
                nxt.append(v)
        frontier = nxt
    point = [-1] * len(parent)
    for j, v in enumerate(frontier):
        point[v] = j
    return WeightedTree(parent, children, label, [2.0 ** -k for k in level], point)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(k: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(passed), detail)
    print(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
