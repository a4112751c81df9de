from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from umskel.generators import gen_cantor
from umskel.metric import (MetricMeasureSpace, ball, doubling_upper, mu_delta, set_diameter,
                           set_distance, validate_metric)
from umskel.oracles import brute_mu_delta

from conftest import equilateral, point_spaces


def test_one_point_space_is_valid():
    space = MetricMeasureSpace.from_coords([[0.3, 0.1]], [2.0])
    assert validate_metric(space).ok
    assert space.n == 1


def test_triangle_violation_names_the_triple():
    d = np.array([[0, 1, 3], [1, 0, 1], [3, 1, 0]], dtype=float)
    space = MetricMeasureSpace.from_matrix(d, ids=["a", "b", "c"])
    rep = validate_metric(space)
    assert rep.kinds() == {"triangle"}
    assert ("a", "b", "c") in [v.witness for v in rep.violations]


def test_euclidean_sample_is_valid():
    rng = np.random.default_rng(7)
    assert validate_metric(MetricMeasureSpace.from_coords(rng.random((50, 2)))).ok


def test_normalized_to_unit_diameter_exactly():
    space = MetricMeasureSpace.from_coords(np.array([[0.0], [3.0], [7.5]]))
    assert space.dist.max() == 1.0
    assert space.scale_factor == 7.5
    assert np.allclose(space.original_dist()[0, 2], 7.5)


def test_duplicates_are_merged_with_summed_weights():
    space = MetricMeasureSpace.from_coords([[0.0], [1.0], [0.0]], [1.0, 2.0, 3.0], ids=["a", "b", "c"])
    assert space.ids == ["a", "b"]
    assert space.weights.tolist() == [4.0, 2.0]
    d = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float)
    space = MetricMeasureSpace.from_matrix(d, [1.0, 1.0, 1.0])
    assert space.n == 2 and space.weights.tolist() == [2.0, 1.0]


def test_bad_weights_rejected():
    with pytest.raises(ValueError):
        MetricMeasureSpace.from_coords([[0.0], [1.0]], [-1.0, 2.0])
    with pytest.raises(ValueError):
        MetricMeasureSpace.from_coords([[0.0], [1.0]], [0.0, 0.0])


def test_ball_examples():
    space = MetricMeasureSpace.from_coords([[0.0], [0.25], [1.0]])
    assert ball(space, 0, 0.0).tolist() == [0]
    assert ball(space, 0, 0.25, "open").tolist() == [0]
    assert ball(space, 0, 0.25, "closed").tolist() == [0, 1]
    with pytest.raises(KeyError):
        ball(space, "nope", 0.1)
    with pytest.raises(ValueError):
        ball(space, 0, -1.0)


def test_cantor_ball_holds_two_leftmost_points():
    space = gen_cantor(3)
    assert ball(space, 0, 1 / 9).tolist() == [0, 1]


@given(point_spaces())
def test_open_ball_inside_closed_ball(space):
    for r in np.unique(space.dist[0]):
        assert set(ball(space, 0, r, "open")) <= set(ball(space, 0, r, "closed"))
        # the closed ball at r equals the open ball just past r
        later = space.dist[0][space.dist[0] > r]
        nxt = later.min() if later.size else 2.0
        assert np.array_equal(ball(space, 0, r), ball(space, 0, nxt, "open"))


def test_diameter_and_distance_examples():
    space = MetricMeasureSpace.from_coords([[0.0], [2 / 3], [1.0]])
    assert set_diameter(space, [1]) == 0.0
    assert set_distance(space, [0, 1], [0, 1]) == 0.0
    assert set_distance(space, [0], [1, 2]) == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(ValueError):
        set_diameter(space, [])


def test_mu_delta_examples():
    space = MetricMeasureSpace.from_coords([[0.0], [0.5], [1.0]], [1.0, 2.0, 3.0])
    assert mu_delta(space, [1], 0.3) == 2.0
    assert mu_delta(space, [0, 1, 2], 4.0) == 6.0
    with pytest.raises(ValueError):
        mu_delta(space, [], 1.0)


@given(point_spaces(max_n=16), st.floats(0.01, 5.0))
def test_mu_delta_matches_brute_force(space, delta):
    A = np.arange(space.n)
    assert mu_delta(space, A, delta) == brute_mu_delta(space, A, delta)


@given(point_spaces(max_n=16), st.floats(0.01, 4.0), st.floats(0.01, 4.0), st.data())
def test_mu_delta_monotone(space, a, b, data):
    small, big = sorted((a, b))
    C = np.arange(space.n)
    A = np.array(sorted(data.draw(st.sets(st.sampled_from(list(C)), min_size=1))))
    assert mu_delta(space, A, small) <= mu_delta(space, C, big)


@given(point_spaces(max_n=14, zero_weights=False), st.floats(1.0, 4.0))
def test_mu_delta_sandwich_with_doubling_bound(space, delta):
    # for delta >= diam: mu^delta(A) <= w(A) <= lambda^2 mu^delta(A)
    lam = doubling_upper(space)
    A = np.arange(space.n)
    m = mu_delta(space, A, delta)
    assert m <= space.weights.sum() <= lam ** 2 * m * (1 + 1e-12)


def test_doubling_examples():
    assert doubling_upper(MetricMeasureSpace.from_coords([[1.0]])) == 1
    assert doubling_upper(equilateral(7)) == 7
    assert doubling_upper(MetricMeasureSpace.from_coords(np.arange(16.0))) in (2, 3)


def test_doubling_ladder_variant_is_consistent():
    space = MetricMeasureSpace.from_coords(np.random.default_rng(1).random((60, 2)))
    # thinning radii can only lower the maximum
    assert doubling_upper(space, exhaustive=False) <= doubling_upper(space, exhaustive=True)


def test_normalization_round_trip():
    rng = np.random.default_rng(3)
    pts = rng.random((20, 3)) * 17
    space = MetricMeasureSpace.from_coords(pts)
    raw = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    assert np.allclose(space.original_dist(), raw, rtol=1e-12, atol=1e-12)
