from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from umskel.metric import MetricMeasureSpace, mu_delta
from umskel.oracles import oracle_check_ramsey, oracle_ramsey_failures
from umskel.ramsey import RamseyError, check_corollary, corollary_sides, ramsey_decompose

from conftest import equilateral, point_spaces

# a seeded instance where the chosen ring is 2 and rebuilding the split one
# ring further in breaks the mass inequality for P (found by fuzzing)
RING_FIXTURE = ([42.0, 5.0, 15.0, 1.0, 53.0, 10.0, 34.0], [1.0, 6.0, 2.0, 1.0, 6.0, 4.0, 1.0])


def two_points():
    return MetricMeasureSpace.from_coords([[0.0], [1.0]], [0.5, 0.5])


def test_two_point_example():
    space = two_points()
    res = ramsey_decompose(space, [0, 1], 1.0, 2)
    assert res.center == 0 and res.ring_index == 1
    assert res.P.tolist() == [0] and res.Qbar.tolist() == [0] and res.Q.tolist() == [1]
    assert all(h.tolist() == [0] for h in res.annuli)
    assert oracle_check_ramsey(space, [0, 1], 1.0, 2, res)


def test_two_point_summed_mass_values():
    # mu^{1/2}(Qbar) = 1/2 and mu^1(Z) = 1/2, so both sides equal sqrt(2)
    space = two_points()
    res = ramsey_decompose(space, [0, 1], 1.0, 2)
    lhs, rhs = corollary_sides(res, space, [0, 1])
    assert lhs == pytest.approx(np.sqrt(2), rel=1e-12)
    assert rhs == pytest.approx(np.sqrt(2), rel=1e-12)
    assert check_corollary(res, space, [0, 1])


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_equilateral_example(n):
    space = equilateral(n)
    res = ramsey_decompose(space, np.arange(n), 1.0, 2)
    x = res.center
    assert res.P.tolist() == [x] and res.Qbar.tolist() == [x]
    assert sorted(res.Q.tolist()) == sorted(set(range(n)) - {x})
    assert check_corollary(res, space, np.arange(n))


def test_emptied_p_fails_summed_mass_check():
    space = equilateral(4)
    res = ramsey_decompose(space, np.arange(4), 1.0, 3)
    broken = dataclasses.replace(res, P=np.array([], dtype=int))
    assert not check_corollary(broken, space, np.arange(4))


def test_swapped_q_and_qbar_fail_oracle():
    space = MetricMeasureSpace.from_coords(np.linspace(0, 1, 12))
    Z = np.arange(12)
    res = ramsey_decompose(space, Z, 0.8, 3)
    swapped = dataclasses.replace(res, Q=res.Qbar, Qbar=res.Q)
    assert not oracle_check_ramsey(space, Z, 0.8, 3, swapped)


def test_decremented_ring_fixture():
    xs, w = RING_FIXTURE
    space = MetricMeasureSpace.from_coords(np.array(xs), w)
    Z = np.arange(space.n)
    res = ramsey_decompose(space, Z, 1.0, 2)
    assert res.ring_index == 2
    # the same result relabelled with ring 1 is inconsistent
    assert not oracle_check_ramsey(space, Z, 1.0, 2, dataclasses.replace(res, ring_index=1))
    # rebuilt honestly at ring 1, the mass inequality for P fails
    row = space.dist[res.center]
    i, t = 1, 2
    qbar = np.flatnonzero(row < (t + i) / (8 * t))
    rebuilt = dataclasses.replace(res, ring_index=1, P=res.annuli[0], Qbar=qbar,
                                  Q=np.setdiff1d(Z, qbar))
    fails = oracle_ramsey_failures(space, Z, 1.0, 2, rebuilt)
    assert "mass inequality for P fails" in fails
    wP = space.weights[res.annuli[0]].sum()
    bound = space.weights[qbar].sum() * (mu_delta(space, qbar, 0.5) / mu_delta(space, Z, 1.0)) ** 0.5
    assert wP < bound


@given(point_spaces(max_n=40), st.floats(0.01, 0.999), st.sampled_from([2, 3, 5]), st.data())
def test_random_instances_agree_with_oracle(space, frac, t, data):
    Z = np.array(sorted(data.draw(st.sets(st.integers(0, space.n - 1), min_size=2))))
    if len(np.unique(Z)) < 2 or space.weights[Z].sum() == 0:
        return
    diam = space.dist[np.ix_(Z, Z)].max()
    delta = 2 * diam * frac
    res = ramsey_decompose(space, Z, delta, t)
    assert oracle_ramsey_failures(space, Z, delta, t, res) == []
    assert check_corollary(res, space, Z)
    w = space.weights
    assert w[res.P].sum() <= w[res.Qbar].sum() <= w[Z].sum()


def test_deterministic():
    space = MetricMeasureSpace.from_coords(np.random.default_rng(0).random((30, 2)))
    a = ramsey_decompose(space, np.arange(30), 0.7, 3)
    b = ramsey_decompose(space, np.arange(30), 0.7, 3)
    assert a.to_dict() == b.to_dict()


def test_preconditions():
    space = two_points()
    with pytest.raises(RamseyError):
        ramsey_decompose(space, [0], 1.0, 2)
    with pytest.raises(RamseyError):
        ramsey_decompose(space, [0, 1], 2.0, 2)
    with pytest.raises(RamseyError):
        ramsey_decompose(space, [0, 1], 1.0, 1)
    zero = MetricMeasureSpace.from_coords([[0.0], [1.0], [2.0]], [0.0, 0.0, 1.0])
    with pytest.raises(RamseyError):
        ramsey_decompose(zero, [0, 1], 1.0, 2)


def test_mismatched_result_rejected():
    space = MetricMeasureSpace.from_coords(np.linspace(0, 1, 5))
    res = ramsey_decompose(space, np.arange(5), 1.0, 2)
    with pytest.raises(ValueError):
        check_corollary(res, space, [0, 1, 2])


def test_zero_over_zero_convention_flagged():
    # a far-away zero-weight point has an empty-mass open ball
    space = MetricMeasureSpace.from_coords([[0.0], [0.01], [1.0]], [1.0, 1.0, 0.0])
    res = ramsey_decompose(space, np.arange(3), 0.5, 2)
    assert res.convention_used
    assert oracle_check_ramsey(space, np.arange(3), 0.5, 2, res)
