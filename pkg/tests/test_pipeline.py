from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dyadic
from umskel.generators import gen_cantor, gen_grid
from umskel.metric import MetricMeasureSpace
from umskel.pipeline import (ceiling_t, dvoretzky_extract, estimate_regularity, extract_beta_regular_um,
                             extract_near_alpha, um_ball_constants, um_ball_violations, um_skeleton,
                             verify_growth, verify_shrink)
from umskel.trim import WeightedTree, trim_balanced, ultrametric_matrix, verify_trim

CANTOR_DIM = math.log(2) / math.log(3)


def dyadic_space(depth):
    tr = trim_balanced(dyadic(depth), 1.0)
    pts, rho = ultrametric_matrix(tr)
    return MetricMeasureSpace.from_matrix(rho, np.full(len(pts), 2.0 ** -depth))


def test_one_point_space():
    space = MetricMeasureSpace.from_coords([[0.0]], [0.8])
    measure, _, rep = um_skeleton(space, 2)
    assert measure.points.tolist() == [0]
    assert measure.masses[0] == pytest.approx(0.8 ** 0.5)
    assert rep.distortion == 1.0 and rep.ok


@pytest.mark.parametrize("space,t", [(gen_grid(1, 128), 2), (gen_cantor(8), 3)],
                         ids=["grid128-t2", "cantor8-t3"])
def test_pipeline_examples(space, t):
    _, _, rep = um_skeleton(space, t)
    assert rep.distortion <= 16 * t
    assert rep.growth_check.ok and rep.shrink_check.ok
    assert rep.ok


def test_growth_on_small_grid():
    space = gen_grid(2, 8)
    _, _, rep = um_skeleton(space, 2, verify=False)
    tab = verify_growth(space, rep, 2)
    assert tab.ok
    assert set(tab.center.tolist()) == set(range(space.n))
    # r = 0 at a point outside the support has nothing on the left
    outside = sorted(set(range(space.n)) - set(rep.measure.points.tolist()))[0]
    row = (tab.center == outside) & (tab.radius == 0)
    assert tab.lhs[row][0] == 0.0
    # large radii reduce to the root sandwich
    last = np.flatnonzero(tab.center == 0)[-1]
    assert tab.lhs[last] == pytest.approx(rep.measure.total(), rel=1e-12)


@pytest.mark.parametrize("t", [2, 3])
def test_shrink_on_cantor_uses_constructive_witness(t):
    space = gen_cantor(7)
    _, _, rep = um_skeleton(space, t, verify=False)
    tab = verify_shrink(space, rep, t)
    assert tab.ok
    assert set(tab.center.tolist()) == set(rep.measure.points.tolist())
    assert np.all(tab.witness >= 0)


def test_lambda_delta_mode():
    space = gen_cantor(6)
    _, tr, rep = um_skeleton(space, 2, delta_mode="lambda")
    assert tr.delta_param == rep.lambda_hat ** -1.0
    assert rep.ok
    with pytest.raises(ValueError):
        um_skeleton(space, 2, delta_mode="bogus")


def test_concentric_probe_reports_a_rate():
    _, _, rep = um_skeleton(gen_cantor(5), 2, concentric_probe=True)
    assert 0.0 <= rep.concentric_pass_rate <= 1.0


def test_regularity_of_line_points():
    space = gen_grid(1, 200)
    prof = estimate_regularity(space, radius_range=(0.02, 0.2))
    assert prof.alpha == pytest.approx(1.0, abs=0.05)
    assert prof.c_lower <= prof.c_upper


def test_regularity_of_dyadic_ultrametric_is_exact():
    space = dyadic_space(8)
    prof = estimate_regularity(space, radii=2.0 ** -np.arange(1, 8))
    assert prof.alpha == pytest.approx(1.0, abs=1e-12)
    assert prof.c_lower == pytest.approx(prof.c_upper, rel=1e-12)


def test_regularity_of_cantor_set():
    prof = estimate_regularity(gen_cantor(10), radius_range=(3.0 ** -8, 3.0 ** -2))
    assert abs(prof.alpha - CANTOR_DIM) <= 0.05


def test_regularity_errors():
    with pytest.raises(ValueError):
        estimate_regularity(MetricMeasureSpace.from_coords([[0.0]]))
    with pytest.raises(ValueError):
        estimate_regularity(gen_grid(1, 10), radius_range=(0.3, 0.1))


def test_near_alpha_grid():
    rep = extract_near_alpha(gen_grid(1, 1024), 2, alpha=1.0)
    assert rep.target_exponent == 0.5
    assert abs(rep.regularity.alpha - 0.5) <= 0.15 and rep.regularity_ok


def test_near_alpha_cantor():
    rep = extract_near_alpha(gen_cantor(10), 2, alpha=CANTOR_DIM)
    assert abs(rep.regularity.alpha - CANTOR_DIM / 2) <= 0.15


def test_near_alpha_single_point_is_degenerate():
    rep = extract_near_alpha(MetricMeasureSpace.from_coords([[0.0]]), 2, alpha=1.0)
    assert rep.degenerate and rep.regularity is None


def test_beta_equal_alpha_keeps_everything():
    tr = trim_balanced(dyadic(6), 1.0)
    pts, measure, out = extract_beta_regular_um(tr, 1.0, 1.0)
    assert len(pts) == 64 and out.kept.all()
    assert measure.total() == pytest.approx(1.0, rel=1e-12)


def test_balanced_tree_half_exponent():
    tr = trim_balanced(dyadic(8), 1.0)
    rng = (2.0 ** -8, 1.0)
    c, C = um_ball_constants(tr, 1.0, rng)
    assert (c, C) == (0.5, 1.0)
    pts, measure, out = extract_beta_regular_um(tr, 1.0, 0.5)
    assert out.sigma[0] == 1.0  # nu(U)^(1/2)
    assert verify_trim(out) == []
    assert um_ball_violations(out, 0.5, 0.5 * c ** 0.5, C ** 0.5, rng) == []


def test_beta_step_on_a_chain():
    wt = WeightedTree([-1, 0, 1], [[1], [2], []], [1.0, 0.5, 0.0], [0.25] * 3, [-1, -1, 0])
    pts, measure, _ = extract_beta_regular_um(trim_balanced(wt, 1.0), 1.0, 0.5)
    assert pts.tolist() == [0] and measure.masses[0] == 0.5
    with pytest.raises(ValueError):
        extract_beta_regular_um(trim_balanced(wt, 1.0), 1.0, 1.5)


def test_ceiling_examples():
    assert ceiling_t(CANTOR_DIM, CANTOR_DIM / 2) == 2
    assert ceiling_t(1.0, 0.9) == 10
    # 0.6309 / (0.6309 - 0.3155) is slightly above 2
    assert ceiling_t(0.6309, 0.3155) == 3
    with pytest.raises(ValueError):
        ceiling_t(1.0, 1.0)


@given(st.floats(0.05, 3.0), st.floats(0.01, 0.99))
def test_ceiling_invariants(alpha, frac):
    beta = alpha * frac
    t = ceiling_t(alpha, beta)
    assert (1 - 1 / t) * alpha >= beta * (1 - 1e-8)
    assert t <= max(2, 2 * alpha / (alpha - beta))


def test_dvoretzky_cantor_small():
    rep = dvoretzky_extract(gen_cantor(8), CANTOR_DIM, CANTOR_DIM / 2)
    assert rep.t == 2 and rep.distortion <= 32
    assert rep.ok and len(rep.subset) >= 2
