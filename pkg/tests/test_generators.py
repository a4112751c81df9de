from __future__ import annotations

import numpy as np
import pytest

from umskel.generators import GeneratorSpec, gen_cantor, gen_grid, gen_random_doubling, gen_sierpinski
from umskel.io import write_space
from umskel.metric import validate_metric
from umskel.pipeline import estimate_regularity


def test_cantor_small_levels():
    c0 = gen_cantor(0)
    assert c0.n == 1 and c0.weights.tolist() == [1.0]
    c1 = gen_cantor(1)
    assert np.allclose(c1.coords.ravel(), [0.0, 2 / 3]) and c1.weights.tolist() == [0.5, 0.5]
    c3 = gen_cantor(3)
    expect = np.array([0, 2, 6, 8, 18, 20, 24, 26]) / 27
    assert np.allclose(c3.coords.ravel(), expect)


def test_grid_and_sierpinski_small():
    g = gen_grid(2, 2)
    assert g.n == 4 and np.all(g.weights == 0.25)
    s = gen_sierpinski(1)
    off = ~np.eye(3, dtype=bool)
    assert s.n == 3 and np.allclose(s.dist[off], 1.0)
    assert np.allclose(s.weights, 1 / 3)


def test_grid_exponent_near_one():
    prof = estimate_regularity(gen_grid(1, 1024))
    assert prof.alpha == pytest.approx(1.0, abs=0.05)


def test_cantor_exponent():
    prof = estimate_regularity(gen_cantor(10))
    assert prof.alpha == pytest.approx(np.log(2) / np.log(3), abs=0.05)


@pytest.mark.parametrize("spec", [
    GeneratorSpec("cantor", level=5), GeneratorSpec("grid", resolution=6, dimension=2),
    GeneratorSpec("sierpinski", level=3), GeneratorSpec("random-doubling", resolution=80, seed=4),
], ids=lambda s: s.family)
def test_generators_are_metrics_and_deterministic(spec, tmp_path):
    space = spec.build()
    assert validate_metric(space).ok
    write_space(space, tmp_path / "a.json")
    write_space(spec.build(), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_random_doubling_has_bounded_branching():
    space = gen_random_doubling(11, 500)
    assert space.n == 500
    assert np.isclose(space.weights.sum(), 1.0)


def test_caps_and_bad_specs():
    with pytest.raises(ValueError):
        gen_cantor(20, cap=1000)
    with pytest.raises(ValueError):
        gen_grid(3, 100)
    with pytest.raises(ValueError):
        gen_cantor(2, ratio=0.6)
    with pytest.raises(ValueError):
        GeneratorSpec("koch")
    with pytest.raises(ValueError):
        GeneratorSpec("cantor", level=-1)
