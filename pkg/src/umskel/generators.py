"""Test families that are Ahlfors regular (or at least doubling) at desk scale."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .metric import MetricMeasureSpace

POINT_CAP = 100_000


@dataclass
class GeneratorSpec:
    family: str  # cantor | grid | sierpinski | random-doubling
    level: int = 0
    resolution: int = 1  # grid side or random point count
    dimension: int = 1
    seed: int = 0
    ratio: float = 1 / 3
    cap: int = POINT_CAP

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.resolution < 1 or self.dimension < 1:
            raise ValueError("resolution and dimension must be >= 1")

    def build(self) -> MetricMeasureSpace:
        if self.family == "cantor":
            return gen_cantor(self.level, self.ratio, cap=self.cap)
        if self.family == "grid":
            return gen_grid(self.dimension, self.resolution, cap=self.cap)
        if self.family == "sierpinski":
            return gen_sierpinski(self.level, cap=self.cap)
        return gen_random_doubling(self.seed, self.resolution, cap=self.cap)


def _check_cap(count: int, cap: int) -> None:
    if count > cap:
        raise ValueError(f"{count} points exceeds the cap of {cap}")


def gen_cantor(level: int, ratio: float = 1 / 3, cap: int = POINT_CAP) -> MetricMeasureSpace:
    """Left endpoints of the level-``level`` intervals of the middle-gap Cantor set."""
    if level < 0:
        raise ValueError("level must be >= 0")
    if not 0 < ratio < 0.5:
        raise ValueError("ratio must lie in (0, 1/2)")
    _check_cap(2 ** level, cap)
    x = np.zeros(1)
    for j in range(1, level + 1):
        step = (1 - ratio) * ratio ** (j - 1)
        x = np.concatenate([x, x + step])
    x = np.sort(x)
    w = np.full(len(x), 0.5 ** level)
    return MetricMeasureSpace.from_coords(x, w, name=f"cantor-{level}")


def gen_grid(dimension: int, side: int, cap: int = POINT_CAP) -> MetricMeasureSpace:
    """``side**dimension`` evenly spaced points of the unit cube, uniform weights."""
    if dimension < 1 or side < 1:
        raise ValueError("dimension and side must be >= 1")
    count = side ** dimension
    _check_cap(count, cap)
    axis = np.linspace(0.0, 1.0, side) if side > 1 else np.zeros(1)
    pts = np.array(list(itertools.product(axis, repeat=dimension)))
    return MetricMeasureSpace.from_coords(pts, np.full(count, 1.0 / count),
                                          name=f"grid-{dimension}x{side}")


_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])


def gen_sierpinski(level: int, cap: int = POINT_CAP) -> MetricMeasureSpace:
    """One point per level-``level`` cell of the Sierpinski gasket: the image of
    the centroid under each composition of ``level`` half-scale corner maps."""
    if level < 0:
        raise ValueError("level must be >= 0")
    _check_cap(3 ** level, cap)
    pts = _TRIANGLE.mean(axis=0)[None, :]
    for _ in range(level):
        pts = np.concatenate([(pts + v) / 2 for v in _TRIANGLE])
    return MetricMeasureSpace.from_coords(pts, np.full(len(pts), 1.0 / len(pts)),
                                          name=f"sierpinski-{level}")


def gen_random_doubling(seed: int, n: int, cap: int = POINT_CAP) -> MetricMeasureSpace:
    """``n`` points in the unit square from a random quadtree: each cell passes
    its points to 2-4 random quadrants until a single point remains."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_cap(n, cap)
    rng = np.random.default_rng(seed)
    out = []
    stack = [(0.0, 0.0, 1.0, n)]
    while stack:
        x0, y0, size, count = stack.pop()
        if count == 1:
            out.append((x0 + size * rng.uniform(0.25, 0.75), y0 + size * rng.uniform(0.25, 0.75)))
            continue
        k = int(rng.integers(2, 5)) if count >= 2 else 1
        k = min(k, count)
        quads = rng.choice(4, size=k, replace=False)
        # every chosen quadrant receives at least one point
        split = np.ones(k, dtype=int) + rng.multinomial(count - k, np.full(k, 1.0 / k))
        half = size / 2
        for q, c in zip(quads, split):
            stack.append((x0 + half * (q % 2), y0 + half * (q // 2), half, int(c)))
    pts = np.array(out)
    return MetricMeasureSpace.from_coords(pts, np.full(n, 1.0 / n), name=f"random-doubling-{seed}-{n}")


FAMILIES = ("cantor", "grid", "sierpinski", "random-doubling")
