"""One step of Bartal's Ramsey decomposition on a finite weighted point set."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import MetricMeasureSpace, mu_delta_local

# slack on geometric self-checks; ties at exact ring radii can lose an ulp to
# the triangle inequality of stored distances
GEOM_RTOL = 1e-12
MEASURE_RTOL = 1e-12


class RamseyError(ValueError):
    """Precondition failure for a decomposition."""


@dataclass
class RamseyResult:
    """Indices refer to whatever labels were passed as ``Z``."""

    P: np.ndarray
    Q: np.ndarray
    Qbar: np.ndarray
    center: int
    ring_index: int
    annuli: list[np.ndarray]
    delta: float
    t: int
    convention_used: bool = False  # some center ratio was 0/0

    def to_dict(self, ids=None) -> dict:
        name = (lambda k: ids[k]) if ids is not None else int
        return {
            "P": [name(k) for k in self.P],
            "Q": [name(k) for k in self.Q],
            "Qbar": [name(k) for k in self.Qbar],
            "center": name(self.center),
            "ring_index": self.ring_index,
            "annuli": [[name(k) for k in h] for h in self.annuli],
            "delta": self.delta,
            "t": self.t,
            "convention_used": self.convention_used,
        }


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / den


def decompose_local(d: np.ndarray, w: np.ndarray, delta: float, t: int):
    """Core decomposition on a local distance matrix.

    Returns ``(P, Q, Qbar, center, ring, annuli, convention_used)`` as local
    positions.
    """
    inner = (d <= delta / 8) @ w
    outer = (d < delta / 4) @ w
    zero = outer == 0.0
    ratio = np.where(zero, 0.0, inner / np.where(zero, 1.0, outer))
    x = int(np.argmax(ratio))  # first maximum: ingestion order breaks ties
    row = d[x]

    radii = [delta * (t + i) / (8 * t) for i in range(t)]
    annuli = [np.flatnonzero(row <= r) for r in radii]
    annuli.append(np.flatnonzero(row < delta / 4))
    mass = np.array([w[h].sum() for h in annuli])
    growth = (mass[t] / mass[0]) ** (1.0 / t)
    ring = None
    for i in range(1, t + 1):
        if mass[i] <= mass[i - 1] * growth:
            ring = i
            break
    if ring is None:
        # the ring ratios telescope to mass[t]/mass[0]; missing them all is rounding
        steps = [mass[i] / mass[i - 1] for i in range(1, t + 1)]
        ring = 1 + int(np.argmin(steps))

    r_open = delta * (t + ring) / (8 * t)
    in_qbar = row < r_open
    Qbar = np.flatnonzero(in_qbar)
    Q = np.flatnonzero(~in_qbar)
    P = annuli[ring - 1]
    return P, Q, Qbar, x, ring, annuli, bool(zero.any())


def ramsey_decompose(space: MetricMeasureSpace, Z, delta: float, t: int, check: bool = True) -> RamseyResult:
    """Split ``Z`` into a dense, well separated piece ``P`` and the rest ``Q``.

    The center maximizes ``w(B(x, delta/8)) / w(B°(x, delta/4))`` within ``Z``
    (0/0 = 0); the ring is the first of ``t`` shells whose growth is at most the
    geometric mean. ``P`` is the closed ball just inside that ring and ``Qbar``
    the open ball at the ring, so ``Q = Z - Qbar`` sits at least ``delta/(8t)``
    away from ``P``.
    """
    Z = np.unique(np.asarray(Z, dtype=int))
    if len(Z) < 2:
        raise RamseyError("Z needs at least two points")
    if t < 2 or int(t) != t:
        raise RamseyError("t must be an integer >= 2")
    d = space.dist[np.ix_(Z, Z)]
    w = space.weights[Z]
    diam = float(d.max())
    if not 0 < delta < 2 * diam:
        raise RamseyError(f"delta must lie in (0, 2 diam(Z)) = (0, {2 * diam}), got {delta}")
    if w.sum() <= 0:
        raise RamseyError("Z has zero weight")
    P, Q, Qbar, x, ring, annuli, conv = decompose_local(d, w, delta, int(t))
    if check:
        problems = check_local(d, w, delta, int(t), P, Q, Qbar)
        if problems:
            raise AssertionError("decomposition failed its own checks: " + "; ".join(problems))
    return RamseyResult(Z[P], Z[Q], Z[Qbar], int(Z[x]), ring, [Z[h] for h in annuli],
                        float(delta), int(t), conv)


def check_local(d, w, delta, t, P, Q, Qbar, geom_rtol=GEOM_RTOL, rtol=MEASURE_RTOL) -> list[str]:
    """Every guarantee of the split, checked on local positions; returns failures."""
    out = []
    if len(P) == 0 or len(Q) == 0:
        out.append("P and Q must be non-empty")
        return out
    if not np.all(np.isin(P, Qbar)):
        out.append("P not inside Qbar")
    sep = float(d[np.ix_(P, Q)].min())
    if sep < delta / (8 * t) * (1 - geom_rtol):
        out.append(f"d(P,Q)={sep} < delta/(8t)={delta / (8 * t)}")
    if float(d[np.ix_(Qbar, Qbar)].max()) > delta / 2 * (1 + geom_rtol):
        out.append("diam(Qbar) > delta/2")
    if float(d[np.ix_(P, P)].max()) > (0.5 - 0.25 / t) * delta * (1 + geom_rtol):
        out.append("diam(P) > (1/2 - 1/(4t)) delta")
    mP = float(w[P].sum())
    if mP <= 0:
        out.append("w(P) = 0")
    mu_half = mu_delta_local(d[np.ix_(Qbar, Qbar)], w[Qbar], delta / 2)
    mu_full = mu_delta_local(d, w, delta)
    rhs = float(w[Qbar].sum()) * _ratio(mu_half, mu_full) ** (1.0 / t)
    if mP < rhs * (1 - rtol):
        out.append(f"mass inequality: w(P)={mP} < {rhs}")
    return out


def check_corollary(result: RamseyResult, space: MetricMeasureSpace, Z, rtol: float = MEASURE_RTOL) -> bool:
    """Evaluate the summed form of the mass inequality (0/0 = 0)."""
    Z = np.unique(np.asarray(Z, dtype=int))
    if not np.array_equal(np.union1d(result.Q, result.Qbar), Z) or np.intersect1d(result.Q, result.Qbar).size:
        raise ValueError("result does not partition Z")
    lhs, rhs = corollary_sides(result, space, Z)
    return lhs >= rhs * (1 - rtol)


def corollary_sides(result: RamseyResult, space: MetricMeasureSpace, Z) -> tuple[float, float]:
    Z = np.unique(np.asarray(Z, dtype=int))
    w = space.weights
    t = result.t
    delta = result.delta
    if len(result.Qbar):
        mu_half = mu_delta_local(space.dist[np.ix_(result.Qbar, result.Qbar)], w[result.Qbar], delta / 2)
    else:
        mu_half = 0.0
    mu_full = mu_delta_local(space.dist[np.ix_(Z, Z)], w[Z], delta)
    lhs = (_ratio(float(w[result.P].sum()), mu_half ** (1.0 / t))
           + _ratio(float(w[result.Q].sum()), mu_full ** (1.0 / t)))
    rhs = _ratio(float(w[Z].sum()), mu_full ** (1.0 / t))
    return lhs, rhs
