"""Brute-force re-derivations used as test oracles.

Everything here walks raw distance rows with plain Python loops (or direct
numpy broadcasting where a triple loop would be too slow) and shares no
helpers with the fast code paths it is meant to check.
"""
from __future__ import annotations

import numpy as np

from .metric import MetricMeasureSpace

RTOL = 1e-12


def _row(space, a):
    return [float(v) for v in space.dist[a]]


def _mass(space, pts):
    return sum(float(space.weights[p]) for p in pts)


def _diam(space, pts):
    best = 0.0
    for a in pts:
        row = _row(space, a)
        for b in pts:
            best = max(best, row[b])
    return best


def _gap(space, A, B):
    best = float("inf")
    for a in A:
        row = _row(space, a)
        for b in B:
            best = min(best, row[b])
    return best


def _mu_quarter(space, A, delta):
    """max over a in A of the A-mass of the closed ball B(a, delta/4)."""
    best = 0.0
    for a in A:
        row = _row(space, a)
        best = max(best, sum(float(space.weights[b]) for b in A if row[b] <= delta / 4))
    return best


def _frac(num, den):
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def oracle_ramsey_failures(space: MetricMeasureSpace, Z, delta: float, t: int, result) -> list[str]:
    """Every way ``result`` falls short of a valid split of ``Z``."""
    Z = sorted({int(z) for z in Z})
    P = sorted(int(p) for p in result.P)
    Q = sorted(int(q) for q in result.Q)
    Qbar = sorted(int(q) for q in result.Qbar)
    out = []
    if sorted(Q + Qbar) != Z:
        out.append("Q and Qbar do not partition Z")
    if not set(P) <= set(Qbar):
        out.append("P not inside Qbar")
    if not P or not Q:
        out.append("empty P or Q")
        return out

    # the center and the ring index are re-derived from the definitions
    def ratio(x):
        row = _row(space, x)
        inner = sum(float(space.weights[z]) for z in Z if row[z] <= delta / 8)
        outer = sum(float(space.weights[z]) for z in Z if row[z] < delta / 4)
        return 0.0 if outer == 0.0 else inner / outer

    x = int(result.center)
    if x not in Z:
        out.append("center outside Z")
        return out
    best = max(ratio(z) for z in Z)
    if ratio(x) != best:
        out.append(f"center ratio {ratio(x)} is not the maximum {best}")
    row = _row(space, x)
    shells = [[z for z in Z if row[z] <= delta * (t + i) / (8 * t)] for i in range(t)]
    shells.append([z for z in Z if row[z] < delta / 4])
    m = [_mass(space, h) for h in shells]
    i = int(result.ring_index)
    if not 1 <= i <= t:
        out.append(f"ring index {i} outside 1..{t}")
        return out
    if m[i] > m[i - 1] * (m[t] / m[0]) ** (1.0 / t) * (1 + RTOL):
        out.append(f"ring {i} does not satisfy the growth condition")
    if P != shells[i - 1]:
        out.append("P differs from the shell inside the ring")
    if Qbar != [z for z in Z if row[z] < delta * (t + i) / (8 * t)]:
        out.append("Qbar differs from the open ball at the ring")

    # the guarantees, judged on the sets as given
    if _gap(space, P, Q) < delta / (8 * t):
        out.append("d(P,Q) < delta/(8t)")
    if _diam(space, Qbar) > delta / 2:
        out.append("diam(Qbar) > delta/2")
    if _diam(space, P) > (0.5 - 0.25 / t) * delta:
        out.append("diam(P) too large")
    wP, wQ, wQbar, wZ = (_mass(space, s) for s in (P, Q, Qbar, Z))
    if wP <= 0:
        out.append("w(P) = 0")
    half = _mu_quarter(space, Qbar, delta / 2)
    full = _mu_quarter(space, Z, delta)
    if wP < wQbar * _frac(half, full) ** (1.0 / t) * (1 - RTOL):
        out.append("mass inequality for P fails")
    lhs = _frac(wP, half ** (1.0 / t)) + _frac(wQ, full ** (1.0 / t))
    rhs = _frac(wZ, full ** (1.0 / t))
    if lhs < rhs * (1 - RTOL):
        out.append("summed mass inequality fails")
    return out


def oracle_check_ramsey(space: MetricMeasureSpace, Z, delta: float, t: int, result) -> bool:
    return not oracle_ramsey_failures(space, Z, delta, t, result)


def brute_mu_delta(space: MetricMeasureSpace, A, delta: float) -> float:
    return _mu_quarter(space, sorted(int(a) for a in A), delta)


def brute_strong_triangle(rho) -> list[tuple[int, int, int]]:
    """Triples (x, y, z) with rho(x,z) > max(rho(x,y), rho(y,z))."""
    n = len(rho)
    bad = []
    for x in range(n):
        for y in range(n):
            for z in range(n):
                if rho[x][z] > max(rho[x][y], rho[y][z]):
                    bad.append((x, y, z))
    return bad


def strong_triangle_count(rho) -> int:
    """Exhaustive triple count of ``rho(x,z) > max(rho(x,y), rho(y,z))``,
    vectorized over (y, z) for each x."""
    rho = np.asarray(rho, dtype=float)
    bad = 0
    for x in range(len(rho)):
        via = np.maximum(rho[x][:, None], rho)  # [y, z] -> max(rho(x,y), rho(y,z))
        bad += int(np.count_nonzero(rho[x][None, :] > via))
    return bad


def box_count_dimension(coords, lo: float, hi: float, n_scales: int = 13) -> float:
    """Slope of log N(r) against log(1/r), where N(r) counts the grid cells of
    side r that contain a point, over geometric r in [lo, hi]."""
    x = np.asarray(coords, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    x = (x - x.min(axis=0)) / max(float(np.ptp(x, axis=0).max()), 1e-300)
    sizes = np.geomspace(lo, hi, n_scales)
    counts = [len({tuple(c) for c in np.floor(x / r).astype(np.int64)}) for r in sizes]
    return float(np.polyfit(np.log(1 / sizes), np.log(counts), 1)[0])
