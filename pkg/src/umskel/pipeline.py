"""End-to-end extraction: skeleton, trimming, measure bounds and regular subsets."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .metric import MetricMeasureSpace, RegularityProfile, lambda_hat as cached_lambda_hat
from .nettree import build_net_tree
from .skeleton import BALL_CONST, SkeletonTree, build_skeleton, verify_skeleton
from .trim import (SkeletonMeasure, TrimmedTree, WeightedTree, effective_delta, induce_measure,
                   trim_balanced, ultrametric_matrix, verify_trim)

BOUND_RTOL = 1e-9
DEFAULT_TOLERANCE = 0.15


@dataclass
class VerdictTable:
    """One row per (center, radius) check: pass iff ``lhs <= rhs`` (growth) or
    ``lhs >= rhs`` (shrink) up to ``BOUND_RTOL``."""

    kind: str
    center: np.ndarray
    radius: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    witness: np.ndarray
    passed: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(self.passed.all())

    @property
    def margin(self) -> np.ndarray:
        return self.rhs - self.lhs if self.kind == "growth" else self.lhs - self.rhs

    def __len__(self) -> int:
        return len(self.center)

    def n_failed(self) -> int:
        return int((~self.passed).sum())

    def failures(self, ids=None, limit: int = 10) -> list[dict]:
        rows = np.flatnonzero(~self.passed)[:limit]
        return [self.row(k, ids) for k in rows]

    def row(self, k: int, ids=None) -> dict:
        name = (lambda p: int(p)) if ids is None else (lambda p: ids[p] if p >= 0 else None)
        return {"center": name(self.center[k]), "radius": float(self.radius[k]),
                "lhs": float(self.lhs[k]), "rhs": float(self.rhs[k]),
                "margin": float(self.margin[k]), "witness": name(self.witness[k])}

    def summary(self) -> dict:
        m = self.margin
        return {"kind": self.kind, "rows": len(self), "failed": self.n_failed(),
                "min_margin": float(m.min()) if len(m) else None}

    def to_csv(self, path, ids=None) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["center", "radius", "lhs", "rhs", "margin", "witness", "passed"])
            m = self.margin
            for k in range(len(self)):
                c, w = int(self.center[k]), int(self.witness[k])
                out.writerow([ids[c] if ids else c, repr(float(self.radius[k])), repr(float(self.lhs[k])),
                              repr(float(self.rhs[k])), repr(float(m[k])),
                              (ids[w] if ids else w) if w >= 0 else "", bool(self.passed[k])])


def _table(kind, rows) -> VerdictTable:
    if not rows:
        z = np.zeros(0)
        return VerdictTable(kind, z.astype(int), z, z, z, z.astype(int), z.astype(bool))
    cols = list(zip(*rows))
    c, r, lhs, rhs, wit = (np.array(x) for x in cols)
    if kind == "growth":
        passed = lhs <= rhs * (1 + BOUND_RTOL)
    else:
        passed = lhs >= rhs * (1 - BOUND_RTOL)
    return VerdictTable(kind, c.astype(int), r.astype(float), lhs.astype(float), rhs.astype(float),
                        wit.astype(int), passed & (wit >= -1))


@dataclass
class ExtractionReport:
    subset: np.ndarray
    measure: SkeletonMeasure
    distortion: float
    t: int
    lambda_hat: int
    growth_check: VerdictTable | None = None
    shrink_check: VerdictTable | None = None
    regularity: RegularityProfile | None = None
    runtime_ms: int = 0
    delta_param: float = 1.0
    skeleton_report: list = field(default_factory=list)
    trim_report: list[str] = field(default_factory=list)
    alpha: float | None = None
    beta: float | None = None
    alpha_prime: float | None = None
    target_exponent: float | None = None
    tolerance: float = DEFAULT_TOLERANCE
    regularity_ok: bool | None = None
    degenerate: bool = False
    concentric_pass_rate: float | None = None
    notes: list[str] = field(default_factory=list)
    skeleton: SkeletonTree | None = field(default=None, repr=False)
    trimmed: TrimmedTree | None = field(default=None, repr=False)
    trimmed_beta: TrimmedTree | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        checks = [not self.skeleton_report, not self.trim_report, self.distortion <= 16 * self.t]
        checks += [tab.ok for tab in (self.growth_check, self.shrink_check) if tab is not None]
        return all(checks)

    def to_dict(self, ids=None) -> dict:
        name = (lambda p: int(p)) if ids is None else (lambda p: ids[p])
        return {
            "subset": [name(p) for p in self.subset],
            "measure": {name(p): float(m) for p, m in zip(self.measure.points, self.measure.masses)},
            "distortion": self.distortion,
            "distortion_bound": 16 * self.t,
            "t": self.t,
            "lambda_hat": self.lambda_hat,
            "delta_param": self.delta_param,
            "growth_check": None if self.growth_check is None else self.growth_check.summary(),
            "shrink_check": None if self.shrink_check is None else self.shrink_check.summary(),
            "skeleton_violations": [v.to_dict() for v in self.skeleton_report],
            "trim_violations": list(self.trim_report),
            "regularity": None if self.regularity is None else self.regularity.to_dict(),
            "alpha": self.alpha,
            "beta": self.beta,
            "alpha_prime": self.alpha_prime,
            "target_exponent": self.target_exponent,
            "tolerance": self.tolerance,
            "regularity_ok": self.regularity_ok,
            "degenerate": self.degenerate,
            "concentric_pass_rate": self.concentric_pass_rate,
            "runtime_ms": self.runtime_ms,
            "notes": list(self.notes),
            "ok": self.ok,
        }


# ---------------------------------------------------------------------------
# skeleton pipeline

def distortion_of(space: MetricMeasureSpace, pts: np.ndarray, rho: np.ndarray) -> float:
    """``max rho/d * max d/rho`` over distinct pairs (1 for fewer than two points)."""
    if len(pts) < 2:
        return 1.0
    d = space.dist[np.ix_(pts, pts)]
    off = ~np.eye(len(pts), dtype=bool)
    return float((rho[off] / d[off]).max() * (d[off] / rho[off]).max())


def um_skeleton(space: MetricMeasureSpace, t: int, delta_mode: str = "effective",
                lambda_hat: int | None = None, verify: bool = True,
                concentric_probe: bool = False):
    """Net-tree, skeleton, trimming and the induced measure, plus all checks.

    Returns ``(measure, trimmed, report)``; ``report.skeleton`` holds the
    untrimmed hierarchy.
    """
    start = time.perf_counter()
    if delta_mode not in ("effective", "lambda"):
        raise ValueError("delta_mode must be 'effective' or 'lambda'")
    lam = cached_lambda_hat(space) if lambda_hat is None else int(lambda_hat)
    net = build_net_tree(space)
    skel = build_skeleton(space, net, t)
    skel.lambda_hat = lam
    delta = effective_delta(skel) if delta_mode == "effective" else lam ** (-2 / t)
    trimmed = trim_balanced(skel.weighted_tree(), delta)
    measure = induce_measure(trimmed)
    pts, rho = ultrametric_matrix(trimmed)
    report = ExtractionReport(pts, measure, distortion_of(space, pts, rho), int(t), lam,
                              delta_param=float(delta), skeleton=skel, trimmed=trimmed)
    if verify:
        report.skeleton_report = verify_skeleton(skel, lam).violations
        report.trim_report = verify_trim(trimmed)
        report.growth_check = verify_growth(space, report, t)
        report.shrink_check = verify_shrink(space, report, t)
    if concentric_probe:
        report.concentric_pass_rate = concentric_probe_rate(space, report, t)
    report.runtime_ms = int((time.perf_counter() - start) * 1000)
    return measure, trimmed, report


def verify_growth(space: MetricMeasureSpace, report: ExtractionReport, t: int) -> VerdictTable:
    """``nu(B(x,r)) <= lambda^(2/t) w(B(x,(32t+1)r))^(1-1/t)`` for all x and r.

    ``nu(B(x, .))`` only changes at distances from x to the support and the
    right side is nondecreasing in r, so checking r = 0 and those distances
    covers every radius.
    """
    d = space.dist
    w = space.weights
    S, nu = report.measure.points, report.measure.masses
    factor = report.lambda_hat ** (2 / t)
    stretch = 32 * t + 1
    rows = []
    for x in range(space.n):
        order = np.argsort(d[x], kind="stable")
        srow = d[x, order]
        cw = np.concatenate([[0.0], np.cumsum(w[order])])
        ds = d[x, S]
        so = np.argsort(ds, kind="stable")
        sd = ds[so]
        cn = np.cumsum(nu[so])
        radii = np.unique(np.concatenate([[0.0], sd]))
        lhs = np.concatenate([[0.0], cn])[np.searchsorted(sd, radii, side="right")]
        big = cw[np.searchsorted(srow, stretch * radii, side="right")]
        rhs = factor * big ** (1 - 1 / t)
        rows.extend(zip([x] * len(radii), radii, lhs, rhs, [-1] * len(radii)))
    return _table("growth", rows)


def _tree_paths(trimmed: TrimmedTree) -> dict[int, list[int]]:
    """Root-to-leaf node paths of the kept tree, keyed by leaf point."""
    wt = trimmed.tree
    out = {}
    for v in trimmed.kept_leaves():
        path = []
        u = v
        while u >= 0:
            path.append(u)
            u = wt.parent[u]
        out[wt.point[v]] = path[::-1]
    return out


def verify_shrink(space: MetricMeasureSpace, report: ExtractionReport, t: int,
                  ball_const: float = BALL_CONST) -> VerdictTable:
    """``nu(B(y,r)) >= (lambda^(-2/t)/2) w(B(x', c r/t))^(1-1/t)`` for y in S,
    with ``B(x', c r/t)`` inside ``B(y, r)``.

    Radii are cut into intervals ``[a, b)`` at 0, the distances from y to the
    support and the labels on y's path. On each interval the left side is
    constant and the witness is fixed, so the check uses ``nu(B(y,a))``
    against the open ball of radius ``c b/t`` and requires that open ball to
    sit inside ``B(y, a)``; this covers every radius. The witness is the rep of
    the shallowest node on y's path with label at most ``a``; if that ever
    fails every point is tried.
    """
    trimmed = report.trimmed
    wt = trimmed.tree
    d = space.dist
    w = space.weights
    S, nu = report.measure.points, report.measure.masses
    W = float(w.sum())
    factor = report.lambda_hat ** (-2 / t) / 2
    shrink = ball_const / t
    expo = 1 - 1 / t
    paths = _tree_paths(trimmed)
    orders = np.argsort(d, axis=1, kind="stable")
    rows = []
    for y, mass in zip(S, nu):
        path = paths[int(y)]
        labels = np.array([wt.label[v] for v in path])
        ds = d[y, S]
        so = np.argsort(ds, kind="stable")
        sd = ds[so]
        cn = np.concatenate([[0.0], np.cumsum(nu[so])])
        cuts = np.unique(np.concatenate([[0.0], sd, labels]))
        ends = np.append(cuts[1:], np.inf)
        lhs = cn[np.searchsorted(sd, cuts, side="right")]
        for a, b, left in zip(cuts, ends, lhs):
            # shallowest node on the path whose label is at most a
            k = int(np.argmax(labels <= a))
            x = wt.rep[path[k]] if wt.rep is not None else int(y)
            res = _shrink_row(d, w, orders, int(y), a, b, left, x, shrink, factor, expo, W)
            if res is None:
                res = _shrink_fallback(d, w, orders, int(y), a, b, left, shrink, factor, expo, W)
            rows.append((int(y), a, left, res[0], res[1]))
    return _table("shrink", rows)


def _open_ball_mass(d, w, orders, x, radius, W):
    if np.isinf(radius):
        return W, orders[x]
    srow = d[x, orders[x]]
    cnt = int(np.searchsorted(srow, radius, side="left"))
    members = orders[x, :cnt]
    return float(w[members].sum()), members


def _shrink_row(d, w, orders, y, a, b, left, x, shrink, factor, expo, W):
    mass, members = _open_ball_mass(d, w, orders, x, shrink * b, W)
    if len(members) and float(d[y, members].max()) > a:
        return None
    rhs = factor * mass ** expo
    if left < rhs * (1 - BOUND_RTOL):
        return None
    return rhs, x


def _shrink_fallback(d, w, orders, y, a, b, left, shrink, factor, expo, W):
    best = None
    for x in range(len(w)):
        res = _shrink_row(d, w, orders, y, a, b, left, x, shrink, factor, expo, W)
        if res is not None and (best is None or res[0] < best[0]):
            best = res
    if best is None:
        # no valid witness: record the constructive bound as a failure
        mass, _ = _open_ball_mass(d, w, orders, y, shrink * b, W)
        return factor * mass ** expo, -2
    return best


def concentric_probe_rate(space: MetricMeasureSpace, report: ExtractionReport, t: int,
                          ball_const: float = BALL_CONST) -> float:
    """Share of (y, r) with ``nu(B(y,r)) >= (lambda^(-2/t)/2) w(B(y, c r/t))^(1-1/t)``,
    i.e. the shrink bound with both balls centered at y. Exploratory only."""
    d = space.dist
    w = space.weights
    S, nu = report.measure.points, report.measure.masses
    factor = report.lambda_hat ** (-2 / t) / 2
    shrink = ball_const / t
    hits = total = 0
    for y in S:
        order = np.argsort(d[y], kind="stable")
        srow = d[y, order]
        cw = np.concatenate([[0.0], np.cumsum(w[order])])
        ds = d[y, S]
        radii = np.unique(ds)
        lhs = np.array([nu[ds <= r].sum() for r in radii])
        rhs = factor * cw[np.searchsorted(srow, shrink * radii, side="right")] ** (1 - 1 / t)
        hits += int((lhs >= rhs * (1 - BOUND_RTOL)).sum())
        total += len(radii)
    return hits / total if total else 1.0


# ---------------------------------------------------------------------------
# regularity

def default_band(space: MetricMeasureSpace, pts=None) -> tuple[float, float]:
    """``[9 * 3^-L, 1/9]`` with ``3^-L`` the largest power of three not above the
    smallest positive distance: the middle scales of a level-L construction."""
    d = space.dist if pts is None else space.dist[np.ix_(pts, pts)]
    pos = d[d > 0]
    if pos.size == 0:
        raise ValueError("need at least two distinct points")
    low = 1.0
    while low > pos.min():
        low /= 3
    return 9 * low, 1 / 9


def estimate_regularity(space: MetricMeasureSpace, measure=None, radius_range=None,
                        n_radii: int = 24, radii=None) -> RegularityProfile:
    """Pooled least-squares fit of ``log m(B(x,r))`` on ``log r`` over support
    centers and geometric radii; ``c_lower``/``c_upper`` bracket ``m/r^alpha``.

    ``measure`` may be a :class:`SkeletonMeasure`, a dense weight vector or
    ``None`` (the space's own weights). Explicit ``radii`` override the
    geometric grid.
    """
    if measure is None:
        m = space.weights
    elif isinstance(measure, SkeletonMeasure):
        m = measure.as_dense(space.n)
    else:
        m = np.asarray(measure, dtype=float)
    S = np.flatnonzero(m > 0)
    if len(S) < 2:
        raise ValueError("need at least two support points")
    if radii is not None:
        radii = np.asarray(radii, dtype=float)
        lo, hi = float(radii.min()), float(radii.max())
    else:
        lo, hi = default_band(space, S) if radius_range is None else map(float, radius_range)
        if not 0 < lo < hi:
            raise ValueError(f"empty radius range ({lo}, {hi})")
        radii = np.geomspace(lo, hi, n_radii)
    d = space.dist[np.ix_(S, S)]
    masses = np.stack([(d <= r) @ m[S] for r in radii], axis=1)  # centers x radii
    logr = np.broadcast_to(np.log(radii), masses.shape).ravel()
    logm = np.log(masses).ravel()
    alpha = float(np.polyfit(logr, logm, 1)[0])
    ratio = masses / radii[None, :] ** alpha
    return RegularityProfile(alpha, float(ratio.min()), float(ratio.max()), (lo, hi), int(masses.size))


# ---------------------------------------------------------------------------
# regular subsets

def extract_near_alpha(space: MetricMeasureSpace, t: int, alpha: float | None = None,
                       radius_range=None, tolerance: float = DEFAULT_TOLERANCE,
                       **kwargs) -> ExtractionReport:
    """Skeleton with exponent target ``(1 - 1/t) alpha``; ``alpha`` is fitted
    from the space when not given."""
    start = time.perf_counter()
    if alpha is None:
        alpha = estimate_regularity(space, radius_range=radius_range).alpha
    _, _, report = um_skeleton(space, t, **kwargs)
    report.alpha = float(alpha)
    report.target_exponent = (1 - 1 / t) * alpha
    report.tolerance = tolerance
    _fit_report(space, report, radius_range)
    report.runtime_ms = int((time.perf_counter() - start) * 1000)
    return report


def _fit_report(space, report, radius_range):
    if len(report.measure.points) < 2:
        report.degenerate = True
        report.notes.append("fewer than two points survive; no regularity fit")
        return
    try:
        prof = estimate_regularity(space, report.measure, radius_range)
    except ValueError as exc:
        report.notes.append(f"no regularity fit: {exc}")
        return
    report.regularity = prof
    report.regularity_ok = abs(prof.alpha - report.target_exponent) <= report.tolerance


def extract_beta_regular_um(trimmed: TrimmedTree, alpha: float, beta: float):
    """Thin an ultrametric measure tree from exponent ``alpha`` to ``beta``.

    The premeasure is ``sigma^(beta/alpha)`` on the kept tree, which is
    monotone and sub-additive, and is trimmed with ``delta = 1``. Returns
    ``(points, measure, trimmed_again)``; node indices of the result refer to
    the restricted tree ``trimmed_again.tree``.
    """
    if not 0 < beta <= alpha:
        raise ValueError("need 0 < beta <= alpha")
    tree, old = trimmed.tree.restrict(trimmed.kept)
    sigma = trimmed.sigma[old]
    out = trim_balanced(tree.with_xi(np.asarray(sigma) ** (beta / alpha)), 1.0)
    measure = induce_measure(out)
    return measure.points, measure, out


def node_masses(trimmed: TrimmedTree) -> np.ndarray:
    """Measure of each kept node's leaf set (sigma, by additivity); nan elsewhere."""
    return np.asarray(trimmed.sigma, dtype=float)


def ball_intervals(trimmed: TrimmedTree, radius_range):
    """For each kept node v, the radii ``[label v, label parent)`` at which the
    ultrametric ball around any leaf below v is exactly v's leaf set, clipped
    to ``radius_range``. Yields ``(v, lo, hi)`` with ``lo <= hi``."""
    wt = trimmed.tree
    r_lo, r_hi = map(float, radius_range)
    for v in trimmed.kept_nodes():
        top = np.inf if wt.parent[v] < 0 else wt.label[wt.parent[v]]
        if wt.label[v] > r_hi or top <= r_lo:
            continue
        yield v, max(wt.label[v], r_lo), min(top, r_hi)


def um_ball_constants(trimmed: TrimmedTree, alpha: float, radius_range) -> tuple[float, float]:
    """Exact ``(c, C)`` with ``c r^alpha <= nu(B) <= C r^alpha`` for every
    ultrametric ball with radius in ``radius_range``."""
    mass = node_masses(trimmed)
    lows, highs = [], []
    for v, lo, hi in ball_intervals(trimmed, radius_range):
        lows.append(mass[v] / hi ** alpha)
        highs.append(mass[v] / lo ** alpha)
    return float(min(lows)), float(max(highs))


def um_ball_violations(trimmed: TrimmedTree, beta: float, c: float, C: float, radius_range,
                       rtol: float = BOUND_RTOL) -> list[tuple[int, float, float, float]]:
    """Balls breaking ``c r^beta <= nu(B) <= C r^beta``; rows (node, radius, mass, bound)."""
    mass = node_masses(trimmed)
    bad = []
    for v, lo, hi in ball_intervals(trimmed, radius_range):
        if mass[v] < c * hi ** beta * (1 - rtol):
            bad.append((v, hi, float(mass[v]), c * hi ** beta))
        if mass[v] > C * lo ** beta * (1 + rtol):
            bad.append((v, lo, float(mass[v]), C * lo ** beta))
    return bad


def ceiling_t(alpha: float, beta: float) -> int:
    """Smallest integer ``t >= alpha/(alpha - beta)`` (at least 2)."""
    if not 0 < beta < alpha:
        raise ValueError("need 0 < beta < alpha")
    q = alpha / (alpha - beta)
    # 1/(1 - 0.9) is 10.000000000000002 in floating point; snap rounding noise
    if abs(q - round(q)) <= 1e-9 * q:
        q = round(q)
    return max(2, math.ceil(q))


def dvoretzky_extract(space: MetricMeasureSpace, alpha: float | None, beta: float,
                      radius_range=None, tolerance: float = DEFAULT_TOLERANCE,
                      **kwargs) -> ExtractionReport:
    """Beta-regular subset with ultrametric distortion at most ``16 t``,
    ``t = ceil(alpha/(alpha - beta))``."""
    start = time.perf_counter()
    if alpha is None:
        alpha = estimate_regularity(space, radius_range=radius_range).alpha
    t = ceiling_t(alpha, beta)
    _, trimmed, report = um_skeleton(space, t, **kwargs)
    alpha_prime = (1 - 1 / t) * alpha
    pts, measure, trimmed2 = extract_beta_regular_um(trimmed, alpha_prime, min(beta, alpha_prime))
    upts, rho = ultrametric_matrix(trimmed2)
    report.subset = upts
    report.measure = measure
    report.trimmed_beta = trimmed2
    report.distortion = distortion_of(space, upts, rho)
    report.alpha, report.beta, report.alpha_prime = float(alpha), float(beta), alpha_prime
    report.target_exponent = float(beta)
    report.tolerance = tolerance
    report.trim_report = report.trim_report + verify_trim(trimmed2)
    _fit_report(space, report, radius_range)
    report.runtime_ms = int((time.perf_counter() - start) * 1000)
    return report
