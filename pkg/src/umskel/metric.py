"""Finite metric-measure spaces.

Points are addressed by integer index ``0..n-1`` (ingestion order); ``ids``
keeps the user-facing labels. Distances live in a dense float64 matrix that is
normalized so the largest pairwise distance is exactly 1.0.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import numba
from numba import njit, prange
from scipy.spatial.distance import cdist

# prefer layers that need no external TBB
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

# relative slack for the triangle inequality in validate_metric only; stored
# Euclidean distances can miss it by a few ulps
TRIANGLE_RTOL = 1e-12


@dataclass
class Violation:
    kind: str
    witness: tuple
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "witness": list(self.witness), "detail": self.detail}


@dataclass
class ValidationReport:
    """A list of violated conditions; empty means everything checked out."""

    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, witness: tuple, detail: str = "") -> None:
        self.violations.append(Violation(kind, tuple(witness), detail))

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def __repr__(self) -> str:
        if self.ok:
            return "ValidationReport(ok)"
        head = ", ".join(f"{v.kind}{v.witness}" for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f", ... (+{len(self.violations) - 5})"
        return f"ValidationReport({head}{more})"


@dataclass
class RegularityProfile:
    """Fitted ``c r^alpha <= m(B(x, r)) <= C r^alpha`` over ``fit_range``."""

    alpha: float
    c_lower: float
    c_upper: float
    fit_range: tuple[float, float]
    n_samples: int = 0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "c_lower": self.c_lower,
            "c_upper": self.c_upper,
            "fit_range": list(self.fit_range),
            "n_samples": self.n_samples,
        }


class MetricMeasureSpace:
    """Finite metric space with an atomic measure.

    Build with :meth:`from_coords` (Euclidean) or :meth:`from_matrix`. Both
    merge duplicate locations (summing weights) and normalize to diameter 1.
    For coordinate-backed spaces the distance matrix is computed lazily, so
    large generated instances can be written to disk without an O(n^2) matrix.
    """

    def __init__(
        self,
        ids: Sequence[str],
        weights: np.ndarray,
        *,
        dist: np.ndarray | None = None,
        coords: np.ndarray | None = None,
        scale_factor: float | None = None,
        name: str = "",
    ):
        if dist is None and coords is None:
            raise ValueError("need a distance matrix or coordinates")
        self.ids = [str(i) for i in ids]
        self.weights = np.asarray(weights, dtype=float)
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self._dist = None if dist is None else np.asarray(dist, dtype=float)
        self._scale = scale_factor
        self.name = name
        if len(self.ids) != len(self.weights):
            raise ValueError("ids and weights differ in length")
        if len(self.ids) == 0:
            raise ValueError("empty space")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and non-negative")
        if self.weights.sum() <= 0:
            raise ValueError("total weight must be positive")
        self._index = {pid: k for k, pid in enumerate(self.ids)}

    # construction -------------------------------------------------------

    @classmethod
    def from_coords(cls, coords, weights=None, ids=None, name: str = "") -> "MetricMeasureSpace":
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        n = len(coords)
        weights = np.full(n, 1.0 / max(n, 1)) if weights is None else np.asarray(weights, float)
        ids = [str(k) for k in range(n)] if ids is None else list(ids)
        # exact duplicate rows are the only way to get zero Euclidean distance
        _, first, inverse = np.unique(coords, axis=0, return_index=True, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        if len(first) < n:
            order = np.sort(first)
            remap = {int(f): k for k, f in enumerate(order)}
            group_to_new = np.array([remap[int(first[g])] for g in range(len(first))])
            merged = np.zeros(len(order))
            np.add.at(merged, group_to_new[inverse], weights)
            coords = coords[order]
            ids = [ids[int(f)] for f in order]
            weights = merged
        return cls(ids, weights, coords=coords, name=name)

    @classmethod
    def from_matrix(cls, dist, weights=None, ids=None, name: str = "",
                    scale_factor: float | None = None) -> "MetricMeasureSpace":
        """Wrap a dense distance matrix.

        If ``scale_factor`` is given the matrix is taken as already normalized.
        """
        d = np.array(dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        n = d.shape[0]
        weights = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, float)
        ids = [str(k) for k in range(n)] if ids is None else list(ids)
        keep = []
        owner = np.arange(n)
        for k in range(n):
            hit = [j for j in keep if d[k, j] == 0.0]
            if hit:
                owner[k] = hit[0]
            else:
                keep.append(k)
        if len(keep) < n:
            merged = np.zeros(n)
            np.add.at(merged, owner, weights)
            keep_arr = np.array(keep)
            d = d[np.ix_(keep_arr, keep_arr)]
            weights = merged[keep_arr]
            ids = [ids[k] for k in keep]
        if scale_factor is None:
            diam = float(d.max()) if len(d) > 1 else 0.0
            scale_factor = diam if diam > 0 else 1.0
            if diam > 0:
                d = d / diam
        return cls(ids, weights, dist=d, scale_factor=scale_factor, name=name)

    # basic accessors ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return self.n

    @property
    def dist(self) -> np.ndarray:
        if self._dist is None:
            raw = cdist(self.coords, self.coords)
            raw = np.maximum(raw, raw.T)  # bitwise symmetric
            np.fill_diagonal(raw, 0.0)
            diam = float(raw.max()) if self.n > 1 else 0.0
            self._scale = diam if diam > 0 else 1.0
            self._dist = raw / self._scale
        return self._dist

    @property
    def scale_factor(self) -> float:
        if self._scale is None:
            self.dist
        return self._scale

    def index(self, pid) -> int:
        """Point index for an id (or an int index, passed through)."""
        if isinstance(pid, (int, np.integer)) and not isinstance(pid, bool):
            if 0 <= pid < self.n:
                return int(pid)
            raise KeyError(f"unknown point index {pid}")
        try:
            return self._index[str(pid)]
        except KeyError:
            raise KeyError(f"unknown point id {pid!r}") from None

    def indices(self, pts: Iterable) -> np.ndarray:
        return np.array(sorted({self.index(p) for p in pts}), dtype=int)

    def total_weight(self) -> float:
        return float(self.weights.sum())

    def weight(self, A) -> float:
        return float(self.weights[np.asarray(A, dtype=int)].sum())

    def original_dist(self) -> np.ndarray:
        """Distances before normalization."""
        return self.dist * self.scale_factor

    def subspace(self, A, weights=None, name: str | None = None) -> "MetricMeasureSpace":
        """Restriction to the points ``A`` (renormalized to diameter 1)."""
        A = np.asarray(A, dtype=int)
        w = self.weights[A] if weights is None else np.asarray(weights, float)
        return MetricMeasureSpace.from_matrix(
            self.original_dist()[np.ix_(A, A)], w, [self.ids[k] for k in A],
            name=self.name if name is None else name)

    def __repr__(self) -> str:
        return f"MetricMeasureSpace(name={self.name!r}, n={self.n})"


# ---------------------------------------------------------------------------
# queries

def validate_metric(space: MetricMeasureSpace, rtol: float = TRIANGLE_RTOL) -> ValidationReport:
    """Check the metric axioms exhaustively; witnesses are point ids."""
    rep = ValidationReport()
    d = space.dist
    n = space.n
    ids = space.ids
    if np.any(~np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        rep.add("finite", (ids[i], ids[j]))
    diag = np.flatnonzero(np.diag(d) != 0)
    for i in diag[:10]:
        rep.add("identity", (ids[i],), f"d(p,p)={d[i, i]}")
    asym = np.argwhere(np.triu(d != d.T, 1))
    for i, j in asym[:10]:
        rep.add("symmetry", (ids[i], ids[j]), f"{d[i, j]} != {d[j, i]}")
    off = ~np.eye(n, dtype=bool)
    bad = np.argwhere(off & (d <= 0))
    for i, j in bad[:10]:
        if i < j:
            rep.add("positivity", (ids[i], ids[j]), f"d={d[i, j]}")
    found = 0
    for k in range(n):
        via = d[:, k][:, None] + d[k, :][None, :]
        hit = np.argwhere(d > via * (1 + rtol))
        for i, j in hit:
            rep.add("triangle", (ids[i], ids[k], ids[j]),
                    f"d({ids[i]},{ids[j]})={d[i, j]} > {via[i, j]}")
            found += 1
            if found >= 10:
                return rep
    return rep


def ball(space: MetricMeasureSpace, center, radius: float, kind: str = "closed") -> np.ndarray:
    """Indices of ``B(center, radius)`` (closed) or ``B°`` (open)."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    row = space.dist[space.index(center)]
    if kind == "closed":
        return np.flatnonzero(row <= radius)
    if kind == "open":
        return np.flatnonzero(row < radius)
    raise ValueError(f"kind must be 'open' or 'closed', got {kind!r}")


def _as_index(space, A) -> np.ndarray:
    A = np.asarray(list(A) if not isinstance(A, np.ndarray) else A)
    if A.size == 0:
        raise ValueError("empty point set")
    if A.dtype.kind in "iu":
        return A.astype(int)
    return space.indices(A)


def set_diameter(space: MetricMeasureSpace, A) -> float:
    A = _as_index(space, A)
    return float(space.dist[np.ix_(A, A)].max())


def set_distance(space: MetricMeasureSpace, A, B) -> float:
    A = _as_index(space, A)
    B = _as_index(space, B)
    return float(space.dist[np.ix_(A, B)].min())


def mu_delta_local(d: np.ndarray, w: np.ndarray, delta: float) -> float:
    """``max_a w(B(a, delta/4))`` on a local distance matrix."""
    if len(w) == 0:
        raise ValueError("empty point set")
    return float(((d <= delta / 4) @ w).max())


def mu_delta(space: MetricMeasureSpace, A, delta: float) -> float:
    """Largest A-restricted mass of a closed ball of radius delta/4 centred in A."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    A = _as_index(space, A)
    return mu_delta_local(space.dist[np.ix_(A, A)], space.weights[A], delta)


# ---------------------------------------------------------------------------
# doubling constant

@njit(cache=True)
def _ball_cover(d, idx):
    """Diameter of ``idx`` and the size of a greedy cover by pieces of at most
    half that diameter, each grown from the first uncovered point by absorbing
    candidates nearest-first."""
    m = len(idx)
    diam = 0.0
    for a in range(m):
        for b in range(a + 1, m):
            if d[idx[a], idx[b]] > diam:
                diam = d[idx[a], idx[b]]
    if m <= 1:
        return diam, m
    half = diam / 2
    uncovered = np.ones(m, dtype=np.bool_)
    left = m
    pieces = 0
    cand = np.empty(m, dtype=np.int64)
    reach = np.empty(m)
    while left > 0:
        seed = 0
        while not uncovered[seed]:
            seed += 1
        k = 0
        for j in range(m):
            if uncovered[j] and d[idx[seed], idx[j]] <= half:
                cand[k] = j
                reach[k] = d[idx[seed], idx[j]]
                k += 1
        order = np.argsort(reach[:k], kind="mergesort")
        cs = cand[:k][order]
        rs = reach[:k][order]
        for a in range(k):
            if rs[a] <= half:
                uncovered[cs[a]] = False
                left -= 1
                pa = idx[cs[a]]
                for b in range(a + 1, k):
                    dv = d[pa, idx[cs[b]]]
                    if dv > rs[b]:
                        rs[b] = dv
        pieces += 1
    return diam, pieces


def _greedy_half_cover(d: np.ndarray, idx: np.ndarray) -> int:
    return int(_ball_cover(d, np.asarray(idx, dtype=np.int64))[1])


def _radius_ladder(row: np.ndarray, exhaustive: bool) -> np.ndarray:
    vals = np.unique(row)
    if exhaustive or len(vals) <= 24:
        return vals
    # geometric ladder of realized distances: largest value below diam*2^(-k/2)
    out = {float(vals[-1]), 0.0}
    target = float(vals[-1])
    smallest = float(vals[1]) if len(vals) > 1 else 0.0
    while target >= smallest:
        k = np.searchsorted(vals, target, side="right") - 1
        out.add(float(vals[k]))
        target /= np.sqrt(2.0)
    return np.array(sorted(out))


def lambda_hat(space: MetricMeasureSpace) -> int:
    """:func:`doubling_upper` with default settings, memoized on the space."""
    if getattr(space, "_lambda_hat", None) is None:
        space._lambda_hat = doubling_upper(space)
    return space._lambda_hat


def doubling_upper(space: MetricMeasureSpace, exhaustive: bool | None = None) -> int:
    """Upper bound on the doubling constant over ball-shaped subsets.

    Every ball ``B(x, r)`` with ``x`` a point and ``r`` a realized distance from
    ``x`` is covered greedily by pieces of diameter at most half its own; the
    largest piece count is returned. With ``exhaustive=False`` (the default
    above 128 points) radii are thinned to a sqrt(2)-geometric ladder.
    """
    n = space.n
    if n == 1:
        return 1
    if exhaustive is None:
        exhaustive = n <= 128
    d = np.ascontiguousarray(space.dist)
    orders = np.argsort(d, axis=1, kind="stable")
    sizes, starts = [], [0]
    for x in range(n):
        srow = d[x, orders[x]]
        cnt = np.searchsorted(srow, _radius_ladder(d[x], exhaustive), side="right")
        cnt = np.unique(cnt[cnt > 1])[::-1]  # largest balls first
        sizes.extend(cnt.tolist())
        starts.append(len(sizes))
    set_threads()
    per_center = _max_cover(d, orders, np.array(sizes, dtype=np.int64), np.array(starts, dtype=np.int64))
    return max(1, int(per_center.max()))


@njit(parallel=True, cache=True)
def _max_cover(d, orders, sizes, starts):
    n = len(starts) - 1
    out = np.ones(n, dtype=np.int64)
    for x in prange(n):
        best = 1
        for k in range(starts[x], starts[x + 1]):
            cnt = sizes[k]
            if cnt <= best:
                continue
            idx = np.sort(orders[x, :cnt])
            pieces = _ball_cover(d, idx)[1]
            if pieces > best:
                best = pieces
        out[x] = best
    return out


def set_threads() -> None:
    """Honor ``UMSK_THREADS`` as a cap on numba worker threads."""
    cap = os.environ.get("UMSK_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))
