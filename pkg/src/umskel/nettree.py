"""Hierarchical nets: the surjective net-tree over a finite space.

Level ``l`` holds a nested greedy ``(3/4) 4^-l``-net; every vertex carries the
label ``4^-l``. Level 0 is forced to the single first point, and the hierarchy
is cut at the first level whose net radius drops to the minimum positive
distance, where the net is the whole point set. Leaves therefore stand for the
constant branches below them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .metric import MetricMeasureSpace, ValidationReport

TAU = 0.25
KAPPA = 20.0


@dataclass
class NetVertex:
    index: int
    level: int
    rep: int
    label: float
    parent: int | None
    children: list[int]
    pboundary: np.ndarray | None


class NetTree:
    """Array-backed net-tree; vertex 0 is the root."""

    def __init__(self, n_points, level, rep, label, parent, children, nets=None,
                 net_radii=None, tau=TAU, kappa=KAPPA, pboundary=None):
        self.n_points = int(n_points)
        self.level = np.asarray(level, dtype=int)
        self.rep = np.asarray(rep, dtype=int)
        self.label = np.asarray(label, dtype=float)
        self.parent = np.asarray(parent, dtype=int)
        self.children = [list(c) for c in children]
        self.nets = nets if nets is not None else _nets_from_levels(self.level, self.rep)
        self.net_radii = net_radii if net_radii is not None else [
            (1 - tau) * tau ** l for l in range(len(self.nets))]
        self.tau = tau
        self.kappa = kappa
        self.pboundary = pboundary
        self.root = 0

    @property
    def n_vertices(self) -> int:
        return len(self.rep)

    @property
    def max_level(self) -> int:
        return int(self.level.max())

    @property
    def vertices(self) -> list[NetVertex]:
        pb = self.pboundary
        return [
            NetVertex(v, int(self.level[v]), int(self.rep[v]), float(self.label[v]),
                      None if self.parent[v] < 0 else int(self.parent[v]),
                      list(self.children[v]), None if pb is None else pb[v])
            for v in range(self.n_vertices)
        ]

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    @cached_property
    def _tour(self):
        """Pre-order tour: ``tin[v]..tout[v]`` is the tour range of v's subtree."""
        m = self.n_vertices
        tin = np.empty(m, dtype=int)
        tout = np.empty(m, dtype=int)
        order = np.empty(m, dtype=int)
        clock = 0
        stack = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                tout[v] = clock - 1
                continue
            tin[v] = clock
            order[clock] = v
            clock += 1
            stack.append((v, True))
            for c in reversed(self.children[v]):
                stack.append((c, False))
        return tin, tout, order

    def subtree(self, v: int) -> np.ndarray:
        tin, tout, order = self._tour
        return order[tin[v]:tout[v] + 1]

    def is_ancestor(self, a: int, v: int) -> bool:
        """Weak ancestor test."""
        tin, tout, _ = self._tour
        return tin[a] <= tin[v] <= tout[a]

    def represented(self, v: int) -> np.ndarray:
        """Points represented by descendants of v."""
        return np.unique(self.rep[self.subtree(v)])

    def boundary(self, v: int) -> np.ndarray:
        """Points represented by the (constant) branches through v: leaf reps."""
        sub = self.subtree(v)
        leaves = sub[[not self.children[w] for w in sub]]
        return np.unique(self.rep[leaves])

    def leaf_of_point(self) -> dict[int, int]:
        return {int(self.rep[v]): v for v in range(self.n_vertices) if not self.children[v]}

    def descend(self, v: int, s: float) -> list[int]:
        """Maximal descendants with label <= s, stopping at leaves."""
        out = []
        stack = [v]
        while stack:
            w = stack.pop()
            if self.label[w] <= s or not self.children[w]:
                out.append(w)
            else:
                stack.extend(reversed(self.children[w]))
        return out

    def __repr__(self) -> str:
        return f"NetTree(n_points={self.n_points}, vertices={self.n_vertices}, L={self.max_level})"


def _nets_from_levels(level, rep):
    return [np.sort(rep[level == l]) for l in range(int(level.max()) + 1)]


# ---------------------------------------------------------------------------

def build_net_tree(space: MetricMeasureSpace) -> NetTree:
    n = space.n
    if n == 0:
        raise ValueError("empty space")
    if n == 1:
        tree = NetTree(1, [0], [0], [1.0], [-1], [[]], nets=[np.array([0])], net_radii=[1 - TAU])
        return assign_partial_boundaries(tree)
    d = space.dist
    dmin = float(d[d > 0].min())

    nets = [np.array([0])]
    radii = [1 - TAU]
    in_net = np.zeros(n, dtype=bool)
    in_net[0] = True
    near = d[0].copy()  # distance to the current net
    level = 0
    while True:
        level += 1
        delta = (1 - TAU) * TAU ** level
        for p in np.flatnonzero(~in_net & (near >= delta)):
            if near[p] >= delta:
                in_net[p] = True
                np.minimum(near, d[p], out=near)
        nets.append(np.flatnonzero(in_net))
        radii.append(delta)
        if delta <= dmin:
            break
    assert in_net.all()

    levels, reps, labels, parents = [0], [0], [1.0], [-1]
    children: list[list[int]] = [[]]
    vid_prev = {0: 0}
    for l in range(1, len(nets)):
        cur, prev = nets[l], nets[l - 1]
        # first minimum in ascending point order breaks ties by ingestion order
        near_parent = prev[d[np.ix_(cur, prev)].argmin(axis=1)]
        vid_cur = {}
        for a, c in zip(cur, near_parent):
            v = len(reps)
            vid_cur[int(a)] = v
            levels.append(l)
            reps.append(int(a))
            labels.append(TAU ** l)
            pv = vid_prev[int(c)]
            parents.append(pv)
            children.append([])
            children[pv].append(v)
        vid_prev = vid_cur

    tree = NetTree(n, levels, reps, labels, parents, children, nets=nets, net_radii=radii)
    return assign_partial_boundaries(tree)


def assign_partial_boundaries(tree: NetTree) -> NetTree:
    """Top-down: each child takes its boundary minus its elder siblings'
    boundaries, intersected with the parent's partial boundary."""
    m = tree.n_vertices
    bnd = [None] * m
    tin, tout, order = tree._tour
    is_leaf = np.array([not c for c in tree.children])
    leaf_rep_in_tour = np.where(is_leaf[order], tree.rep[order], -1)
    for v in range(m):
        seg = leaf_rep_in_tour[tin[v]:tout[v] + 1]
        bnd[v] = np.unique(seg[seg >= 0])
    pb = [None] * m
    pb[tree.root] = bnd[tree.root]
    stack = [tree.root]
    while stack:
        u = stack.pop()
        taken = np.array([], dtype=int)
        for c in tree.children[u]:
            own = np.setdiff1d(bnd[c], taken, assume_unique=True)
            pb[c] = np.intersect1d(pb[u], own, assume_unique=True)
            taken = np.union1d(taken, bnd[c])
            stack.append(c)
    tree.pboundary = pb
    return tree


def delta_descendants(tree: NetTree, u: int, delta: float) -> list[int]:
    """The delta-descendants of u (leaves under u once delta is below leaf scale)."""
    lab = tree.label[u]
    if lab <= 0:
        if delta != lab:
            raise ValueError("vertex with zero label only admits delta = label")
        return [u]
    if not 0 < delta <= lab:
        raise ValueError(f"delta must lie in (0, {lab}], got {delta}")
    if delta == lab:
        return [u]
    return tree.descend(u, delta)


def verify_net_tree(tree: NetTree, space: MetricMeasureSpace, kappa: float = KAPPA) -> ValidationReport:
    """Monotone labels, covering and kappa-packing, checked exhaustively."""
    if tree.n_points != space.n or tree.rep.max() >= space.n:
        raise ValueError("net tree was not built over this space")
    rep = ValidationReport()
    d = space.dist
    tin, tout, order = tree._tour
    reps = tree.rep
    for v in range(tree.n_vertices):
        p = tree.parent[v]
        if p >= 0 and tree.label[v] > tree.label[p]:
            rep.add("monotone", (v, int(p)), f"{tree.label[v]} > {tree.label[p]}")
    # covering: every represented point under u within label(u) of rep(u)
    rep_in_tour = reps[order]
    for u in range(tree.n_vertices):
        sub = rep_in_tour[tin[u]:tout[u] + 1]
        far = sub[d[reps[u], sub] > tree.label[u]]
        if far.size:
            rep.add("covering", (u, int(far[0])),
                    f"d={d[reps[u], far[0]]} > label {tree.label[u]}")
    # packing: B°(rep u, label(parent u)/kappa) holds no point represented by
    # a vertex unrelated to u. A vertex w with rep p is unrelated to u iff it
    # is neither an ancestor nor a descendant of u, and then w itself (or any
    # unrelated ancestor of it) witnesses the violation.
    by_point = np.argsort(reps, kind="stable")
    starts = np.searchsorted(reps[by_point], np.arange(space.n + 1))
    for u in range(tree.n_vertices):
        par = tree.parent[u]
        if par < 0:
            continue
        inside = np.flatnonzero(d[reps[u]] < tree.label[par] / kappa)
        if inside.size == 0:
            continue
        ws = np.concatenate([by_point[starts[p]:starts[p + 1]] for p in inside])
        below = (tin[ws] >= tin[u]) & (tin[ws] <= tout[u])
        above = (tin[ws] <= tin[u]) & (tout[ws] >= tout[u])
        bad = ws[~below & ~above]
        if bad.size:
            w = int(bad[0])
            rep.add("packing", (u, w),
                    f"rep {reps[w]} at distance {d[reps[u], reps[w]]} < {tree.label[par] / kappa}")
    return rep


def verify_partial_boundaries(tree: NetTree, space: MetricMeasureSpace, kappa: float = KAPPA) -> ValidationReport:
    """Partition, containment, surjectivity and the packing-ball inclusion."""
    rep = ValidationReport()
    pb = tree.pboundary
    if pb is None:
        rep.add("missing", (), "partial boundaries not assigned")
        return rep
    d = space.dist
    if not np.array_equal(pb[tree.root], np.arange(space.n)):
        rep.add("surjective", (tree.root,), "root partial boundary is not every point")
    leaves = [v for v in range(tree.n_vertices) if not tree.children[v]]
    union = np.sort(np.concatenate([pb[v] for v in leaves]))
    if not np.array_equal(union, np.arange(space.n)):
        rep.add("surjective", (), "leaf partial boundaries do not partition the points")
    for u in range(tree.n_vertices):
        if tree.children[u]:
            joined = np.concatenate([pb[c] for c in tree.children[u]])
            if len(joined) != len(np.unique(joined)) or not np.array_equal(np.sort(joined), pb[u]):
                rep.add("partition", (u,), "children do not partition pb(u)")
        if pb[u].size and d[tree.rep[u], pb[u]].max() > tree.label[u]:
            rep.add("containment", (u,), "pb(u) leaves B(rep u, label u)")
        par = tree.parent[u]
        if par >= 0:
            inside = np.flatnonzero(d[tree.rep[u]] < tree.label[par] / kappa)
            missing = np.setdiff1d(inside, pb[u])
            if missing.size:
                rep.add("packing-ball", (u, int(missing[0])), "open packing ball not inside pb(u)")
    return rep


# ---------------------------------------------------------------------------
# serialization

def net_tree_to_dict(tree: NetTree, space: MetricMeasureSpace | None = None) -> dict:
    ids = space.ids if space is not None else [str(k) for k in range(tree.n_points)]
    verts = []
    for v in range(tree.n_vertices):
        rec = {
            "level": int(tree.level[v]),
            "rep": ids[tree.rep[v]],
            "label": float(tree.label[v]),
            "parent": int(tree.parent[v]) if tree.parent[v] >= 0 else None,
        }
        if tree.pboundary is not None:
            rec["pboundary"] = [ids[p] for p in tree.pboundary[v]]
        verts.append(rec)
    return {"tau": tree.tau, "kappa": tree.kappa, "max_level": tree.max_level,
            "n_points": tree.n_points, "vertices": verts}


def net_tree_from_dict(data: dict, space: MetricMeasureSpace) -> NetTree:
    verts = data["vertices"]
    m = len(verts)
    children: list[list[int]] = [[] for _ in range(m)]
    parent = []
    for v, rec in enumerate(verts):
        p = rec["parent"]
        parent.append(-1 if p is None else int(p))
        if p is not None:
            children[int(p)].append(v)
    tree = NetTree(
        data.get("n_points", space.n),
        [r["level"] for r in verts],
        [space.index(r["rep"]) for r in verts],
        [r["label"] for r in verts],
        parent, children,
        tau=data.get("tau", TAU), kappa=data.get("kappa", KAPPA),
    )
    if all("pboundary" in r for r in verts):
        tree.pboundary = [np.array(sorted(space.index(p) for p in r["pboundary"]), dtype=int)
                          for r in verts]
    return tree
