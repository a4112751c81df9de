"""The skeleton hierarchy: nested clusters split by repeated Ramsey steps.

Each node holds a set of net-tree vertices (its tilde-cluster); the points in
their partial boundaries form the cluster ``C_u``. Above a singleton, the
tilde-cluster is re-expressed at scale ``s_u`` and split with one Ramsey step,
and the node's premeasure ``xi`` is its mass divided by the ``1/t``-th power of
the local ``mu^Delta`` functional.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metric import MetricMeasureSpace, ValidationReport, doubling_upper, mu_delta_local
from .nettree import NetTree
from .ramsey import RamseyError, check_local, decompose_local

BALL_CONST = 1 / 5120  # B(rep u, c Delta(parent)/t) must lie inside C_u
XI_RTOL = 1e-9


@dataclass
class SkeletonNode:
    index: int
    tilde_cluster: np.ndarray  # net-tree vertices
    cluster: np.ndarray  # point indices, sorted
    label: float
    scale: float
    rep: int  # point index
    rep_vertex: int
    xi: float
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    depth: int = 0
    dead: bool = False  # positive diameter but no mass: never split

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def summary(self) -> dict:
        return {"index": self.index, "label": self.label, "scale": self.scale, "xi": self.xi,
                "n_tilde": int(len(self.tilde_cluster)), "n_cluster": int(len(self.cluster)),
                "rep": self.rep, "parent": self.parent, "children": list(self.children),
                "dead": self.dead}


@dataclass
class SkeletonTree:
    nodes: list[SkeletonNode]
    t: int
    space: MetricMeasureSpace
    net_tree: NetTree
    lambda_hat: int | None = None

    @property
    def root(self) -> SkeletonNode:
        return self.nodes[0]

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> list[SkeletonNode]:
        return [u for u in self.nodes if u.is_leaf]

    def ensure_lambda(self) -> int:
        if self.lambda_hat is None:
            self.lambda_hat = doubling_upper(self.space)
        return self.lambda_hat

    def weighted_tree(self):
        from .trim import WeightedTree

        parent = [-1 if u.parent is None else u.parent for u in self.nodes]
        point = [int(u.cluster[0]) if (u.is_leaf and len(u.cluster) == 1) else -1 for u in self.nodes]
        return WeightedTree(parent, [list(u.children) for u in self.nodes],
                            [u.label for u in self.nodes], [u.xi for u in self.nodes], point,
                            rep=[u.rep for u in self.nodes])

    def to_dict(self) -> dict:
        ids = self.space.ids
        return {
            "t": self.t,
            "lambda_hat": self.lambda_hat,
            "nodes": [{
                "parent": u.parent,
                "label": u.label,
                "scale": u.scale,
                "xi": u.xi,
                "rep": ids[u.rep],
                "rep_vertex": u.rep_vertex,
                "tilde_cluster": [int(v) for v in u.tilde_cluster],
                "cluster": [ids[p] for p in u.cluster],
                "dead": u.dead,
            } for u in self.nodes],
        }


def scale_of(label: float, t: int) -> float:
    """``4^floor(log4 label) / (64 t)`` by exact powers of four."""
    if label <= 0:
        return 0.0
    p = 1.0
    while p > label:
        p /= 4
    while p * 4 <= label:
        p *= 4
    return p / (64 * t)


def _cluster_of(net: NetTree, tilde) -> np.ndarray:
    return np.sort(np.concatenate([net.pboundary[v] for v in tilde]))


def _diameter(d: np.ndarray, pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    sub = d[np.ix_(pts, pts)]
    return float(sub.max())


def _pick_rep(net: NetTree, w: np.ndarray, tilde) -> int:
    """Member vertex with the most partial-boundary mass; ties to the lowest point."""
    best = None
    for v in tilde:
        key = (-float(w[net.pboundary[v]].sum()), int(net.rep[v]))
        if best is None or key < best[0]:
            best = (key, v)
    return int(best[1])


def build_skeleton(space: MetricMeasureSpace, net_tree: NetTree, t: int) -> SkeletonTree:
    if int(t) != t or t < 2:
        raise ValueError("t must be an integer >= 2")
    t = int(t)
    if net_tree.pboundary is None:
        raise ValueError("net tree has no partial boundaries")
    if net_tree.n_points != space.n:
        raise ValueError("net tree was not built over this space")
    d = space.dist
    w = space.weights
    net = net_tree
    nodes: list[SkeletonNode] = []

    def make(tilde, parent, depth, rep_vertex):
        tilde = np.asarray(sorted(int(v) for v in tilde), dtype=int)
        C = _cluster_of(net, tilde)
        label = _diameter(d, C)
        mass = float(w[C].sum())
        node = SkeletonNode(len(nodes), tilde, C, label, scale_of(label, t),
                            int(net.rep[rep_vertex]), int(rep_vertex), 0.0, parent, [], depth)
        if label == 0.0:
            node.xi = mass ** (1 - 1 / t)
        elif mass == 0.0:
            node.dead = True
        nodes.append(node)
        if parent is not None:
            nodes[parent].children.append(node.index)
        return node

    root = make([net.root], None, 0, net.root)
    stack = [root.index]
    while stack:
        u = nodes[stack.pop()]
        if u.label == 0.0 or u.dead:
            continue
        s = u.scale
        ztil = []
        for v in u.tilde_cluster:
            ztil.extend(net.descend(int(v), s))
        ztil = np.array(sorted(ztil), dtype=int)
        reps = net.rep[ztil]
        dl = d[np.ix_(reps, reps)]
        wl = np.array([w[net.pboundary[v]].sum() for v in ztil])
        big = u.label + 12 * s
        if len(ztil) < 2 or not big < 2 * float(dl.max()):
            raise RamseyError(f"skeleton node {u.index}: projected instance violates the split preconditions")
        P, Q, Qbar, _, _, _, _ = decompose_local(dl, wl, big, t)
        problems = check_local(dl, wl, big, t, P, Q, Qbar)
        if problems:
            raise AssertionError(f"skeleton node {u.index}: " + "; ".join(problems))
        u.xi = float(w[u.cluster].sum()) / mu_delta_local(dl, wl, big) ** (1 / t)
        kids = []
        for part in (P, Q):
            tilde = ztil[part]
            kids.append(make(tilde, u.index, u.depth + 1, _pick_rep(net, w, tilde)))
        # push right first so the left subtree is numbered first
        stack.extend(k.index for k in reversed(kids))
    return SkeletonTree(nodes, t, space, net_tree)


# ---------------------------------------------------------------------------

def verify_skeleton(tree: SkeletonTree, lambda_hat: int | None = None,
                    ball_const: float = BALL_CONST, rtol: float = XI_RTOL) -> ValidationReport:
    """Structural checks plus separation, ball inclusion, sub-additivity and
    the ``xi`` sandwich ``w(C)^(1-1/t) <= xi <= lambda^(2/t) w(C)^(1-1/t)``."""
    rep = ValidationReport()
    space, t = tree.space, tree.t
    d = space.dist
    w = space.weights
    lam = tree.ensure_lambda() if lambda_hat is None else lambda_hat
    nodes = tree.nodes
    if not np.array_equal(tree.root.cluster, np.arange(space.n)):
        rep.add("root", (0,), "root cluster is not the whole space")
    for u in nodes:
        C = u.cluster
        if _diameter(d, C) != u.label:
            rep.add("label", (u.index,), f"label {u.label} != diameter {_diameter(d, C)}")
        if u.scale != scale_of(u.label, t):
            rep.add("scale", (u.index,), f"scale {u.scale}")
        joined = _cluster_of(tree.net_tree, u.tilde_cluster)
        if not np.array_equal(joined, C) or len(np.unique(joined)) != len(joined):
            rep.add("cluster", (u.index,), "cluster is not the disjoint union of partial boundaries")
        if u.is_leaf and not u.dead and len(C) != 1:
            rep.add("leaf", (u.index,), "leaf cluster is not a singleton")
        if u.parent is not None:
            par = nodes[u.parent]
            if not np.all(np.isin(C, par.cluster)):
                rep.add("nested", (u.index, par.index), "cluster escapes its parent")
            radius = ball_const * par.label / t
            inside = np.flatnonzero(d[u.rep] <= radius)
            missing = np.setdiff1d(inside, C)
            if missing.size:
                rep.add("ball", (u.index, int(missing[0])),
                        f"B(rep, {radius}) holds point {space.ids[missing[0]]} outside the cluster")
        # separation between sibling clusters; every unrelated pair of nodes
        # sits inside some sibling pair, with the same lowest common ancestor
        if len(u.children) > 1:
            need = u.label / (16 * t)
            kids = [nodes[c] for c in u.children]
            for a in range(len(kids)):
                for b in range(a + 1, len(kids)):
                    gap = float(d[np.ix_(kids[a].cluster, kids[b].cluster)].min())
                    if gap < need:
                        rep.add("separation", (kids[a].index, kids[b].index), f"d={gap} < {need}")
        if u.children:
            total = sum(nodes[c].xi for c in u.children)
            if u.xi > total * (1 + rtol):
                rep.add("subadditive", (u.index,), f"xi={u.xi} > sum over children {total}")
        base = float(w[C].sum()) ** (1 - 1 / t)
        if u.xi < base * (1 - rtol):
            rep.add("xi-lower", (u.index,), f"xi={u.xi} < {base}")
        if u.xi > lam ** (2 / t) * base * (1 + rtol):
            rep.add("xi-upper", (u.index,), f"xi={u.xi} > {lam ** (2 / t) * base}")
    return rep


def skeleton_ultrametric(tree: SkeletonTree) -> tuple[np.ndarray, np.ndarray]:
    """Leaf points and the matrix of lca labels between them."""
    from .trim import ultrametric_matrix

    return ultrametric_matrix(tree.weighted_tree())
