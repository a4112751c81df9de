"""Balanced trimming of a labeled tree with a sub-additive premeasure.

Starting from ``sigma(root) = xi(root)``, every kept node keeps the fewest
children (largest ``xi`` first) whose ``xi`` reaches its ``sigma`` and hands
``sigma`` down in proportion to ``xi``. The result is additive and stays
within ``[(delta/2) xi, xi]`` when ``xi(ancestor) >= delta xi(descendant)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ADD_RTOL = 1e-12
SUB_RTOL = 1e-9


class TrimError(ValueError):
    def __init__(self, message: str, witness: tuple = ()):
        super().__init__(message)
        self.witness = witness


@dataclass
class WeightedTree:
    """Rooted tree (node 0 is the root) with labels and premeasure ``xi``.

    ``point[v]`` is the point a leaf stands for, or -1.
    """

    parent: list[int]
    children: list[list[int]]
    label: list[float]
    xi: list[float]
    point: list[int]
    rep: list[int] | None = None

    def __post_init__(self):
        self.parent = [int(p) for p in self.parent]
        self.label = [float(x) for x in self.label]
        self.xi = [float(x) for x in self.xi]
        self.point = [int(p) for p in self.point]

    def __len__(self) -> int:
        return len(self.parent)

    def preorder(self, root: int = 0, keep=None) -> list[int]:
        out, stack = [], [root]
        while stack:
            v = stack.pop()
            out.append(v)
            kids = self.children[v] if keep is None else [c for c in self.children[v] if keep[c]]
            stack.extend(reversed(kids))
        return out

    def with_xi(self, xi) -> "WeightedTree":
        return WeightedTree(self.parent, self.children, self.label, list(xi), self.point, self.rep)

    def restrict(self, keep) -> tuple["WeightedTree", np.ndarray]:
        """The subtree on ``keep`` (must contain the root), renumbered in
        preorder; also returns the old index of each new node."""
        order = self.preorder(0, keep)
        new = {v: k for k, v in enumerate(order)}
        parent = [-1 if v == 0 else new[self.parent[v]] for v in order]
        children = [[new[c] for c in self.children[v] if keep[c]] for v in order]
        pick = lambda arr: None if arr is None else [arr[v] for v in order]
        return (WeightedTree(parent, children, pick(self.label), pick(self.xi), pick(self.point),
                             pick(self.rep)), np.array(order))


@dataclass
class TrimmedTree:
    tree: WeightedTree
    kept: np.ndarray  # bool per node
    sigma: np.ndarray  # nan off the kept subtree
    delta_param: float
    selected: dict[int, list[int]] = field(default_factory=dict)  # node -> chosen children

    def kept_nodes(self) -> list[int]:
        return self.tree.preorder(0, self.kept)

    def kept_children(self, v: int) -> list[int]:
        return [c for c in self.tree.children[v] if self.kept[c]]

    def kept_leaves(self) -> list[int]:
        return [v for v in self.kept_nodes() if not self.kept_children(v)]


@dataclass
class SkeletonMeasure:
    points: np.ndarray  # support, sorted point indices
    masses: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return self.points

    def total(self) -> float:
        return float(self.masses.sum())

    def as_dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.points] = self.masses
        return out

    def nu(self, p: int) -> float:
        k = np.searchsorted(self.points, p)
        if k < len(self.points) and self.points[k] == p:
            return float(self.masses[k])
        return 0.0


def _as_weighted(tree) -> WeightedTree:
    return tree if isinstance(tree, WeightedTree) else tree.weighted_tree()


def effective_delta(tree, witness: bool = False):
    """``min(1, xi(a)/xi(d))`` over ancestor/descendant pairs."""
    wt = _as_weighted(tree)
    best, pair = 1.0, None
    # carry (min ancestor xi, which ancestor) down the tree
    stack = [(0, np.inf, -1)]
    while stack:
        v, low, arg = stack.pop()
        x = wt.xi[v]
        if x > 0 and low < np.inf and low / x < best:
            best, pair = low / x, (arg, v)
        nlow, narg = (x, v) if x < low else (low, arg)
        for c in wt.children[v]:
            stack.append((c, nlow, narg))
    return (best, pair) if witness else best


def _check_preconditions(wt: WeightedTree, delta: float) -> None:
    if not 0 < delta <= 1:
        raise TrimError(f"delta must lie in (0, 1], got {delta}")
    eff, pair = effective_delta(wt, witness=True)
    if eff < delta * (1 - ADD_RTOL):
        raise TrimError(f"xi(ancestor) < delta * xi(descendant) at {pair}", pair)
    for v in range(len(wt)):
        kids = wt.children[v]
        if kids and sum(wt.xi[c] for c in kids) < wt.xi[v] * (1 - SUB_RTOL):
            raise TrimError(f"xi is not sub-additive at node {v}", (v,))


def trim_balanced(tree, delta_param: float | None = None) -> TrimmedTree:
    wt = _as_weighted(tree)
    if delta_param is None:
        delta_param = effective_delta(wt)
    _check_preconditions(wt, delta_param)
    m = len(wt)
    kept = np.zeros(m, dtype=bool)
    sigma = np.full(m, np.nan)
    kept[0] = True
    sigma[0] = wt.xi[0]
    selected = {}
    stack = [0]
    while stack:
        u = stack.pop()
        kids = [c for c in wt.children[u] if wt.xi[c] > 0]
        if not kids:
            continue
        kids.sort(key=lambda c: (-wt.xi[c], c))
        target = sigma[u]
        acc, L = 0.0, []
        for c in kids:
            L.append(c)
            acc += wt.xi[c]
            if acc >= target:
                break
        # a shortest prefix of the descending order is minimal under inclusion:
        # dropping any member leaves at most the sum of the first |L|-1 terms
        if len(L) == 1:
            sigma[L[0]] = target
        else:
            for c in L:
                sigma[c] = target * wt.xi[c] / acc
        kept[L] = True
        selected[u] = L
        stack.extend(L)
    return TrimmedTree(wt, kept, sigma, float(delta_param), selected)


def induce_measure(trimmed: TrimmedTree) -> SkeletonMeasure:
    wt = trimmed.tree
    pts, masses = [], []
    for v in trimmed.kept_leaves():
        if wt.point[v] < 0:
            raise ValueError(f"kept leaf {v} does not stand for a single point")
        pts.append(wt.point[v])
        masses.append(trimmed.sigma[v])
    order = np.argsort(pts)
    return SkeletonMeasure(np.array(pts, dtype=int)[order], np.array(masses)[order])


def verify_trim(trimmed: TrimmedTree, add_rtol: float = ADD_RTOL, sub_rtol: float = SUB_RTOL) -> list[str]:
    """Additivity, the ``(delta/2)``-sandwich and minimality of each choice."""
    wt = trimmed.tree
    sig = trimmed.sigma
    delta = trimmed.delta_param
    out = []
    if sig[0] != wt.xi[0]:
        out.append("sigma(root) != xi(root)")
    for v in trimmed.kept_nodes():
        kids = trimmed.kept_children(v)
        if kids:
            total = float(sum(sig[c] for c in kids))
            if abs(total - sig[v]) > add_rtol * abs(sig[v]):
                out.append(f"additivity at {v}: {total} != {sig[v]}")
        if sig[v] > wt.xi[v] * (1 + sub_rtol):
            out.append(f"sigma > xi at {v}")
        if sig[v] < delta / 2 * wt.xi[v] * (1 - sub_rtol):
            out.append(f"sigma < (delta/2) xi at {v}")
    for v, L in trimmed.selected.items():
        if len(L) > 1:
            without = sum(wt.xi[c] for c in L) - min(wt.xi[c] for c in L)
            if without >= sig[v]:
                out.append(f"choice at {v} is not minimal")
    return out


def per_case_bound_failures(trimmed: TrimmedTree, rtol: float = SUB_RTOL) -> list[int]:
    """Nodes breaking the sharper per-case bound: ``sigma >= xi/2`` when
    siblings were kept alongside, ``sigma >= (delta/2) xi`` for an only child."""
    wt = trimmed.tree
    bad = []
    for L in trimmed.selected.values():
        factor = 0.5 if len(L) > 1 else trimmed.delta_param / 2
        bad += [c for c in L if trimmed.sigma[c] < factor * wt.xi[c] * (1 - rtol)]
    return sorted(bad)


# ---------------------------------------------------------------------------
# ultrametric readout

def _leaf_groups(wt: WeightedTree, keep=None):
    """Post-order leaf position lists; returns (points, groups, order)."""
    order = wt.preorder(0, keep)
    kids = (lambda v: wt.children[v]) if keep is None else (lambda v: [c for c in wt.children[v] if keep[c]])
    leaves = [v for v in order if not kids(v) and wt.point[v] >= 0]
    pos = {v: k for k, v in enumerate(leaves)}
    groups: dict[int, list[int]] = {}
    for v in reversed(order):
        if v in pos:
            groups[v] = [pos[v]]
        else:
            groups[v] = [k for c in kids(v) for k in groups.get(c, [])]
    return np.array([wt.point[v] for v in leaves], dtype=int), groups, order, kids


def ultrametric_matrix(tree, keep=None) -> tuple[np.ndarray, np.ndarray]:
    """Leaf points (in tree order) and ``rho[i, j] = label(lca)``."""
    if isinstance(tree, TrimmedTree):
        keep = tree.kept if keep is None else keep
        tree = tree.tree
    wt = _as_weighted(tree)
    pts, groups, order, kids = _leaf_groups(wt, keep)
    rho = np.zeros((len(pts), len(pts)))
    for v in order:
        parts = [groups[c] for c in kids(v) if groups.get(c)]
        for a in range(len(parts)):
            for b in range(a + 1, len(parts)):
                rho[np.ix_(parts[a], parts[b])] = wt.label[v]
                rho[np.ix_(parts[b], parts[a])] = wt.label[v]
    return pts, rho


def ultrametric_of(tree, x: int, y: int) -> float:
    """Label of the lowest common ancestor of the leaves holding x and y."""
    keep = None
    if isinstance(tree, TrimmedTree):
        keep, tree = tree.kept, tree.tree
    wt = _as_weighted(tree)
    owner = {}
    for v in range(len(wt)):
        if wt.point[v] >= 0 and not any(keep is None or keep[c] for c in wt.children[v]):
            if keep is None or keep[v]:
                owner[wt.point[v]] = v
    if x not in owner or y not in owner:
        raise KeyError("point not in the tree's support")
    if x == y:
        return 0.0
    seen = set()
    v = owner[x]
    while v >= 0:
        seen.add(v)
        v = wt.parent[v]
    v = owner[y]
    while v not in seen:
        v = wt.parent[v]
    return wt.label[v]


def to_newick(tree, ids=None, keep=None) -> str:
    """Newick string; branch lengths are half label drops so leaf-to-leaf path
    length equals the ultrametric, and each node carries ``[&Delta=...]``."""
    if isinstance(tree, TrimmedTree):
        keep = tree.kept if keep is None else keep
        tree = tree.tree
    wt = _as_weighted(tree)
    name = (lambda p: str(p)) if ids is None else (lambda p: str(ids[p]))
    kids = (lambda v: wt.children[v]) if keep is None else (lambda v: [c for c in wt.children[v] if keep[c]])
    text: dict[int, str] = {}
    for v in reversed(wt.preorder(0, keep)):
        ch = kids(v)
        lab = wt.label[v] if ch else 0.0
        body = "(" + ",".join(text.pop(c) for c in ch) + ")" if ch else name(wt.point[v])
        ann = f"[&Delta={lab!r}]"
        if v == 0:
            text[v] = f"{body}{ann}"
        else:
            text[v] = f"{body}:{(wt.label[wt.parent[v]] - lab) / 2!r}{ann}"
    return text[0] + ";"
