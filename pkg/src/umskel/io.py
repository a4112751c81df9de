"""Readers and writers: CSV/JSON point sets, JSON artifacts, Newick trees."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .metric import MetricMeasureSpace
from .nettree import NetTree, net_tree_from_dict, net_tree_to_dict
from .skeleton import SkeletonNode, SkeletonTree
from .trim import SkeletonMeasure, TrimmedTree, WeightedTree, to_newick

DENSE_LIMIT = 5000  # largest n for which coordinate files also carry the matrix


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# point sets

def space_to_dict(space: MetricMeasureSpace) -> dict:
    out = {"name": space.name, "ids": list(space.ids), "weights": space.weights.tolist()}
    if space.coords is not None:
        out["coords"] = space.coords.tolist()
    if space.coords is None or space.n <= DENSE_LIMIT:
        out["dist"] = space.dist.tolist()
        out["scale_factor"] = space.scale_factor
    return out


def space_from_dict(data: dict) -> MetricMeasureSpace:
    for key in ("ids", "weights"):
        if key not in data:
            raise ValueError(f"point-set JSON lacks {key!r}")
    name = data.get("name", "")
    if "coords" in data:
        space = MetricMeasureSpace.from_coords(np.array(data["coords"], dtype=float), data["weights"],
                                               data["ids"], name=name)
        if "dist" in data and len(data["dist"]) == space.n:
            space._dist = np.array(data["dist"], dtype=float)
            space._scale = float(data["scale_factor"])
        return space
    if "dist" not in data:
        raise ValueError("point-set JSON needs 'dist' or 'coords'")
    return MetricMeasureSpace.from_matrix(data["dist"], data["weights"], data["ids"], name=name,
                                          scale_factor=data.get("scale_factor"))


def write_space(space: MetricMeasureSpace, path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        if space.coords is None:
            raise ValueError("CSV output needs coordinates")
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            dim = space.coords.shape[1]
            out.writerow(["id", *[f"x{k}" for k in range(dim)], "weight"])
            for pid, row, w in zip(space.ids, space.coords, space.weights):
                out.writerow([pid, *[repr(float(v)) for v in row], repr(float(w))])
    else:
        dump_json(space_to_dict(space), path)


def read_space(path) -> MetricMeasureSpace:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0] != "id" or rows[0][-1] != "weight":
            raise ValueError("CSV header must be id,x0,...,weight")
        body = [r for r in rows[1:] if r]
        ids = [r[0] for r in body]
        coords = np.array([[float(v) for v in r[1:-1]] for r in body])
        weights = np.array([float(r[-1]) for r in body])
        return MetricMeasureSpace.from_coords(coords, weights, ids, name=path.stem)
    return space_from_dict(load_json(path))


# ---------------------------------------------------------------------------
# trees and measures

def trimmed_to_dict(trimmed: TrimmedTree, ids) -> dict:
    wt = trimmed.tree
    nodes = []
    for v in range(len(wt)):
        nodes.append({
            "parent": wt.parent[v] if wt.parent[v] >= 0 else None,
            "label": wt.label[v],
            "xi": wt.xi[v],
            "point": ids[wt.point[v]] if wt.point[v] >= 0 else None,
            "rep": ids[wt.rep[v]] if wt.rep is not None else None,
            "kept": bool(trimmed.kept[v]),
            "sigma": None if np.isnan(trimmed.sigma[v]) else float(trimmed.sigma[v]),
        })
    return {"delta_param": trimmed.delta_param, "nodes": nodes,
            "selected": {str(k): v for k, v in sorted(trimmed.selected.items())}}


def trimmed_from_dict(data: dict, space: MetricMeasureSpace) -> TrimmedTree:
    nodes = data["nodes"]
    m = len(nodes)
    children = [[] for _ in range(m)]
    for v, rec in enumerate(nodes):
        if rec["parent"] is not None:
            children[rec["parent"]].append(v)
    pt = lambda p: -1 if p is None else space.index(p)
    wt = WeightedTree([-1 if r["parent"] is None else r["parent"] for r in nodes], children,
                      [r["label"] for r in nodes], [r["xi"] for r in nodes],
                      [pt(r["point"]) for r in nodes],
                      rep=[pt(r["rep"]) for r in nodes] if nodes and nodes[0]["rep"] is not None else None)
    kept = np.array([r["kept"] for r in nodes], dtype=bool)
    sigma = np.array([np.nan if r["sigma"] is None else r["sigma"] for r in nodes], dtype=float)
    selected = {int(k): list(v) for k, v in data.get("selected", {}).items()}
    return TrimmedTree(wt, kept, sigma, float(data["delta_param"]), selected)


def measure_to_dict(measure: SkeletonMeasure, ids) -> dict:
    return {"support": [ids[p] for p in measure.points],
            "nu": {ids[p]: float(m) for p, m in zip(measure.points, measure.masses)},
            "total": measure.total()}


def measure_from_dict(data: dict, space: MetricMeasureSpace) -> SkeletonMeasure:
    nu = data["nu"]
    pts = np.array([space.index(p) for p in nu], dtype=int)
    masses = np.array([float(v) for v in nu.values()])
    order = np.argsort(pts)
    return SkeletonMeasure(pts[order], masses[order])


def skeleton_from_dict(data: dict, space: MetricMeasureSpace, net: NetTree) -> SkeletonTree:
    nodes = []
    for k, rec in enumerate(data["nodes"]):
        nodes.append(SkeletonNode(
            k, np.array(rec["tilde_cluster"], dtype=int),
            np.array(sorted(space.index(p) for p in rec["cluster"]), dtype=int),
            rec["label"], rec["scale"], space.index(rec["rep"]), rec["rep_vertex"], rec["xi"],
            rec["parent"], [], 0, rec.get("dead", False)))
    for u in nodes:
        if u.parent is not None:
            nodes[u.parent].children.append(u.index)
            u.depth = nodes[u.parent].depth + 1
    return SkeletonTree(nodes, int(data["t"]), space, net, data.get("lambda_hat"))


def write_newick(trimmed: TrimmedTree, ids, path) -> None:
    Path(path).write_text(to_newick(trimmed, ids) + "\n")


__all__ = [
    "dump_json", "load_json", "space_to_dict", "space_from_dict", "write_space", "read_space",
    "trimmed_to_dict", "trimmed_from_dict", "measure_to_dict", "measure_from_dict",
    "skeleton_from_dict", "net_tree_to_dict", "net_tree_from_dict", "write_newick",
]
