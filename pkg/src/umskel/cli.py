"""Command line entry point: generate, skeleton, extract, verify, report."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .generators import FAMILIES, GeneratorSpec
from .metric import MetricMeasureSpace, validate_metric
from .nettree import net_tree_from_dict, net_tree_to_dict
from .pipeline import (DEFAULT_TOLERANCE, ExtractionReport, distortion_of, dvoretzky_extract,
                       um_skeleton, verify_growth, verify_shrink)
from .skeleton import verify_skeleton
from .ramsey import RamseyError
from .trim import TrimError, TrimmedTree, induce_measure, ultrametric_matrix, verify_trim

OK, FAILED, INVALID = 0, 1, 2
MEASURE_RTOL = 1e-12


class InputError(Exception):
    pass


def _load_space(path) -> MetricMeasureSpace:
    try:
        space = io.read_space(path)
    except (OSError, ValueError, KeyError, IndexError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    bad = validate_metric(space)
    if not bad.ok:
        raise InputError(f"{path} is not a metric: {bad}")
    return space


def _write_run(out: Path, space, report: ExtractionReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ids = space.ids
    io.dump_json(io.space_to_dict(space), out / "space.json")
    io.dump_json(net_tree_to_dict(report.skeleton.net_tree, space), out / "nettree.json")
    io.dump_json({"skeleton": report.skeleton.to_dict(),
                  "trimmed": io.trimmed_to_dict(report.trimmed, ids)}, out / "tree.json")
    # measure.json always holds the skeleton measure (sigma on kept leaves)
    io.dump_json(io.measure_to_dict(induce_measure(report.trimmed), ids), out / "measure.json")
    if report.trimmed_beta is not None:
        io.dump_json({"trimmed": io.trimmed_to_dict(report.trimmed_beta, ids),
                      "alpha_prime": report.alpha_prime, "beta": report.beta},
                     out / "beta_tree.json")
        io.dump_json(io.measure_to_dict(report.measure, ids), out / "subset_measure.json")
    io.write_newick(report.trimmed, ids, out / "ultrametric.nwk")
    io.dump_json(report.to_dict(ids), out / "report.json")


def _summary_line(report: ExtractionReport) -> str:
    g, s = report.growth_check, report.shrink_check
    parts = [f"t={report.t}", f"|S|={len(report.subset)}", f"distortion={report.distortion:.4g}",
             f"bound={16 * report.t}", f"lambda_hat={report.lambda_hat}"]
    if g is not None:
        parts.append(f"growth {len(g) - g.n_failed()}/{len(g)}")
    if s is not None:
        parts.append(f"shrink {len(s) - s.n_failed()}/{len(s)}")
    if report.regularity is not None:
        parts.append(f"fitted exponent={report.regularity.alpha:.4f} (target {report.target_exponent:.4f})")
    parts.append("OK" if report.ok else "FAILED")
    return "  ".join(parts)


# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    family = args.family
    if family is None:
        raise InputError("--family is required")
    resolution = args.side if family == "grid" else args.n
    spec = GeneratorSpec(family, level=args.level, resolution=resolution or 1,
                         dimension=args.dimension, seed=args.seed, ratio=args.ratio)
    try:
        space = spec.build()
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.output is None:
        raise InputError("-o/--output is required")
    io.write_space(space, args.output)
    print(f"wrote {space.n} points ({space.name}) to {args.output}")
    return OK


def _check_t(t: int) -> None:
    if t < 2:
        raise InputError("t must be >= 2")


def cmd_skeleton(args) -> int:
    _check_t(args.t)
    space = _load_space(args.input)
    _, _, report = um_skeleton(space, args.t, delta_mode=args.delta_mode,
                               concentric_probe=args.concentric_probe)
    _write_run(Path(args.output), space, report)
    print(_summary_line(report))
    return OK if report.ok else FAILED


def cmd_extract(args) -> int:
    space = _load_space(args.input)
    if args.beta is None:
        raise InputError("--beta is required")
    if args.alpha is not None and not 0 < args.beta < args.alpha:
        raise InputError("need 0 < beta < alpha")
    report = dvoretzky_extract(space, args.alpha, args.beta, tolerance=args.tolerance,
                               delta_mode=args.delta_mode, concentric_probe=args.concentric_probe)
    _write_run(Path(args.output), space, report)
    print(_summary_line(report))
    if report.regularity_ok is False:
        print(f"note: fitted exponent is outside +-{args.tolerance} of beta")
    return OK if report.ok else FAILED


def verify_run(folder: Path) -> tuple[list[str], ExtractionReport | None]:
    """Re-run every check on stored artifacts; returns named failures."""
    space = _load_space(folder / "space.json")
    stored = io.load_json(folder / "report.json")
    t = int(stored["t"])
    net = net_tree_from_dict(io.load_json(folder / "nettree.json"), space)
    trees = io.load_json(folder / "tree.json")
    skel = io.skeleton_from_dict(trees["skeleton"], space, net)
    trimmed = io.trimmed_from_dict(trees["trimmed"], space)
    measure = io.measure_from_dict(io.load_json(folder / "measure.json"), space)
    lam = int(stored["lambda_hat"])
    failures = []
    for v in verify_skeleton(skel, lam).violations:
        failures.append(f"skeleton {v.kind} at {v.witness}: {v.detail}")
    failures += [f"trim: {msg}" for msg in verify_trim(trimmed)]
    failures += _measure_vs_sigma(trimmed, measure, space)
    pts, rho = ultrametric_matrix(trimmed)
    d = space.dist[np.ix_(pts, pts)]
    off = ~np.eye(len(pts), dtype=bool)
    if np.any(rho[off] < d[off] * (1 - MEASURE_RTOL)):
        failures.append("distortion: rho < d for some pair")
    if np.any(rho[off] > 16 * t * d[off]):
        failures.append(f"distortion: rho > {16 * t} d for some pair")
    report = ExtractionReport(pts, measure, distortion_of(space, pts, rho), t, lam,
                              delta_param=trimmed.delta_param, skeleton=skel, trimmed=trimmed)
    report.growth_check = verify_growth(space, report, t)
    report.shrink_check = verify_shrink(space, report, t)
    for tab, name in ((report.growth_check, "growth inequality nu(B(x,r)) <= lambda^(2/t) w(B(x,(32t+1)r))^(1-1/t)"),
                      (report.shrink_check, "shrink inequality nu(B(y,r)) >= lambda^(-2/t)/2 w(B(x',r/(5120t)))^(1-1/t)")):
        if not tab.ok:
            failures.append(f"{name}: {tab.n_failed()} failing rows, first {tab.failures(space.ids, 1)[0]}")
    if (folder / "beta_tree.json").exists():
        beta = io.load_json(folder / "beta_tree.json")
        bt = io.trimmed_from_dict(beta["trimmed"], space)
        failures += [f"beta trim: {msg}" for msg in verify_trim(bt)]
        sub = io.measure_from_dict(io.load_json(folder / "subset_measure.json"), space)
        failures += [f"beta {m}" for m in _measure_vs_sigma(bt, sub, space)]
    return failures, report


def _measure_vs_sigma(trimmed: TrimmedTree, measure, space) -> list[str]:
    out = []
    wt = trimmed.tree
    expect = {wt.point[v]: float(trimmed.sigma[v]) for v in trimmed.kept_leaves()}
    got = dict(zip(measure.points.tolist(), measure.masses.tolist()))
    for p in sorted(set(expect) | set(got)):
        a, b = expect.get(p, 0.0), got.get(p, 0.0)
        if abs(a - b) > MEASURE_RTOL * max(abs(a), abs(b)):
            out.append(f"measure-sigma consistency: nu({space.ids[p]})={b} but sigma(leaf)={a}")
    return out


def cmd_verify(args) -> int:
    folder = Path(args.input)
    if not (folder / "report.json").exists():
        raise InputError(f"{folder} holds no run artifacts")
    try:
        failures, _ = verify_run(folder)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed artifacts in {folder}: {exc}") from exc
    for line in failures:
        print("FAIL", line)
    print("verification passed" if not failures else f"{len(failures)} verification failure(s)")
    return OK if not failures else FAILED


def cmd_report(args) -> int:
    folder = Path(args.input)
    if not (folder / "report.json").exists():
        raise InputError(f"{folder} holds no run artifacts")
    stored = io.load_json(folder / "report.json")
    out = Path(args.output) if args.output else folder
    out.mkdir(parents=True, exist_ok=True)
    failures, report = verify_run(folder)
    space = _load_space(folder / "space.json")
    report.growth_check.to_csv(out / "growth.csv", space.ids)
    report.shrink_check.to_csv(out / "shrink.csv", space.ids)
    with open(out / "nodes.csv", "w") as fh:
        fh.write("node,parent,label,scale,xi,n_tilde,n_cluster,dead\n")
        for u in report.skeleton.nodes:
            fh.write(f"{u.index},{'' if u.parent is None else u.parent},{u.label!r},{u.scale!r},"
                     f"{u.xi!r},{len(u.tilde_cluster)},{len(u.cluster)},{u.dead}\n")
    lines = [
        f"space: {space.name or folder} ({space.n} points, scale factor {space.scale_factor:g})",
        f"t = {stored['t']}, lambda_hat = {stored['lambda_hat']}, delta = {stored['delta_param']:.4g}",
        f"subset size {len(stored['subset'])}, distortion {stored['distortion']:.4g} (bound {stored['distortion_bound']})",
        f"skeleton nodes {len(report.skeleton.nodes)}, kept {int(report.trimmed.kept.sum())}",
        f"growth rows {len(report.growth_check)}, failed {report.growth_check.n_failed()}",
        f"shrink rows {len(report.shrink_check)}, failed {report.shrink_check.n_failed()}",
    ]
    if stored.get("regularity"):
        reg = stored["regularity"]
        lines.append(f"fitted exponent {reg['alpha']:.4f} over [{reg['fit_range'][0]:.3g}, "
                     f"{reg['fit_range'][1]:.3g}], c in [{reg['c_lower']:.3g}, {reg['c_upper']:.3g}]")
        if stored.get("target_exponent") is not None:
            lines.append(f"target {stored['target_exponent']:.4f} +- {stored['tolerance']}: "
                         f"{'within' if stored['regularity_ok'] else 'outside'}")
    if stored.get("concentric_pass_rate") is not None:
        lines.append(f"concentric probe pass rate {stored['concentric_pass_rate']:.4f}")
    lines.append("verification: " + ("passed" if not failures else f"{len(failures)} failure(s)"))
    text = "\n".join(lines)
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    return OK if not failures else FAILED


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umskel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("-i", "--input", required=True)
        p.add_argument("-o", "--output")

    g = sub.add_parser("generate", help="write a generated instance")
    common(g, needs_input=False)
    g.add_argument("--family", choices=FAMILIES)
    g.add_argument("--level", type=int, default=0)
    g.add_argument("--side", type=int, default=8, help="grid points per axis")
    g.add_argument("--dimension", type=int, default=1)
    g.add_argument("--n", type=int, default=100, help="random-doubling point count")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ratio", type=float, default=1 / 3)

    for name, helptext in (("skeleton", "ultrametric skeleton with checks"),
                           ("extract", "beta-regular subset extraction")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("-t", "--t", type=int, default=2)
        p.add_argument("--delta-mode", choices=("effective", "lambda"), default="effective")
        p.add_argument("--concentric-probe", action="store_true")
        p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
        if name == "extract":
            p.add_argument("--alpha", type=float)
            p.add_argument("--beta", type=float)

    v = sub.add_parser("verify", help="re-run every check on stored artifacts")
    common(v)
    r = sub.add_parser("report", help="text summary and CSV tables")
    common(r)
    return parser


COMMANDS = {"generate": cmd_generate, "skeleton": cmd_skeleton, "extract": cmd_extract,
            "verify": cmd_verify, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    if getattr(args, "output", None) is None and args.command in ("skeleton", "extract"):
        parser.error("-o/--output is required")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID
    except (RamseyError, TrimError):
        raise  # internal invariant breaks are bugs, not bad input
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID


if __name__ == "__main__":
    sys.exit(main())
