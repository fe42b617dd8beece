"""Command-line driver: single runs, convergence sweeps, local studies, timing."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import studies
from .march import march
from .metrics import (count_components, error_report, evenness_histogram, point_error,
                      valid_mask)
from .speeds import ALIASES, REGISTRY, get_field


def fmt(x) -> str:
    """Float with 17 significant digits (round-trips exactly)."""
    return f"{x:.17g}"


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def write_points(path: Path, graph, field) -> None:
    ok = valid_mask(graph.points, field)
    err = np.full(len(graph), np.nan)
    if ok.any():
        err[ok] = point_error(graph.points[ok], field)
    with open(path, "w") as fh:
        fh.write("id,x,y,t,nu1,nu2,nu3,parent_a,parent_b,E_p\n")
        for k in range(len(graph)):
            p, n = graph.points[k], graph.normals[k]
            pa, pb = (int(v) + 1 for v in graph.parents[k])
            e = "" if np.isnan(err[k]) else fmt(err[k])
            fh.write(",".join([str(k + 1), *map(fmt, p), *map(fmt, n), str(pa), str(pb), e]) + "\n")


def write_segments(path: Path, graph) -> None:
    """Band snapshots: one row per segment, with both endpoints spelled out.

    Endpoint ids refer to the points file (0 when the point was later
    removed from the band without being accepted).
    """
    index = {int(i): k + 1 for k, i in enumerate(graph.accepted_ids)}
    P = graph.all_points
    with open(path, "w") as fh:
        fh.write("snapshot,t_snapshot,id_a,id_b,x_a,y_a,t_a,x_b,y_b,t_b\n")
        for s, (t, segs) in enumerate(graph.snapshots):
            for a, b in segs:
                fh.write(",".join([str(s), fmt(t), str(index.get(a, 0)), str(index.get(b, 0)),
                                   *map(fmt, P[a]), *map(fmt, P[b])]) + "\n")


def write_histogram(path: Path, graph) -> None:
    hist = evenness_histogram(graph)
    e = hist["edges"]
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,parent_a,parent_b\n")
        for k in range(len(e) - 1):
            fh.write(f"{fmt(e[k])},{fmt(e[k + 1])},{hist['parent_a'][k]},{hist['parent_b'][k]}\n")


def cmd_run(args) -> int:
    field = get_field(args.example)
    ft = field.final_time if args.final_time is None else args.final_time
    m = field.default_m if args.m is None else args.m
    t_H = field.t_h if args.t_h is None else args.t_h
    snaps = tuple(np.round(np.linspace(0.0, ft, 11), 12)) + (t_H,)
    graph = march(field, m, ft, L=args.L, grid_s=args.grid_s, snapshot_times=snaps)
    rep = error_report(graph, field, t_H)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_points(out / "points.csv", graph, field)
    write_segments(out / "segments.csv", graph)
    write_histogram(out / "histogram.csv", graph)
    summary = {
        "example": field.name, "m": m, "h": graph.h, "final_time": ft,
        "N": len(graph), "max_band": graph.max_band, "discarded": graph.discarded,
        "iterations": graph.iterations,
        "L1": rep.L1, "L2": rep.L2, "Linf": rep.Linf, "t_H": t_H, "L_H": rep.L_H,
        "components_at_t_H": count_components(graph, t_H),
        "no_child": graph.stats["no_child"], "pb_retries": graph.stats["pb_retries"],
        "iterative_fallbacks": graph.stats["iter_fallback"],
        "max_solver_iterations": max(graph.stats["solver_iterations"] or [0]),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    # timings vary between runs, so they live apart from the reproducible outputs
    (out / "timing.json").write_text(json.dumps({"wall_time": graph.wall_time}) + "\n")
    print(f"{field.name}: N = {len(graph)}, h = {graph.h:.6g}, L1 = {rep.L1:.3e}, "
          f"Linf = {rep.Linf:.3e}, L_H = {rep.L_H:.3e}, wall time {graph.wall_time:.2f} s")
    return 0


def cmd_converge(args) -> int:
    ms = args.sweep or list(studies.SWEEP_MS)
    rep = studies.converge_study(args.example, ms, args.final_time, args.t_h,
                                 workers=args.workers, L=args.L, grid_s=args.grid_s)
    lines = ["m,h,N,L1,L2,Linf,L_H,max_band,wall_time"]
    for r in rep.rows:
        lines.append(",".join([str(r.m), fmt(r.h), str(r.n_points), fmt(r.L1), fmt(r.L2),
                               fmt(r.Linf), fmt(r.L_H), str(r.max_band), fmt(r.wall_time)]))
    table = "\n".join(lines) + "\n"
    slopes = "\n".join(f"slope {k} {fmt(v)}" for k, v in rep.slopes.items()) + "\n"
    _emit(args.out, "convergence.csv", table + slopes)
    return 0


def cmd_local(args) -> int:
    hs = args.hs or list(studies.LOCAL_HS)
    rep = studies.local_study(args.example, hs)
    lines = ["h,direct_error,iterative_error,iterations"]
    for r in rep.rows:
        lines.append(f"{fmt(r.h)},{fmt(r.direct_error)},{fmt(r.iterative_error)},{r.iterations}")
    lines.append(f"slope direct {fmt(rep.direct_slope)}")
    lines.append(f"slope iterative {fmt(rep.iterative_slope)}")
    _emit(args.out, "local.csv", "\n".join(lines) + "\n")
    return 0


def cmd_speedtest(args) -> int:
    ms = args.sweep or list(studies.SWEEP_MS)
    rows = studies.speed_test(ms)
    lines = ["method,example,resolution,wall_time,L1"]
    for r in rows:
        lines.append(f"{r.method},{r.example},{fmt(r.resolution)},{fmt(r.wall_time)},{fmt(r.L1)}")
    for (method, ex), s in studies.timing_slopes(rows).items():
        lines.append(f"slope {method} {ex} {fmt(s)}")
    lines.append(f"marcher faster at the highest common accuracy: {studies.faster_at_high_accuracy(rows)}")
    _emit(args.out, "timing.csv", "\n".join(lines) + "\n")
    return 0


def _emit(out, name, text) -> None:
    sys.stdout.write(text)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    names = sorted(REGISTRY) + sorted(ALIASES)
    parser = argparse.ArgumentParser(prog="frontmarch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, example_default="expanding"):
        p.add_argument("--example", default=example_default, choices=names)
        p.add_argument("--out", default=None, help="output directory")

    def run_opts(p):
        p.add_argument("--final-time", type=float, default=None)
        p.add_argument("--t-h", type=float, default=None, help="time of the Hausdorff check")
        p.add_argument("--L", type=int, default=10, help="neighbourhood size")
        p.add_argument("--grid-s", type=int, default=10, help="grid nodes per axis")

    p = sub.add_parser("run", help="march one example and write its outputs")
    common(p)
    run_opts(p)
    p.add_argument("--m", type=int, default=None, help="initial points per circle")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("converge", help="global convergence sweep over m")
    common(p, "escaping")
    run_opts(p)
    p.add_argument("--sweep", type=_int_list, default=None, help="comma separated m values")
    p.add_argument("--workers", type=int, default=1, help="runs executed in parallel")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("local", help="local solver accuracy over h")
    common(p)
    p.add_argument("--sweep", dest="hs", type=_float_list, default=None,
                   help="comma separated h values")
    p.set_defaults(func=cmd_local)

    p = sub.add_parser("speedtest", help="timing against the grid baseline")
    p.add_argument("--out", default=None)
    p.add_argument("--sweep", type=_int_list, default=None, help="comma separated m values")
    p.set_defaults(func=cmd_speedtest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and args.m is not None and args.m < 3:
        parser.error("--m must be at least 3")
    if getattr(args, "final_time", None) is not None and args.final_time <= 0:
        parser.error("--final-time must be positive")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
