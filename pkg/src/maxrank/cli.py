"""Command line front end: list cases, verify them, sweep closed-form quantities to CSV."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import gallery, suite
from .reports import jsonable
from .submersion import fiber, horizontal_lift_vector

CSV_FIELDS = ("case", "check", "verdict", "p", "q", "delta", "d", "bound")


def parse_box(text: Optional[str]) -> Optional[tuple]:
    """``"_,-3:3"`` -> ``(None, (-3.0, 3.0))``; ``_`` leaves a side to the chart."""
    if text is None:
        return None
    out = []
    for part in text.split(","):
        part = part.strip()
        if part in ("_", "none", ""):
            out.append(None)
            continue
        lo, hi = (float(v) for v in part.split(":"))
        if not hi > lo:
            raise ValueError(f"box side {part!r} must have positive width")
        out.append((lo, hi))
    return tuple(out)


def _dump(obj, path: Path) -> None:
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    path.write_text(text, encoding="utf-8")


def cmd_list(args) -> int:
    entries = [gallery.get_case(cid).catalog_entry() for cid in gallery.CASES]
    if args.json:
        print(json.dumps(entries, sort_keys=True, indent=2))
    else:
        for e in entries:
            print(f"{e['id']:18s} {e['kind']:16s} {e['description']}")
    return 0


def _config(args) -> suite.RunConfig:
    cases = tuple(args.case) if args.case else tuple(gallery.CASES)
    for c in cases:
        if c not in gallery.CASES:
            raise ValueError(f"unknown case {c!r}")
    return suite.RunConfig(
        seed=args.seed,
        cases=cases,
        checks=tuple(args.check) if args.check else None,
        samples=args.samples,
        box=parse_box(args.box),
        epsilon=args.epsilon,
        A=args.A,
        C=args.C,
        alpha=args.alpha,
        beta=args.beta,
        out=args.out,
    )


def cmd_verify(args) -> int:
    cfg = _config(args)
    results = suite.run(cfg)
    status = suite.exit_status(results)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    config = {k: v for k, v in vars(cfg).items() if k != "out"}
    _dump({"config": config, "exit_status": status, "results": [r.to_dict() for r in results]}, out / "report.json")
    with open(out / "witnesses.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, quoting=csv.QUOTE_MINIMAL, extrasaction="ignore")
        w.writeheader()
        for r in results:
            for row in r.rows:
                w.writerow(row)
    for r in results:
        mark = "ok " if r.matched else "!! "
        line = f"{mark}{r.case:18s} {r.check:11s} {r.verdict.value}"
        if not r.matched:
            line += f" (expected {r.expected.value})"
        print(line)
    if args.json:
        print(json.dumps(jsonable([r.to_dict() for r in results]), sort_keys=True))
    return status


# -- sweeps -----------------------------------------------------------------------------------


def _sweep_lift_ratio(values, args):
    s = gallery.hyperboloid_map()
    rows = []
    for r in values:
        v = horizontal_lift_vector(s, [1.0], [0.0, r])
        lhs = v.norm()
        rhs = gallery.hyperboloid_lift_ratio(r)
        rows.append((r, lhs, rhs, lhs - rhs))
    return rows


def _sweep_ri2_witness(values, args):
    s = gallery.hyperboloid_map()
    f = fiber(s, (gallery.T_B,))
    rows = []
    for eps in values:
        w = gallery.hyperboloid_ri2_witness(eps)
        reach = 4.0 * abs(float(w.u[1])) + 10.0
        params = np.linspace(-reach, reach, 20001)[:, None]
        chords = np.linalg.norm(s.total.evaluate(f.chart_points(params)) - w.x, axis=-1)
        lhs = float(np.min(chords))
        rows.append((eps, lhs, eps, lhs - eps))
    return rows


def _sweep_g(values, args):
    A = args.A if args.A is not None else 2.0
    C = args.C if args.C is not None else 5.0
    return [(y, gallery.cylinder_f(y), A * y + C, gallery.cylinder_g(y, A, C)) for y in values]


def _sweep_AC(param):
    def run(values, args):
        rows = []
        for v in values:
            A = v if param == "A" else (args.A if args.A is not None else 2.0)
            C = v if param == "C" else (args.C if args.C is not None else 5.0)
            if args.case and args.case[0] == "plane425":
                eta = gallery.plane_ri1_witness(A, C)
                lhs, rhs = eta / A, C
            else:
                y = gallery.cylinder_ri1_witness(A, C) + 1.0
                lhs, rhs = gallery.cylinder_f(y), A * y + C
            rows.append((v, lhs, rhs, lhs - rhs))
        return rows

    return run


SWEEPS = {
    "r": _sweep_lift_ratio,
    "epsilon": _sweep_ri2_witness,
    "y": _sweep_g,
    "A": _sweep_AC("A"),
    "C": _sweep_AC("C"),
}


def cmd_sweep(args) -> int:
    if args.param not in SWEEPS:
        raise ValueError(f"unknown sweep parameter {args.param!r}; known: {', '.join(SWEEPS)}")
    if args.values:
        values = [float(v) for v in args.values.split(",")]
    else:
        values = np.linspace(args.start, args.stop, args.num).tolist()
    rows = SWEEPS[args.param](values, args)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{args.param}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "lhs", "rhs", "margin"])
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxrank", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("list", help="list gallery cases")
    lp.add_argument("--json", action="store_true")
    lp.set_defaults(func=cmd_list)

    def common(sp):
        sp.add_argument("--case", action="append", help="case id (repeatable; default: all)")
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--samples", type=int, default=64)
        sp.add_argument("--box", help="truncation box, e.g. '_,-3:3'")
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--A", type=float)
        sp.add_argument("--C", type=float)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--out", help="output directory (default: current)")
        sp.add_argument("--json", action="store_true", help="also print the results as JSON")

    vp = sub.add_parser("verify", help="run checks and compare with expected verdicts")
    common(vp)
    vp.add_argument("--check", action="append", choices=suite.CHECKS)
    vp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="sweep one parameter and write (parameter, lhs, rhs, margin) CSV")
    common(sp)
    sp.add_argument("param")
    sp.add_argument("--start", type=float, default=0.0)
    sp.add_argument("--stop", type=float, default=3.0)
    sp.add_argument("--num", type=int, default=13)
    sp.add_argument("--values", help="comma-separated values (overrides the grid)")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
