"""Command-line front end: ``xchain params | run | sweep``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .network import ParameterError
from .rational import fmt_q, to_q
from .scenario import ScenarioError, load
from .timebounded import closed_form_a, compute_params

OUT_ENV = "XCHAIN_OUT_DIR"
EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


def parse_seeds(text: str) -> range:
    """``"A..B"`` inclusive; ``"K"`` alone is a single seed; B < A is empty."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return range(int(lo), int(hi) + 1)
    k = int(text)
    return range(k, k + 1)


def cmd_params(args) -> int:
    try:
        p = compute_params(args.n, to_q(args.eps), to_q(args.delta), to_q(args.phi))
    except (ParameterError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"n={p.n} eps={fmt_q(p.eps)} delta={fmt_q(p.delta)} phi={fmt_q(p.phi)}")
    print(f"{'i':>3} {'a_i (recurrence)':>20} {'a_i (closed form)':>20} {'d_i':>20}")
    for i in range(p.n):
        closed = closed_form_a(i, p.n, p.eps, p.delta, p.phi)
        assert closed == p.a[i], f"closed form disagrees at i={i}: {closed} != {p.a[i]}"
        print(f"{i:>3} {fmt_q(p.a[i]):>20} {fmt_q(closed):>20} {fmt_q(p.d[i]):>20}")
    print("a=[" + ",".join(fmt_q(x) for x in p.a) + "]")
    print("d=[" + ",".join(fmt_q(x) for x in p.d) + "]")
    return EXIT_OK


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "xchain-out")


def _summary(report) -> str:
    return " ".join(f"{k}={v.status}" for k, v in report.verdicts.items())


def cmd_run(args) -> int:
    try:
        sc = load(args.scenario, args.override)
        seed = sc.seed if args.seed is None else args.seed
        trace, report = sc.check(seed)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.jsonl").write_text(trace.to_jsonl(), encoding="utf-8")
    (out / "report.json").write_text(report.dumps(), encoding="utf-8")
    print(f"seed {seed}: {_summary(report)}")
    for name, v in report.violations().items():
        print(f"VIOLATED {name}: {v.reason} witness={list(v.witness)}")
    print(f"wrote {out / 'trace.jsonl'} and {out / 'report.json'}")
    return EXIT_OK if report.ok else EXIT_VIOLATION


def _sweep_one(job):
    path, overrides, seed = job
    sc = load(path, overrides)
    _, report = sc.check(seed)
    return seed, {k: v.status for k, v in report.verdicts.items()}, {
        k: {"reason": v.reason, "witness": list(v.witness)} for k, v in report.violations().items()
    }


def sweep(path, seeds, overrides=(), jobs=1) -> dict:
    load(path, overrides)  # fail fast on a bad file
    work = [(str(path), list(overrides), s) for s in seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_one, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        results = [_sweep_one(j) for j in work]
    counts: dict = {}
    failing = {}
    for seed, statuses, bad in results:
        for name, status in statuses.items():
            counts.setdefault(name, Counter())[status] += 1
        if bad:
            failing[seed] = bad
    return {
        "runs": len(results),
        "counts": {k: dict(v) for k, v in counts.items()},
        "violating_seeds": sorted(failing),
        "violations": {str(k): v for k, v in sorted(failing.items())},
    }


def cmd_sweep(args) -> int:
    try:
        seeds = parse_seeds(args.seeds)
        agg = sweep(args.scenario, seeds, args.override, args.jobs)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"runs: {agg['runs']}")
    for name, c in agg["counts"].items():
        print(f"  {name:<20} " + " ".join(f"{k}={c[k]}" for k in sorted(c)))
    if agg["violating_seeds"]:
        print("violating seeds: " + " ".join(str(s) for s in agg["violating_seeds"]))
    if args.out or os.environ.get(OUT_ENV):
        out = _out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(json.dumps(agg, sort_keys=True, indent=2) + "\n",
                                        encoding="utf-8")
    return EXIT_VIOLATION if agg["violating_seeds"] else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xchain", description="Cross-chain payment protocol simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="print the timing parameters a_i, d_i")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--delta", required=True)
    p.add_argument("--phi", default="1")
    p.set_defaults(func=cmd_params)

    r = sub.add_parser("run", help="simulate one seed and check every property")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./xchain-out)")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VAL")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a seed range and aggregate verdicts")
    s.add_argument("--scenario", required=True)
    s.add_argument("--seeds", required=True, metavar="A..B")
    s.add_argument("--override", action="append", default=[], metavar="KEY=VAL")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
