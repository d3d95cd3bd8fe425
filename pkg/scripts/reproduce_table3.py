#!/usr/bin/env python3
"""Seed-averaged policy comparison on the relaxed and strict delay scenarios.

    python3 scripts/reproduce_table3.py [--seeds 0-9] [--workers 4] [--out results/]
"""

import argparse
import time
from pathlib import Path

from ragate.cli import _int_list, _print_table
from ragate.config import load_and_validate
from ragate.runner import compare
from ragate.traces import write_json

POLICIES = ["safeobo", "uniform", "oracle", "always:3b-local", "always:3b-edge-rag", "always:3b-graphrag"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--scenarios", nargs="+", default=["table3", "table3-strict"])
    ap.add_argument("--seeds", type=_int_list)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    for name in args.scenarios:
        cfg = load_and_validate(name)
        t0 = time.perf_counter()
        res = compare(cfg, POLICIES, args.seeds, workers=args.workers)
        print(f"\n{name}  (QoS: accuracy >= {cfg.qos.min_accuracy}, delay <= {cfg.qos.max_delay_s} s; "
              f"{time.perf_counter() - t0:.0f} s)")
        _print_table(res)
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            write_json(args.out / f"{name}.json", {p: r.as_dict() for p, r in res.items()})


if __name__ == "__main__":
    main()
