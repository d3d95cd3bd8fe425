#!/usr/bin/env python3
"""Exploitation-phase cost of the gate as the warm-up length T0 varies.

Also prints the oracle's mean cost over the same step window, since the
exploitation window shrinks as T0 grows and the environment is not
stationary in difficulty.

    python3 scripts/warmup_sweep.py [--values 100,300,500] [--seeds 0-9] [--workers 4]
"""

import argparse

import numpy as np

from ragate.cli import _int_list
from ragate.config import load_and_validate
from ragate.runner import compare, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--scenario", default="table3")
    ap.add_argument("--values", type=_int_list, default=[100, 300, 500])
    ap.add_argument("--seeds", type=_int_list)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = load_and_validate(args.scenario)
    seeds = args.seeds or list(cfg.seeds)
    oracle = np.array([[r.u_t for r in run(cfg, "oracle", s)[0]] for s in seeds]).mean(axis=0)
    print(f"{'T0':>6}{'gate cost':>12}{'std':>9}{'oracle cost':>14}{'excess':>10}{'accuracy':>10}")
    for t0 in args.values:
        res = compare(cfg.with_overrides(warmup=t0), ["safeobo"], seeds, workers=args.workers)["safeobo"]
        m, s = res.mean["exploit_mean_cost"], res.std["exploit_mean_cost"]
        o = oracle[t0:].mean()
        print(f"{t0:>6}{m:>12.2f}{s:>9.2f}{o:>14.2f}{m - o:>10.2f}{res.mean['exploit_accuracy']:>10.4f}")


if __name__ == "__main__":
    main()
