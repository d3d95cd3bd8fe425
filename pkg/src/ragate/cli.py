"""
Simulate and compare RAG gating policies on YAML scenarios.

    ragate validate --scenario table3
    ragate run --scenario table3 --policy safeobo --seed 42 --steps 50 --out runs/a
    ragate compare --scenario table3 --policy safeobo,uniform,oracle --seeds 0-9
    ragate sweep --scenario table3 --param warmup --values 100,300,500 --seeds 0-9

Exit codes: 0 success, 2 invalid scenario or arguments, 3 failure during a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .config import ConfigError, ScenarioConfig, config_hash, dump_config, load_and_validate, resolve_scenario
from .runner import RunError, compare, make_policy, run
from .traces import emit_trace, jsonable, write_json

log = logging.getLogger("ragate")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
SWEEP_PARAMS = ("warmup", "beta", "qos_acc", "qos_delay", "steps")


def _int_list(text: str) -> list[int]:
    """``"0-9"``, ``"1,5,7"`` or a mix like ``"0-2,8"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(part)])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _policies(values: list[str] | None) -> list[str]:
    out = []
    for v in values or []:
        out.extend(p.strip() for p in v.split(",") if p.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ragate", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"ragate {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeds: bool):
        sp.add_argument("--scenario", required=True, help="scenario file or shipped scenario name")
        sp.add_argument("--steps", type=int, help="override the scenario's number of steps")
        sp.add_argument("--warmup", type=int, help="override warm-up steps T0")
        sp.add_argument("--beta", type=float, help="override both confidence multipliers")
        sp.add_argument("--qos-acc", type=float, help="override minimum accuracy")
        sp.add_argument("--qos-delay", type=float, help="override maximum delay (s)")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), default="csv", help="trace format")
        if seeds:
            sp.add_argument("--seeds", type=_int_list, help="seed list, e.g. 0-9 or 1,4,7")
            sp.add_argument("--workers", type=int, default=1, help="parallel runs")

    sp = sub.add_parser("run", help="run one policy for one seed")
    common(sp, seeds=False)
    sp.add_argument("--policy", default="safeobo", help="safeobo, always:<arm>, uniform or oracle")
    sp.add_argument("--seed", type=int, help="seed (default: the scenario's first seed)")

    sp = sub.add_parser("compare", help="seed-averaged comparison of several policies")
    common(sp, seeds=True)
    sp.add_argument("--policy", action="append", help="policy spec; repeat or comma-separate")
    sp.add_argument("--reference", help="reference policy for cost reduction")

    sp = sub.add_parser("validate", help="validate a scenario file and exit")
    sp.add_argument("--scenario", required=True)

    sp = sub.add_parser("sweep", help="vary one parameter and compare seed-averaged results")
    common(sp, seeds=True)
    sp.add_argument("--policy", default="safeobo")
    sp.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sp.add_argument("--values", required=True, type=_float_list)
    sp.add_argument("--reference", help="reference policy for cost reduction")
    return p


def _load(args) -> tuple[ScenarioConfig, bytes]:
    path = resolve_scenario(args.scenario)
    cfg = load_and_validate(path)
    cfg = cfg.with_overrides(
        warmup=getattr(args, "warmup", None),
        beta=getattr(args, "beta", None),
        qos_acc=getattr(args, "qos_acc", None),
        qos_delay=getattr(args, "qos_delay", None),
        steps=getattr(args, "steps", None),
    )
    return cfg, path.read_bytes()


def _validate_overrides(cfg: ScenarioConfig) -> None:
    # Re-run the full validation on the overridden tree so CLI values get the same checks.
    from .config import from_dict, to_dict
    from_dict(to_dict(cfg))


def manifest(cfg: ScenarioConfig, raw: bytes, **extra) -> dict:
    return {
        "tool": "ragate",
        "version": __version__,
        "scenario": cfg.name,
        "config_sha256": config_hash(raw),
        "effective_config_sha256": config_hash(dump_config(cfg)),
        **extra,
    }


def _print_table(results: dict, out=sys.stdout) -> None:
    cols = ("exploit_mean_cost", "exploit_accuracy", "exploit_mean_delay", "exploit_violation_rate")
    print(f"{'policy':<24}" + "".join(f"{c:>24}" for c in cols) + f"{'reduction':>12}", file=out)
    for name, r in results.items():
        cells = "".join(f"{r.mean[c]:>15.4f} ±{r.std[c]:>7.3f}" for c in cols)
        print(f"{name:<24}{cells}{100 * r.reduction:>11.1f}%", file=out)


def cmd_validate(args) -> int:
    cfg = load_and_validate(args.scenario)
    print(f"{cfg.name}: OK ({len(cfg.arms)} arms, {len(cfg.workload.edge_delays)} edges, "
          f"{cfg.steps} steps, {len(cfg.seeds)} seeds)")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, raw = _load(args)
    _validate_overrides(cfg)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    make_policy(args.policy, cfg, seed)
    records, summary = run(cfg, args.policy, seed)
    if args.out:
        paths = emit_trace(records, summary, args.out, args.format,
                           manifest(cfg, raw, seed=seed, policy=args.policy, steps=cfg.steps))
        print(f"wrote {paths['trace']}, {paths['summary']}, {paths['manifest']}")
    print(json.dumps(jsonable(asdict(summary)), indent=2))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, raw = _load(args)
    _validate_overrides(cfg)
    policies = _policies(args.policy) or ["safeobo", "uniform", "oracle"]
    results = compare(cfg, policies, args.seeds, None, args.reference, args.workers)
    _print_table(results)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        write_json(args.out / "comparison.json", {p: r.as_dict() for p, r in results.items()})
        write_json(args.out / "manifest.json",
                   manifest(cfg, raw, seeds=list(args.seeds or cfg.seeds), policies=policies, steps=cfg.steps))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, raw = _load(args)
    _validate_overrides(cfg)
    rows = []
    for v in args.values:
        value = int(v) if args.param in ("warmup", "steps") else v
        c = cfg.with_overrides(**{args.param: value})
        _validate_overrides(c)
        res = compare(c, [args.policy], args.seeds, None, args.reference, args.workers)[args.policy]
        rows.append({"param": args.param, "value": value, **res.as_dict()})
        print(f"{args.param}={value}: exploit_mean_cost={res.mean['exploit_mean_cost']:.3f} "
              f"accuracy={res.mean['exploit_accuracy']:.4f} "
              f"delay={res.mean['exploit_mean_delay']:.3f} reduction={100 * res.reduction:.1f}%")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        write_json(args.out / "sweep.json", rows)
        write_json(args.out / "manifest.json",
                   manifest(cfg, raw, seeds=list(args.seeds or cfg.seeds), policy=args.policy,
                            param=args.param, values=args.values, steps=cfg.steps))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "validate": cmd_validate, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (KeyError, ValueError) as e:
        # bad policy spec or arm name given on the command line
        print(f"error: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_CONFIG
    except RunError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
