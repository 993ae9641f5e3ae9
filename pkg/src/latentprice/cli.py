"""Command-line entry point: ``latentprice {run,sweep,instances,trace}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from latentprice.demand import GENERATORS, make_instance, save_instance, summarize
from latentprice.distfree import EXACT_ZERO, PRINTED_ZERO
from latentprice.harness import (
    ADVERSARIES,
    ALGORITHMS,
    OUTPUT_ENV,
    ExperimentConfig,
    output_dir,
    run_experiment,
    run_single,
    run_sweep,
    write_results,
    write_trace,
)


def _parse_params(items: Sequence[str] | None) -> dict[str, Any]:
    params: dict[str, Any] = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise SystemExit(f"instance parameter {item!r} is not key=value")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _seeds(spec: str) -> list[int]:
    """``"1-20"`` or ``"0,3,7"``."""
    out: list[int] = []
    for part in spec.split(","):
        lo, sep, hi = part.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return out


def _experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags given here override it")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--instance", help=f"one of {sorted(GENERATORS)}, custom or file")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="instance parameter")
    p.add_argument("-T", "--horizon", dest="T", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seeds", type=_seeds, help="e.g. 1-20 or 0,4,9")
    p.add_argument("--master-seed", type=int)
    p.add_argument("--v1", type=float)
    p.add_argument("--v2", type=float)
    p.add_argument("--adversary", choices=ADVERSARIES)
    p.add_argument("--sequence-file")
    p.add_argument("--zero-anchor", choices=(EXACT_ZERO, PRINTED_ZERO))
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output", help=f"output directory (default ${OUTPUT_ENV} or ./results)")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    overrides = {
        "algorithm": args.algorithm,
        "instance": args.instance,
        "T": args.T,
        "delta": args.delta,
        "gamma": args.gamma,
        "seeds": args.seeds,
        "master_seed": args.master_seed,
        "v1": args.v1,
        "v2": args.v2,
        "adversary": args.adversary,
        "sequence_file": args.sequence_file,
        "zero_anchor": args.zero_anchor,
        "workers": args.workers,
        "output": args.output,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.param:
        data["instance_params"] = {**data.get("instance_params", {}), **_parse_params(args.param)}
    if getattr(args, "per_round", False):
        data["per_round"] = True
    if "algorithm" not in data:
        raise SystemExit("an algorithm is required (--algorithm or config file)")
    return ExperimentConfig.from_dict(data)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    result = run_experiment(cfg)
    out = output_dir(cfg.output)
    for path in write_results(result, out):
        print(path)
    s = result.summary
    print(
        f"mean final regret {s['mean_final_regret']:.3f} "
        f"(stderr {s['stderr_final_regret']:.3f}, max {s['max_final_regret']:.3f}, runs {s['runs']})"
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    horizons = [int(float(t)) for t in args.grid.split(",")]
    results, fit = run_sweep(cfg, horizons)
    out = output_dir(cfg.output)
    path = out / "sweep.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["T", "runs", "mean_final_regret", "stderr_final_regret", "max_final_regret"])
        for T, res in zip(horizons, results):
            s = res.summary
            writer.writerow(
                [T, s["runs"], repr(s["mean_final_regret"]), repr(s["stderr_final_regret"]),
                 repr(s["max_final_regret"])]
            )
    print(path)
    if fit is None:
        print("scaling fit skipped: need >= 3 horizons with >= 10 seeds each")
        return 0
    path = out / "scaling.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slope", "ci_low", "ci_high", "intercept", "points"])
        writer.writerow([repr(fit.slope), repr(fit.low), repr(fit.high), repr(fit.intercept), fit.points])
    print(path)
    print(f"log-log slope {fit.slope:.3f} [{fit.low:.3f}, {fit.high:.3f}]")
    return 0


def cmd_instances(args: argparse.Namespace) -> int:
    if args.name is None:
        for name in sorted(GENERATORS):
            print(name)
        return 0
    model = make_instance(args.name, **_parse_params(args.param))
    if args.output:
        save_instance(model, args.output)
        print(args.output)
        return 0
    info = summarize(model)
    payload = {
        **model.to_dict(),
        "optimal_price": info.optimal_price,
        "optimal_revenue": info.optimal_revenue,
        "gaps": list(info.gaps),
    }
    json.dump(payload, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    cfg.validate()
    seed = cfg.seeds[0]
    trace = run_single(cfg, seed)
    path = Path(args.file) if args.file else output_dir(cfg.output) / f"trace_seed{seed}.csv"
    print(write_trace(trace, path))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentprice", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replicate one configuration across seeds")
    _experiment_args(p)
    p.add_argument("--per-round", action="store_true", help="also write full per-round traces")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a horizon grid and fit the log-log regret slope")
    _experiment_args(p)
    p.add_argument("--grid", required=True, help="comma-separated horizons, e.g. 1e5,2e5,4e5")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("instances", help="list generators or emit one instance as JSON")
    p.add_argument("name", nargs="?")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("-o", "--output", help="write the instance file here instead of stdout")
    p.set_defaults(func=cmd_instances)

    p = sub.add_parser("trace", help="per-round dump of a single seed")
    _experiment_args(p)
    p.add_argument("--file", help="CSV path (default: <output>/trace_seed<seed>.csv)")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
