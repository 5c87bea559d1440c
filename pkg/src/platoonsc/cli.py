"""Command-line front end: run | sweep | compare | oracle.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .harness import ConfigError, RunConfig


def _load_config(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cfg = harness.parse_config(path)
    else:
        cfg = RunConfig()
    run = cfg.run
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if args.out is not None:
        run = replace(run, output_dir=args.out)
    if args.deterministic:
        run = replace(run, deterministic=True)
    cfg = replace(cfg, run=run)
    if getattr(args, "algo", None):
        cfg = replace(cfg, learner=replace(cfg.learner, algorithm=args.algo))
    if getattr(args, "episodes", None) is not None:
        cfg = replace(cfg, learner=replace(cfg.learner, episodes=args.episodes))
    cfg.validate()
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (defaults apply if omitted)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--algo", default=None,
                   help="algorithm id: samramarl | ddpg | td3 | ddpg_no_sc")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--episodes", type=int, default=None,
                   help="override the number of training episodes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platoonsc",
        description="Platoon V2X semantic resource-allocation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train (or evaluate) one seeded run")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="sweep a parameter across values")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", default=None,
                         help="intra_platoon_gap | semantic_demand_size | "
                              "transform_factor | section.key (defaults to "
                              "the config's sweep section)")
    p_sweep.add_argument("--values", default=None,
                         help="comma-separated values")
    p_sweep.add_argument("--seeds", default=None,
                         help="comma-separated seeds per point")
    p_sweep.add_argument("--algos", default=None,
                         help="comma-separated algorithm ids")

    p_cmp = sub.add_parser("compare", help="paired comparison of algorithms")
    _add_common(p_cmp)
    p_cmp.add_argument("--algos", required=True,
                       help="comma-separated algorithm ids (first = reference)")
    p_cmp.add_argument("--seeds", default="0,1,2,3,4")

    p_oracle = sub.add_parser("oracle", help="enumerate a stored instance")
    p_oracle.add_argument("--instance", required=True,
                          help="StaticInstance JSON file")
    p_oracle.add_argument("--out", default=None)
    return parser


def _parse_values(text: str) -> list[float]:
    out = []
    for item in text.split(","):
        item = item.strip()
        out.append(float(item) if "." in item or "e" in item.lower()
                   else int(item))
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            result = harness.run(_load_config(args))
            print(f"episodes: {result['episodes']}")
            print(f"summary:  {result['summary']}")
            for k, v in result["aggregates"].items():
                print(f"  final {k}: {v}")
        elif args.command == "sweep":
            cfg = _load_config(args)
            algos = args.algos.split(",") if args.algos else None
            values = _parse_values(args.values) if args.values else None
            seeds = ([int(s) for s in args.seeds.split(",")]
                     if args.seeds else None)
            path = harness.sweep(cfg, args.param, values, seeds=seeds,
                                 algorithms=algos)
            print(f"sweep written: {path}")
        elif args.command == "compare":
            cfg = _load_config(args)
            configs = [replace(cfg, learner=replace(cfg.learner, algorithm=a))
                       for a in args.algos.split(",")]
            report = harness.compare_algorithms(
                configs, seeds=[int(s) for s in args.seeds.split(",")])
            out = cfg.output_dir()
            out.mkdir(parents=True, exist_ok=True)
            path = out / "comparison.json"
            harness.write_comparison(report, path)
            print(f"comparison written: {path}")
            for algo, entry in report["pairs"].items():
                qoe = entry["mean_qoe"]
                print(f"  {algo}: mean QoE diff vs {report['reference']} = "
                      f"{qoe['mean_diff']:+.4f} "
                      f"(+{qoe['positive']}/-{qoe['negative']})")
        elif args.command == "oracle":
            record = harness.solve_instance(
                args.instance, Path(args.out) if args.out else None)
            print(f"optimum objective: {record['total']:.6f}")
            for i, a in enumerate(record["assignment"]):
                mode = "v2v" if a["v2v"] else "v2i"
                print(f"  agent {i}: subchannel {a['subchannel']} {mode} "
                      f"p_text={a['power_text_w']:.3f} W "
                      f"p_image={a['power_image_w']:.3f} W")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failures map to exit code 2
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
