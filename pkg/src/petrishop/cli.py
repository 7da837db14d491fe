"""The ``bench`` command line: run policies over instances, train agents,
run ablations, export gantt charts and generate instances.

Delimited outputs always get a rendered figure next to them with the
same stem, so a report.csv lands together with a report.png.
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
from pathlib import Path

from . import bench, plots
from .environment import EnvConfig
from .instances import generate_random, load_instance, save_instance
from .mppo import TrainConfig, load_checkpoint, save_checkpoint, train, write_metrics
from .policies import PolicyKind


def _env_config(args) -> EnvConfig:
    return EnvConfig(capacity=args.capacity, observation_depth=args.depth)


def _load_instances(pattern: str, fmt: str) -> dict:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise SystemExit(f"no instance files match {pattern!r}")
    return {Path(p).stem: load_instance(p, fmt) for p in paths}


def _parse_baselines(pairs) -> dict[str, float]:
    baselines = {}
    for pair in pairs or []:
        name, _, value = pair.partition("=")
        if not name or not value:
            raise SystemExit(f"expected NAME=MAKESPAN, got {pair!r}")
        baselines[name] = float(value)
    return baselines


def _cmd_run(args) -> int:
    instances = _load_instances(args.instances, args.format)
    policies = [p.strip().lower() for p in args.policy.split(",") if p.strip()]
    for policy in policies:
        PolicyKind.from_name(policy)
    agent = None
    if "agent" in policies:
        if not args.checkpoint:
            raise SystemExit("policy 'agent' needs --checkpoint")
        agent, _ = load_checkpoint(args.checkpoint)
    report = bench.run_bench(
        instances,
        policies,
        env_config=_env_config(args),
        baselines=_parse_baselines(args.baseline),
        agent=agent,
        seed=args.seed,
    )
    out = Path(args.out)
    bench.report_csv(report, out)
    plots.makespan_figure(report, out.with_suffix(".png"))
    sys.stdout.write(bench.report_text(report))
    return 0 if report.all_valid else 1


def _train_config(args) -> TrainConfig:
    overrides = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(TrainConfig.__dataclass_fields__)
        if unknown:
            raise SystemExit(f"unknown train config keys: {sorted(unknown)}")
    if args.steps is not None:
        overrides["total_steps"] = args.steps
    if args.seed is not None:
        overrides["seed"] = args.seed
    return TrainConfig(**overrides)


def _cmd_train(args) -> int:
    instance = load_instance(args.instance, args.format)
    env_config = _env_config(args)
    config = _train_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train(instance, env_config, config, metrics_path=out / "metrics.csv")
    save_checkpoint(out / "checkpoint.json", result.params, env_config, config)
    plots.training_figure(result.rows, out / "training_curves.png")
    final = result.rows[-1]
    sys.stdout.write(
        f"trained {final.step} steps, {len(result.episode_lengths)} episodes, "
        f"final mean episode length {final.ep_len:.1f}\n"
    )
    return 0


def _cmd_ablate(args) -> int:
    instance = load_instance(args.instance, args.format)
    config = _train_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = {}
    for mode in args.mode.split(","):
        mode = mode.strip()
        result = bench.run_ablation(
            instance,
            mode,
            config,
            base_env_config=_env_config(args),
            metrics_path=out / f"{mode}_metrics.csv",
        )
        curves[mode] = result.rows
        sys.stdout.write(f"{mode}: final mean episode length {result.rows[-1].ep_len:.1f}\n")
    plots.ablation_figure(curves, out / "ablation_curves.png")
    return 0


def _cmd_gantt(args) -> int:
    with open(args.schedule, "r", encoding="utf-8") as fh:
        schedule = bench.schedule_from_json(json.load(fh))
    wrote = False
    for fmt in ("json", "csv", "svg"):
        path = getattr(args, fmt)
        if path:
            bench.export_gantt(schedule, path, fmt)
            wrote = True
    if not wrote:
        raise SystemExit("nothing to do: pass at least one of --json/--csv/--svg")
    return 0


def _cmd_gen(args) -> int:
    instance = generate_random(args.jobs, args.machines, args.time_seed, args.machine_seed)
    save_instance(instance, args.out, args.format)
    sys.stdout.write(f"wrote {args.jobs}x{args.machines} instance to {args.out}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench", description="job-shop scheduling benchmarks, training and exports"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run policies over instance files")
    run.add_argument("--instances", required=True, help="glob of instance files")
    run.add_argument("--format", choices=("taillard", "orlib"), default="orlib")
    run.add_argument("--policy", required=True, help="comma-separated: spt,lpt,sps,lps,sso,lso,random,agent")
    run.add_argument("--checkpoint", help="agent checkpoint (required for policy 'agent')")
    run.add_argument("--capacity", type=int, default=None, help="job slots (default: one per job)")
    run.add_argument("--depth", type=int, default=1, help="queued operations visible per slot")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--baseline", action="append", metavar="NAME=MAKESPAN", help="reference makespan for the gap column")
    run.add_argument("--out", required=True, help="report CSV path; a .png figure lands alongside")
    run.set_defaults(func=_cmd_run)

    tr = sub.add_parser("train", help="train an agent on one instance")
    tr.add_argument("--instance", required=True)
    tr.add_argument("--format", choices=("taillard", "orlib"), default="orlib")
    tr.add_argument("--steps", type=int, default=None, help="total decision steps")
    tr.add_argument("--config", help="JSON file with train config overrides")
    tr.add_argument("--capacity", type=int, default=None)
    tr.add_argument("--depth", type=int, default=1)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--out", required=True, help="output directory for checkpoint.json, metrics.csv, curves")
    tr.set_defaults(func=_cmd_train)

    ab = sub.add_parser("ablate", help="train ablation arms at equal step budget")
    ab.add_argument("--mode", required=True, help=f"comma-separated: {','.join(bench.ABLATION_MODES)}")
    ab.add_argument("--instance", required=True)
    ab.add_argument("--format", choices=("taillard", "orlib"), default="orlib")
    ab.add_argument("--steps", type=int, default=None)
    ab.add_argument("--config", help="JSON file with train config overrides")
    ab.add_argument("--capacity", type=int, default=None)
    ab.add_argument("--depth", type=int, default=1)
    ab.add_argument("--seed", type=int, default=None)
    ab.add_argument("--out", required=True, help="output directory")
    ab.set_defaults(func=_cmd_ablate)

    ga = sub.add_parser("gantt", help="export a schedule as gantt data")
    ga.add_argument("--schedule", required=True, help="schedule JSON produced by this package")
    ga.add_argument("--json", help="write schedule JSON here")
    ga.add_argument("--csv", help="write operation rows here")
    ga.add_argument("--svg", help="write a static chart here")
    ga.set_defaults(func=_cmd_gantt)

    ge = sub.add_parser("gen", help="generate a random instance from two seeds")
    ge.add_argument("--jobs", type=int, required=True)
    ge.add_argument("--machines", type=int, required=True)
    ge.add_argument("--time-seed", type=int, required=True)
    ge.add_argument("--machine-seed", type=int, required=True)
    ge.add_argument("--format", choices=("taillard", "orlib"), default="orlib")
    ge.add_argument("--out", required=True)
    ge.set_defaults(func=_cmd_gen)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
