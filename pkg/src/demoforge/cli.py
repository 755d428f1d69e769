"""Command-line entry points.

  demoforge run --task <file|builtin> --oracle scripted|remote|human --seed N [--inject <file>]
  demoforge gen --task <file|builtin> --n 10 --out <dir>
  demoforge breakdown --task <file|builtin> --rates <file> --episodes N
  demoforge analyze chamfer A B | keyframes <ep> | scaling <csv>
  demoforge eval --policy knn|random --train <dir> --task <file|builtin> --episodes 25 --seeds 3

Exit code 0 on a success outcome / completed generation; a structured JSON
summary goes to stdout.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import datakit
from .engine import (
    Budgets,
    OUTCOME_SUCCESS,
    error_breakdown,
    generate_dataset,
    run_episode,
)
from .errors import DemoforgeError
from .oracle import (
    ErrorInjection,
    NO_INJECTION,
    OracleBridge,
    RemoteConfig,
    WorldHandle,
    make_human,
    make_remote,
    make_scripted,
)
from .taskfile import BUILTIN_TASKS, load_builtin, load_task
from .world import spawn_scene


def _load_task(spec: str):
    if spec in BUILTIN_TASKS:
        return load_builtin(spec)
    return load_task(spec)


def _load_injection(path: str | None) -> ErrorInjection:
    if not path:
        return NO_INJECTION
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return ErrorInjection(
        rates=data.get("rates", {}),
        seed=data.get("seed", 0),
        bbox_shift_px=data.get("bbox_shift_px", 32),
    )


def _budgets(args) -> Budgets:
    return Budgets(max_action_steps=args.max_steps, max_verify_tries=args.max_tries)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=str))


def cmd_run(args) -> int:
    task = _load_task(args.task)
    budgets = _budgets(args)
    bridge = None
    if args.oracle == "scripted":
        handle = WorldHandle(task, spawn_scene(task, args.seed))
        backend = make_scripted(handle, _load_injection(args.inject), episode_seed=args.seed)
    elif args.oracle == "remote":
        if not args.endpoint:
            print("--endpoint required for the remote oracle", file=sys.stderr)
            return 2
        backend = make_remote(RemoteConfig(url=args.endpoint, auth_token_var=args.auth_var))
    else:
        bridge = OracleBridge(
            host=args.bridge_host, port=args.bridge_port,
            episodes_root=args.episodes_dir, static_dir=args.console_dir,
        ).start()
        print(f"human-oracle bridge listening on {bridge.url}", file=sys.stderr)
        backend = make_human(bridge)
    try:
        record = run_episode(task, backend, budgets, args.seed, record_views=args.record_views)
    finally:
        if bridge is not None:
            bridge.stop()
    if args.out:
        datakit.write_episode(record, args.out)
    _emit({
        "task": task.id, "seed": args.seed, "outcome": record.outcome,
        "steps": len(record.steps), "try_counts": list(record.try_counts),
        "oracle_queries": len(record.transcript),
    })
    return 0 if record.outcome == OUTCOME_SUCCESS else 1


def cmd_gen(args) -> int:
    task = _load_task(args.task)
    handle = WorldHandle(task, spawn_scene(task, args.seed))
    backend = make_scripted(handle, _load_injection(args.inject), episode_seed=args.seed)
    manifest = generate_dataset(
        task, backend, _budgets(args), args.n, args.out,
        seed_start=args.seed, record_views=not args.no_views,
    )
    _emit({
        "task": task.id, "out": str(args.out),
        "successes": len(manifest.success_entries()),
        "episodes_run": len(manifest.episodes),
        "retained_failures": len(manifest.episodes) - len(manifest.success_entries()),
    })
    return 0


def cmd_breakdown(args) -> int:
    task = _load_task(args.task)
    report = error_breakdown(
        task, _budgets(args), _load_injection(args.rates), args.episodes, seed_start=args.seed
    )
    _emit({
        "task": task.id,
        "episodes": report.n_episodes,
        "rates": report.rates,
        "success_base": report.success_base,
        "success_perception_zeroed": report.success_perception_zeroed,
        "success_reasoning_zeroed": report.success_reasoning_zeroed,
        "perception_attribution": report.perception_attribution,
        "reasoning_attribution": report.reasoning_attribution,
    })
    return 0


def _point_set(path: str):
    p = Path(path)
    if p.is_dir():
        return datakit.episode_positions(datakit.read_episode(p))
    data = json.loads(p.read_text(encoding="utf-8"))
    return data


def cmd_analyze(args) -> int:
    if args.what == "chamfer":
        cd = datakit.chamfer_distance(_point_set(args.a), _point_set(args.b))
        _emit({"chamfer_distance": cd})
        return 0
    if args.what == "keyframes":
        record = datakit.read_episode(args.a)
        kfs = datakit.extract_keyframes(record)
        _emit({
            "episode": args.a, "outcome": record.outcome, "steps": len(record.steps),
            "keyframes": [asdict(kf) for kf in kfs],
        })
        return 0
    # scaling: CSV of demo_count,success_percent rows
    points = []
    with open(args.a, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#") or not row[0].strip():
                continue
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header row
    slope, intercept, r2 = datakit.fit_scaling(points)
    _emit({"slope": slope, "intercept": intercept, "r2": r2, "points": len(points)})
    return 0


def cmd_eval(args) -> int:
    task = _load_task(args.task)
    if args.policy == "knn":
        if not args.train:
            print("--train <dataset dir> required for the knn policy", file=sys.stderr)
            return 2
        policy = datakit.knn_policy(args.train, k=args.k)
    else:
        policy = datakit.RandomPolicy(seed=args.seed)
    seeds = list(range(args.seeds))
    table = datakit.eval_policy(policy, task, args.episodes, seeds, _budgets(args))
    _emit({
        "task": task.id, "policy": args.policy,
        "per_seed": {str(k): v for k, v in table.per_seed.items()},
        "mean": table.mean, "std": table.std,
    })
    return 0


def _add_budget_flags(p):
    p.add_argument("--max-steps", type=int, default=50, help="action-step budget per episode")
    p.add_argument("--max-tries", type=int, default=30, help="verify-try budget per sub-task")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="demoforge", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one episode")
    p.add_argument("--task", required=True, help="task config path or builtin id")
    p.add_argument("--oracle", choices=("scripted", "remote", "human"), default="scripted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject", help="error-injection JSON file (scripted oracle)")
    p.add_argument("--endpoint", help="remote oracle URL")
    p.add_argument("--auth-var", default=None, help="env var holding the bearer token")
    p.add_argument("--bridge-host", default="127.0.0.1")
    p.add_argument("--bridge-port", type=int, default=8008)
    p.add_argument("--episodes-dir", default=None, help="episode root served by the bridge")
    p.add_argument("--console-dir", default=None, help="static console files for the bridge")
    p.add_argument("--out", help="write the episode record here")
    p.add_argument("--record-views", action="store_true")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", help="generate a success-filtered dataset")
    p.add_argument("--task", required=True)
    p.add_argument("--n", type=int, default=10, help="target success count")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject", help="error-injection JSON file")
    p.add_argument("--no-views", action="store_true", help="skip view snapshots")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("breakdown", help="perception/reasoning error attribution")
    p.add_argument("--task", required=True)
    p.add_argument("--rates", required=True, help="error-injection JSON file")
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    _add_budget_flags(p)
    p.set_defaults(func=cmd_breakdown)

    p = sub.add_parser("analyze", help="dataset metrics")
    p.add_argument("what", choices=("chamfer", "keyframes", "scaling"))
    p.add_argument("a", help="episode dir / JSON points / CSV")
    p.add_argument("b", nargs="?", help="second point set (chamfer)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eval", help="evaluate a replay policy in the simulator")
    p.add_argument("--policy", choices=("knn", "random"), default="knn")
    p.add_argument("--train", help="dataset dir with manifest.json")
    p.add_argument("--task", required=True)
    p.add_argument("--episodes", type=int, default=25)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _add_budget_flags(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DemoforgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
