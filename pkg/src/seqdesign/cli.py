"""Command-line interface.

Subcommands:
    mc-truth    compute and cache the Monte Carlo ATE truth for the env
    simulate    emit trajectories for one design
    train       fit the transformer design policy, write checkpoint + log
    benchmark   run the replication grid and summarize MSEs
    report      re-summarize a results CSV into summary CSV/JSON

Every output is a pure function of (config file, seed); the manifest's
timestamp can be pinned through SEQDESIGN_TIMESTAMP for byte-identical
reruns. Exit codes: 0 success, 2 configuration error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import bench
from .bench import BenchmarkConfig, ConfigError
from .core import RunManifest, substream, write_trajectory_csv, run_design


def _timestamp() -> str:
    pinned = os.environ.get("SEQDESIGN_TIMESTAMP")
    if pinned is not None:
        return pinned
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _manifest(config: BenchmarkConfig, design: str, estimator: str, seed: int) -> RunManifest:
    return RunManifest(
        seed=seed,
        environment=config.env.get("kind", ""),
        design=design,
        estimator=estimator,
        config_digest=config.digest(),
        created_at=_timestamp(),
    )


def _load(args) -> BenchmarkConfig:
    config = bench.parse_config(args.config)
    run = dict(config.run)
    if args.reps is not None:
        if args.reps < 2:
            raise ConfigError("--reps must be >= 2")
        run["replications"] = args.reps
    if args.seed is not None:
        run["seed"] = args.seed
    return BenchmarkConfig(run=run, env=config.env, designs=config.designs, trl=config.trl)


def _truth_path(out: Path) -> Path:
    return out / "truth.json"


def _ensure_truth(config: BenchmarkConfig, env, out: Path) -> tuple[float, float, int]:
    cache = _truth_path(out)
    if cache.exists():
        return bench.read_truth_cache(cache, config.env_digest())
    value, se, n = bench.compute_truth(env, config)
    bench.write_truth_cache(cache, value, se, n, config.env_digest())
    return value, se, n


def cmd_mc_truth(args) -> int:
    config = _load(args)
    env = bench.build_env(config.env)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    value, se, n = bench.compute_truth(env, config)
    bench.write_truth_cache(_truth_path(out), value, se, n, config.env_digest())
    manifest = _manifest(config, design="", estimator="mc", seed=config.seed)
    (out / "mc_truth_manifest.json").write_text(manifest.to_json())
    print(f"ATE_mc = {value:.6f} (se {se:.2e}, {n} rollouts) -> {_truth_path(out)}")
    return 0


def cmd_simulate(args) -> int:
    config = _load(args)
    env = bench.build_env(config.env)
    spec = next((d for d in config.designs if d.design_id == args.design), None)
    if spec is None:
        raise ConfigError(f"design {args.design!r} not declared in the config")
    policy = bench.make_policy(spec, env)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajectories = []
    for rep in range(1, config.replications + 1):
        env_rng = substream(config.seed, "env", rep)
        policy_rng = substream(config.seed, "policy", rep)
        trajectories.append(run_design(env, policy, env_rng, policy_rng))
    csv_path = out / f"trajectories_{spec.design_id}.csv"
    write_trajectory_csv(csv_path, trajectories)
    manifest = _manifest(config, design=spec.design_id, estimator="", seed=config.seed)
    (out / f"simulate_{spec.design_id}_manifest.json").write_text(manifest.to_json())
    print(f"wrote {config.replications} trajectories -> {csv_path}")
    return 0


def cmd_train(args) -> int:
    from .trl.agent import TrlConfig, train, write_training_log_csv

    config = _load(args)
    env = bench.build_env(config.env)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth, _, _ = _ensure_truth(config, env, out)

    trl_cfg = dict(config.trl)
    train_seed = trl_cfg.pop("train_seed", config.seed + 1)
    window = trl_cfg.pop("window", None)
    trl = TrlConfig(window=window, **trl_cfg)
    result = train(env, trl, substream(train_seed, "trl-train"), ate_mc=truth)
    ckpt = out / "trl_checkpoint.json"
    result.save(ckpt)
    write_training_log_csv(out / "trl_training_log.csv", result.log)
    manifest = _manifest(config, design="TRL", estimator="", seed=train_seed)
    (out / "train_manifest.json").write_text(manifest.to_json())
    print(f"trained {trl.epochs} epochs -> {ckpt}")
    return 0


def cmd_benchmark(args) -> int:
    config = _load(args)
    env = bench.build_env(config.env)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth, _, _ = _ensure_truth(config, env, out)
    results = bench.run_grid(env, config.designs, config.replications, config.seed, truth)
    summaries = bench.summarize(results)
    env_label = config.run.get("label", config.env.get("kind", "env"))
    bench.write_results_csv(out / "results.csv", results)
    bench.write_summary_csv(out / "summary.csv", summaries, env_label, truth, config.seed)
    manifest = _manifest(config, design=",".join(d.design_id for d in config.designs),
                         estimator="paired", seed=config.seed)
    (out / "benchmark_manifest.json").write_text(manifest.to_json())
    for s in summaries:
        print(f"{s.design_id:>8}: MSE {s.mse_mean:.6g} +/- {s.ci_half_width:.2g} "
              f"({s.replications} reps, {s.estimator})")
    return 0


def cmd_report(args) -> int:
    results = _read_results_csv(args.results)
    summaries = bench.summarize(results)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench.write_summary_csv(out / "summary.csv", summaries,
                            args.label, float("nan"), 0)
    payload = [
        {"design": s.design_id, "mse_mean": s.mse_mean,
         "ci_half_width": s.ci_half_width, "reps": s.replications,
         "estimator": s.estimator}
        for s in summaries
    ]
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for s in summaries:
        print(f"{s.design_id:>8}: MSE {s.mse_mean:.6g} +/- {s.ci_half_width:.2g}")
    return 0


def _read_results_csv(path) -> list[bench.ReplicationResult]:
    import csv as _csv
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"results file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        for record in _csv.DictReader(fh):
            rows.append(bench.ReplicationResult(
                design_id=record["design"],
                replication=int(record["replication"]),
                estimator=record["estimator"],
                estimate=float(record["estimate"]),
                error=float(record["error"]),
                failed=bool(int(record["failed"])),
                message=record.get("message", ""),
            ))
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqdesign",
        description="Benchmark harness for time-series A/B test designs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="path to the INI config")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")
        p.add_argument("--reps", type=int, default=None, help="override [run] replications")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("mc-truth", help="compute and cache the Monte Carlo ATE truth")
    add_common(p)
    p.set_defaults(func=cmd_mc_truth)

    p = sub.add_parser("simulate", help="emit trajectories for one design")
    add_common(p)
    p.add_argument("--design", required=True, help="design id declared in the config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the transformer design policy")
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", help="run the replication grid and summarize")
    add_common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="summarize an existing results CSV")
    p.add_argument("--results", required=True, help="per-replication results CSV")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--label", default="env", help="environment label for the summary")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001
        print(f"runtime error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
