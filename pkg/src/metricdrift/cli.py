"""Command-line front end: run experiments, replay logged streams, self-test
the checkpoint machinery.

    metricdrift run <config.yaml> [--seed N] [--trials N] [--out-dir DIR]
    metricdrift replay <config.yaml> <constraints.csv> [--out-dir DIR]
    metricdrift checkpoint-test [<config.yaml>] [--seed N]

METRICDRIFT_OUT_DIR overrides the output directory (and nothing else).
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

import numpy as np

from .experiment import (
    CheckpointError,
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    ingest_constraints,
    load_config,
    run_experiment,
    run_trial,
)


def _load(path, seed, trials) -> ExperimentConfig:
    cfg = load_config(path)
    if seed is not None:
        cfg.seed = seed
    if trials is not None:
        cfg.trials = trials
    cfg.validate()
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args.config, args.seed, args.trials)
    out = run_experiment(cfg, out_dir=args.out_dir)
    print(f"[run] {cfg.trials} trial(s), {cfg.total_steps()} steps -> {out['out_dir']}")
    return 0


def _cmd_replay(args) -> int:
    cfg = _load(args.config, args.seed, None)
    constraints = list(ingest_constraints(args.constraints))
    out = run_experiment(cfg, out_dir=args.out_dir, constraints_override=constraints)
    print(f"[replay] {len(constraints)} constraints -> {out['out_dir']}")
    return 0


def _smoke_config(seed: int) -> ExperimentConfig:
    return config_from_dict(
        {
            "dataset": {"n_pts": 60, "n": 8, "k_sub": 3,
                        "proportions_a": [0.5, 0.5], "proportions_b": [0.5, 0.5]},
            "segments": [
                {"steps": 120, "partition": "a", "rate": 0.0},
                {"steps": 80, "partition": "b", "rate": 1e-2},
            ],
            "eval": {"k": 3, "n_clusters": 2, "eval_every": 10, "kmeans_restarts": 3},
            "trials": 1,
            "seed": seed,
        }
    )


def _records_equal(a, b) -> bool:
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        if ra.to_row() != rb.to_row():
            return False
    return True


def _cmd_checkpoint_test(args) -> int:
    cfg = _smoke_config(args.seed or 0) if args.config is None else _load(args.config, args.seed, 1)
    cfg.trials = 1
    T = cfg.total_steps()
    mid = T // 2
    with tempfile.TemporaryDirectory() as tmp:
        ckpt = Path(tmp) / "mid.json"
        full = run_trial(cfg, 0)
        run_trial(cfg, 0, checkpoint_at=mid, checkpoint_path=ckpt)
        resumed = run_trial(cfg, 0, resume_from=ckpt)
        ok = True
        for name, trace in full.arms.items():
            other = resumed.arms[name]
            tail_a = [r for r in trace.records if r.t > mid]
            tail_b = [r for r in other.records if r.t > mid]
            if not _records_equal(tail_a, tail_b):
                print(f"[checkpoint-test] FAIL: records diverge for arm {name}")
                ok = False
            if not (
                np.array_equal(trace.final_state.M, other.final_state.M)
                and trace.final_state.mu == other.final_state.mu
            ):
                print(f"[checkpoint-test] FAIL: final state diverges for arm {name}")
                ok = False
            if not np.array_equal(trace.losses[mid:], other.losses[mid:]):
                print(f"[checkpoint-test] FAIL: losses diverge for arm {name}")
                ok = False
    if ok:
        print(f"[checkpoint-test] PASS: resume at t={mid} matches uninterrupted run to t={T}")
        return 0
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metricdrift", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("config")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--trials", type=int, default=None)
    run_p.add_argument("--out-dir", default=None)
    run_p.set_defaults(func=_cmd_run)

    rep_p = sub.add_parser("replay", help="re-run a single trial from a recorded constraint CSV")
    rep_p.add_argument("config")
    rep_p.add_argument("constraints")
    rep_p.add_argument("--seed", type=int, default=None)
    rep_p.add_argument("--out-dir", default=None)
    rep_p.set_defaults(func=_cmd_replay)

    ck_p = sub.add_parser("checkpoint-test", help="round-trip the checkpoint machinery")
    ck_p.add_argument("config", nargs="?", default=None)
    ck_p.add_argument("--seed", type=int, default=None)
    ck_p.set_defaults(func=_cmd_checkpoint_test)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"[config error] {e}", file=sys.stderr)
        return 2
    except CheckpointError as e:
        print(f"[checkpoint error] {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as e:
        print(f"[error] {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
