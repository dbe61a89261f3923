"""End-to-end experiment runner: config, trial loop, CSV logging, checkpoints.

One trial wires the full online loop: draw (or replay) a constraint, update
every learner in the dyadic ensemble, combine via the adaptive weights,
update the weights from the same step's losses, and periodically score the
combined metric (leave-one-out k-NN error, k-means NMI) against the active
ground-truth partition. Nonadaptive single-learner arms run on the same
stream for comparison. Everything is reproducible from (config, seed).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .comid import ComidLearner, comid_step, new_learner
from .driftsim import DriftScenario, DriftSegment, ScenarioStream, generate_dataset
from .evaluation import embedding_from_metric, kmeans, knn_error, nmi
from .metric import Constraint, LossConfig, MetricState, composite_loss, hinge_loss
from .ocelad import EnsembleWeights, LearnerOutput, empty_weights, ocelad_step, sync_active
from .rice import DyadicInterval, RiceConfig, RiceEnsemble, active_intervals

CHECKPOINT_VERSION = 1

ARM_RICE = "rice_ocelad"
ARM_LOW = "comid_low"
ARM_HIGH = "comid_high"

STEP_FIELDS = ("trial", "t", "combined_loss", "knn_error", "nmi", "active_levels", "weights_json")
AGGREGATE_FIELDS = ("t", "mean_knn_error", "p_nmi_exceeds", "mean_combined_loss")
DRIFT_FIELDS = ("t", "drift_rate")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


class ConfigError(ValueError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass
class DatasetConfig:
    n_pts: int = 500
    n: int = 10
    k_sub: int = 3
    proportions_a: tuple = (0.5, 0.2, 0.3)
    proportions_b: tuple = (0.5, 0.2, 0.3)
    blob_scale: float = 0.6
    center_scale: float = 3.0
    noise_scale: float = 6.0


@dataclass
class LearnerParams:
    eta0: float = 1e-3
    i0: int = 1
    max_level: int = 14
    rho: float = 0.05
    regularizer: str = "nuclear"
    mu0: float = 2.0

    def loss_config(self) -> LossConfig:
        return LossConfig(self.rho, self.regularizer)

    def rice_config(self) -> RiceConfig:
        return RiceConfig(
            eta0=self.eta0, i0=self.i0, max_level=self.max_level,
            mu0=self.mu0, loss=self.loss_config(),
        )


@dataclass
class EvalParams:
    k: int = 5
    n_clusters: int = 3
    d_embed: int | None = None
    nmi_threshold: float = 0.8
    eval_every: int = 10
    kmeans_restarts: int = 10


@dataclass
class ArmsConfig:
    rice_ocelad: bool = True
    comid_low: float | None = 1e-6
    comid_high: float | None = 3e-3

    def names(self) -> list[str]:
        out = []
        if self.rice_ocelad:
            out.append(ARM_RICE)
        if self.comid_low is not None:
            out.append(ARM_LOW)
        if self.comid_high is not None:
            out.append(ARM_HIGH)
        return out


# the paper-profile drift schedule at desk scale: long static phase on A,
# switch to B with moderate / fast / moderate rotation drift, revert to A
# with slow drift
DEFAULT_SEGMENTS = (
    {"steps": 2000, "partition": "a", "rate": 0.0},
    {"steps": 500, "partition": "b", "rate": 1e-2},
    {"steps": 300, "partition": "b", "rate": 5e-2},
    {"steps": 500, "partition": "b", "rate": 1e-2},
    {"steps": 900, "partition": "a", "rate": 1e-3},
)


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    segments: tuple = DEFAULT_SEGMENTS
    learner: LearnerParams = field(default_factory=LearnerParams)
    eval: EvalParams = field(default_factory=EvalParams)
    arms: ArmsConfig = field(default_factory=ArmsConfig)
    trials: int = 20
    seed: int = 0
    balanced_pairs: bool = True
    comparator_mu: float = 2.0
    out_dir: str = "out"
    workers: int = 1  # parallel trial workers; results are scheduling-independent

    def drift_segments(self) -> tuple[DriftSegment, ...]:
        return tuple(
            DriftSegment(int(s["steps"]), str(s["partition"]), float(s["rate"]))
            for s in self.segments
        )

    def total_steps(self) -> int:
        return sum(int(s["steps"]) for s in self.segments)

    def d_embed(self) -> int:
        return self.eval.d_embed if self.eval.d_embed is not None else self.dataset.n

    def validate(self) -> None:
        ds, ev = self.dataset, self.eval
        try:
            if 2 * ds.k_sub > ds.n:
                raise ConfigError(f"dataset: need 2*k_sub <= n, got k_sub={ds.k_sub}, n={ds.n}")
            if not 1 <= ev.k < ds.n_pts:
                raise ConfigError(f"eval.k={ev.k} out of range for n_pts={ds.n_pts}")
            if not 1 <= ev.n_clusters <= ds.n_pts:
                raise ConfigError(f"eval.n_clusters={ev.n_clusters} out of range")
            if not 1 <= self.d_embed() <= ds.n:
                raise ConfigError(f"eval.d_embed={ev.d_embed} out of range for n={ds.n}")
            if ev.eval_every < 1:
                raise ConfigError(f"eval.eval_every must be >= 1, got {ev.eval_every}")
            if self.trials < 1:
                raise ConfigError(f"trials must be >= 1, got {self.trials}")
            if self.workers < 1:
                raise ConfigError(f"workers must be >= 1, got {self.workers}")
            if self.seed < 0:
                raise ConfigError(f"seed must be >= 0, got {self.seed}")
            for arm, eta in ((ARM_LOW, self.arms.comid_low), (ARM_HIGH, self.arms.comid_high)):
                if eta is not None and not eta > 0:
                    raise ConfigError(f"arms.{arm.split('_')[1]} rate must be > 0, got {eta}")
            if not self.arms.names():
                raise ConfigError("no arms enabled")
            # constructor-level validation of the remaining fields
            self.learner.rice_config()
            self.drift_segments()
            for p in (ds.proportions_a, ds.proportions_b):
                if abs(sum(p) - 1.0) > 1e-9 or min(p) <= 0:
                    raise ConfigError(f"dataset proportions must be positive and sum to 1: {p}")
        except ConfigError:
            raise
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e


def _merge(defaults, payload: dict, path: str):
    out = asdict(defaults) if not isinstance(defaults, dict) else dict(defaults)
    for key, val in payload.items():
        if key not in out:
            raise ConfigError(f"unknown config key {path}{key}")
        out[key] = val
    return out


def config_from_dict(payload: dict) -> ExperimentConfig:
    payload = dict(payload or {})
    cfg = ExperimentConfig()
    known = {f for f in cfg.__dataclass_fields__}
    for key in payload:
        if key not in known:
            raise ConfigError(f"unknown config key {key}")
    if "dataset" in payload:
        cfg.dataset = DatasetConfig(**_merge(cfg.dataset, payload["dataset"], "dataset."))
        cfg.dataset.proportions_a = tuple(cfg.dataset.proportions_a)
        cfg.dataset.proportions_b = tuple(cfg.dataset.proportions_b)
    if "segments" in payload:
        cfg.segments = tuple(payload["segments"])
    if "learner" in payload:
        cfg.learner = LearnerParams(**_merge(cfg.learner, payload["learner"], "learner."))
    if "eval" in payload:
        cfg.eval = EvalParams(**_merge(cfg.eval, payload["eval"], "eval."))
    if "arms" in payload:
        cfg.arms = ArmsConfig(**_merge(cfg.arms, payload["arms"], "arms."))
    for key in ("trials", "seed", "balanced_pairs", "comparator_mu", "out_dir", "workers"):
        if key in payload:
            setattr(cfg, key, payload[key])
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        payload = yaml.safe_load(fh)
    if payload is None:
        payload = {}
    if not isinstance(payload, dict):
        raise ConfigError(f"config root must be a mapping, got {type(payload).__name__}")
    return config_from_dict(payload)


@dataclass
class StepRecord:
    trial: int
    t: int
    combined_loss: float
    knn_error: float
    nmi: float
    active_levels: str
    weights: dict

    def to_row(self) -> list:
        return [
            self.trial, self.t, _fmt(self.combined_loss), _fmt(self.knn_error),
            _fmt(self.nmi), self.active_levels,
            json.dumps({str(k): self.weights[k] for k in sorted(self.weights)}),
        ]


@dataclass
class ArmTrace:
    """Everything one arm produced in one trial."""

    records: list = field(default_factory=list)
    losses: np.ndarray | None = None  # composite f_t at the arm's estimate
    final_state: MetricState | None = None


@dataclass
class TrialResult:
    trial: int
    arms: dict
    gt_change: np.ndarray
    stream_x: np.ndarray
    stream_z: np.ndarray
    stream_y: np.ndarray
    final_checkpoint: dict

    def stream_uy(self) -> tuple[np.ndarray, np.ndarray]:
        """(U, Y) arrays for batch comparator computations."""
        return self.stream_x - self.stream_z, self.stream_y


def _trial_seeds(seed: int, trial: int) -> dict:
    root = np.random.SeedSequence((seed, trial))
    names = ("dataset", "scenario", "eval_rice", "eval_low", "eval_high")
    return dict(zip(names, root.generate_state(len(names))))


class _RiceArm:
    def __init__(self, cfg: ExperimentConfig, eval_seed):
        self.loss_cfg = cfg.learner.loss_config()
        self.rice_cfg = cfg.learner.rice_config()
        self.ens = RiceEnsemble(cfg.dataset.n, self.rice_cfg)
        self.weights = sync_active(
            empty_weights(), active_intervals(1, self.rice_cfg.i0, self.rice_cfg.max_level)
        )
        self.eval_rng = np.random.default_rng(eval_seed)
        self.estimate: MetricState | None = None
        self.combine_weights = self.weights  # weights used for the latest estimate

    def step(self, t: int, c: Constraint) -> float:
        outputs = self.ens.step(t, c)
        louts = [LearnerOutput(iv, st, hinge_loss(st, c)) for iv, st in outputs]
        nxt = active_intervals(t + 1, self.rice_cfg.i0, self.rice_cfg.max_level)
        self.combine_weights = self.weights
        self.estimate, self.weights = ocelad_step(self.weights, louts, nxt)
        return composite_loss(self.estimate, c, self.loss_cfg)

    def level_weights(self) -> dict:
        return {iv.level: w for iv, w in sorted(self.combine_weights.entries.items())}

    def active_levels(self) -> str:
        return "|".join(str(iv.level) for iv in sorted(self.ens.active))

    def state_dict(self) -> dict:
        return {
            "ensemble": self.ens.state_dict(),
            "weights": [
                [iv.level, iv.start, iv.end, w] for iv, w in sorted(self.weights.entries.items())
            ],
            "estimate": {"M": self.estimate.M.tolist(), "mu": self.estimate.mu}
            if self.estimate is not None
            else None,
            "eval_rng": self.eval_rng.bit_generator.state,
        }

    def load_state_dict(self, payload: dict) -> None:
        self.ens = RiceEnsemble.from_state_dict(payload["ensemble"], self.rice_cfg)
        self.weights = EnsembleWeights(
            {DyadicInterval(int(l), int(s), int(e)): float(w) for l, s, e, w in payload["weights"]}
        )
        if payload["estimate"] is not None:
            M = np.asarray(payload["estimate"]["M"], dtype=np.float64)
            M.flags.writeable = False
            self.estimate = MetricState(M, float(payload["estimate"]["mu"]))
        self.eval_rng.bit_generator.state = payload["eval_rng"]


class _FixedArm:
    def __init__(self, n: int, eta: float, loss_cfg: LossConfig, mu0: float, eval_seed):
        self.loss_cfg = loss_cfg
        self.learner = new_learner(n, eta, loss_cfg, mu0)
        self.eval_rng = np.random.default_rng(eval_seed)

    @property
    def estimate(self) -> MetricState:
        return self.learner.state

    def step(self, t: int, c: Constraint) -> float:
        self.learner = comid_step(self.learner, c)
        return composite_loss(self.learner.state, c, self.loss_cfg)

    def level_weights(self) -> dict:
        return {}

    def active_levels(self) -> str:
        return ""

    def state_dict(self) -> dict:
        return {
            "M": self.learner.state.M.tolist(),
            "mu": self.learner.state.mu,
            "eval_rng": self.eval_rng.bit_generator.state,
        }

    def load_state_dict(self, payload: dict) -> None:
        M = np.asarray(payload["M"], dtype=np.float64)
        M.flags.writeable = False
        self.learner = ComidLearner(
            MetricState(M, float(payload["mu"])), self.learner.eta, self.loss_cfg
        )
        self.eval_rng.bit_generator.state = payload["eval_rng"]


def _build_arms(cfg: ExperimentConfig, seeds: dict) -> dict:
    arms = {}
    if cfg.arms.rice_ocelad:
        arms[ARM_RICE] = _RiceArm(cfg, seeds["eval_rice"])
    loss_cfg = cfg.learner.loss_config()
    if cfg.arms.comid_low is not None:
        arms[ARM_LOW] = _FixedArm(
            cfg.dataset.n, cfg.arms.comid_low, loss_cfg, cfg.learner.mu0, seeds["eval_low"]
        )
    if cfg.arms.comid_high is not None:
        arms[ARM_HIGH] = _FixedArm(
            cfg.dataset.n, cfg.arms.comid_high, loss_cfg, cfg.learner.mu0, seeds["eval_high"]
        )
    return arms


def _build_stream(cfg: ExperimentConfig, seeds: dict) -> ScenarioStream:
    ds = cfg.dataset
    data = generate_dataset(
        ds.n_pts, ds.n, ds.k_sub, ds.proportions_a, ds.proportions_b,
        blob_scale=ds.blob_scale, noise_scale=ds.noise_scale,
        seed=seeds["dataset"], center_scale=ds.center_scale,
    )
    scenario = DriftScenario(cfg.drift_segments(), seed=int(seeds["scenario"]))
    return ScenarioStream(
        data, scenario, balanced=cfg.balanced_pairs, comparator_mu=cfg.comparator_mu
    )


def run_trial(
    cfg: ExperimentConfig,
    trial: int,
    constraints_override=None,
    checkpoint_at: int | None = None,
    checkpoint_path=None,
    resume_from=None,
) -> TrialResult:
    """One full pass of the online loop for every enabled arm.

    On resume, per-step arrays before the checkpointed step stay zero; only
    the tail of the trajectory is recomputed (and is bit-identical to an
    uninterrupted run).
    """
    if resume_from is not None and constraints_override is not None:
        raise ValueError("resume_from and constraints_override cannot be combined")
    seeds = _trial_seeds(cfg.seed, trial)
    stream = _build_stream(cfg, seeds)
    arms = _build_arms(cfg, seeds)
    T = cfg.total_steps()
    start_t = 1
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        _restore_trial(payload, cfg, trial, stream, arms)
        start_t = int(payload["t"]) + 1
    losses = {name: np.zeros(T) for name in arms}
    gt_change = np.zeros(T)
    stream_x = np.zeros((T, cfg.dataset.n))
    stream_z = np.zeros((T, cfg.dataset.n))
    stream_y = np.zeros(T)
    records = {name: [] for name in arms}
    override = iter(constraints_override) if constraints_override is not None else None
    d_embed = cfg.d_embed()

    for t in range(start_t, T + 1):
        external = None
        if override is not None:
            try:
                external = next(override)
            except StopIteration:
                raise ValueError(
                    f"replay stream ended early: needed {T} constraints, got {t - 1}"
                ) from None
        c, snap = stream.step(external)
        gt_change[t - 1] = snap.gt_change
        stream_x[t - 1] = c.x
        stream_z[t - 1] = c.z
        stream_y[t - 1] = float(c.y)
        for name, arm in arms.items():
            losses[name][t - 1] = arm.step(t, c)
        if t % cfg.eval.eval_every == 0:
            for name, arm in arms.items():
                est = arm.estimate
                emb = embedding_from_metric(est.M, d_embed)
                err = knn_error(emb, snap.points, snap.labels, cfg.eval.k)
                emb_pts = emb.transform(snap.points)
                part = kmeans(
                    emb_pts, cfg.eval.n_clusters, arm.eval_rng,
                    n_restarts=cfg.eval.kmeans_restarts,
                )
                score = nmi(part, snap.labels)
                records[name].append(
                    StepRecord(
                        trial, t, float(losses[name][t - 1]), err, score,
                        arm.active_levels(), arm.level_weights(),
                    )
                )
        if checkpoint_at is not None and t == checkpoint_at:
            save_checkpoint(
                checkpoint_path,
                _trial_payload(cfg, trial, t, stream, arms),
            )
    traces = {
        name: ArmTrace(records[name], losses[name], arms[name].estimate) for name in arms
    }
    final = _trial_payload(cfg, trial, T, stream, arms)
    return TrialResult(trial, traces, gt_change, stream_x, stream_z, stream_y, final)


def _trial_payload(cfg, trial, t, stream, arms) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "seed": cfg.seed,
        "trial": trial,
        "t": t,
        "n": cfg.dataset.n,
        "scenario": stream.state_dict(),
        "arms": {name: arm.state_dict() for name, arm in arms.items()},
    }


def _restore_trial(payload, cfg, trial, stream, arms) -> None:
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')}")
    if int(payload.get("n", -1)) != cfg.dataset.n:
        raise CheckpointError(
            f"checkpoint dimension {payload.get('n')} does not match config n={cfg.dataset.n}"
        )
    if int(payload.get("trial", -1)) != trial:
        raise CheckpointError(
            f"checkpoint is for trial {payload.get('trial')}, requested trial {trial}"
        )
    if set(payload.get("arms", {})) != set(arms):
        raise CheckpointError("checkpoint arms do not match configured arms")
    try:
        stream.load_state_dict(payload["scenario"])
        for name, arm in arms.items():
            arm.load_state_dict(payload["arms"][name])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed checkpoint payload: {e}") from e


def save_checkpoint(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_checkpoint(path) -> dict:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or "version" not in payload:
        raise CheckpointError(f"not a checkpoint file: {path}")
    return payload


def constraint_header(n: int) -> list[str]:
    return ["t", "y"] + [f"x_{i}" for i in range(n)] + [f"z_{i}" for i in range(n)]


def _write_constraint_stream(path, cfg: ExperimentConfig, res: TrialResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(constraint_header(cfg.dataset.n))
        for t in range(res.stream_y.shape[0]):
            row = [t + 1, int(res.stream_y[t])]
            row += [_fmt(v) for v in res.stream_x[t]]
            row += [_fmt(v) for v in res.stream_z[t]]
            w.writerow(row)


def ingest_constraints(path):
    """Yield validated Constraints from a constraint CSV, in file order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return
        if len(header) < 4 or header[:2] != ["t", "y"] or (len(header) - 2) % 2 != 0:
            raise ValueError(f"{path}: malformed constraint header {header[:4]}...")
        n = (len(header) - 2) // 2
        if header != constraint_header(n):
            raise ValueError(f"{path}: header does not match the constraint schema for n={n}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 + 2 * n:
                raise ValueError(
                    f"{path}:{lineno}: expected {2 + 2 * n} fields, got {len(row)}"
                )
            try:
                t = int(row[0])
                y = int(row[1])
                x = np.asarray([float(v) for v in row[2 : 2 + n]])
                z = np.asarray([float(v) for v in row[2 + n :]])
                yield Constraint(t, x, z, y)
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from e


def _write_steps_csv(path, traces: list[ArmTrace]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STEP_FIELDS)
        for trace in traces:
            for rec in trace.records:
                w.writerow(rec.to_row())


def _write_aggregate_csv(path, traces: list[ArmTrace], nmi_threshold: float) -> None:
    by_t: dict[int, list[StepRecord]] = {}
    for trace in traces:
        for rec in trace.records:
            by_t.setdefault(rec.t, []).append(rec)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_FIELDS)
        for t in sorted(by_t):
            recs = by_t[t]
            w.writerow(
                [
                    t,
                    _fmt(np.mean([r.knn_error for r in recs])),
                    _fmt(np.mean([r.nmi > nmi_threshold for r in recs])),
                    _fmt(np.mean([r.combined_loss for r in recs])),
                ]
            )


def _write_drift_csv(path, results: list[TrialResult]) -> None:
    change = np.mean([r.gt_change for r in results], axis=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DRIFT_FIELDS)
        for t, v in enumerate(change, start=1):
            w.writerow([t, _fmt(v)])


def _out_dir(cfg: ExperimentConfig, out_dir=None) -> Path:
    env = os.environ.get("METRICDRIFT_OUT_DIR")
    chosen = env or (out_dir if out_dir is not None else cfg.out_dir)
    return Path(chosen)


def _pool_trial(args) -> TrialResult:
    cfg, trial = args
    return run_trial(cfg, trial)


def run_experiment(cfg: ExperimentConfig, out_dir=None, constraints_override=None) -> dict:
    """Run all trials and emit the CSV artifacts plus a final checkpoint.

    `constraints_override` (an iterable of Constraint) turns the run into a
    single-trial replay of that stream; everything else still derives from
    (config, seed). Trials carry independent RNG streams keyed by the trial
    index, so parallel workers produce the same results as a serial run.
    Returns the in-memory TrialResults and the output path.
    """
    cfg.validate()
    out = _out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "constraints").mkdir(exist_ok=True)
    trials = 1 if constraints_override is not None else cfg.trials
    if constraints_override is None and cfg.workers > 1 and trials > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(cfg.workers, trials)) as pool:
            results = list(pool.map(_pool_trial, [(cfg, i) for i in range(trials)]))
    else:
        results = [
            run_trial(cfg, trial, constraints_override=constraints_override)
            for trial in range(trials)
        ]
    for trial, res in enumerate(results):
        _write_constraint_stream(out / "constraints" / f"trial_{trial:04d}.csv", cfg, res)
    for name in cfg.arms.names():
        arm_dir = out / name
        arm_dir.mkdir(exist_ok=True)
        _write_steps_csv(arm_dir / "steps.csv", [r.arms[name] for r in results])
        _write_aggregate_csv(
            arm_dir / "aggregate.csv", [r.arms[name] for r in results], cfg.eval.nmi_threshold
        )
    _write_drift_csv(out / "drift_profile.csv", results)
    save_checkpoint(out / "checkpoint.json", results[-1].final_checkpoint)
    return {"results": results, "out_dir": out}
