"""Trial orchestration and the four simulation ablations.

One trial: scripted demo -> compress -> distort -> (residual correct) ->
clamp to workspace -> split at contact -> grasp search -> task search.
Results are aggregated per (ablation, cell, task) into ``results.csv``.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .compress import CompressionSpec, squishe
from .core import NoContact, NoTask, Trajectory, TrajectoryKind, ViewError, segment_prior
from .grasp import ExploitationPolicy, build_region, grasp_search
from .residual import ResidualDataset, ResidualModel, correct, train
from .reward import align_tracks, pixel_tolerance, waypoint_rewards
from .sim import (Demo, SimWorld, TanhNoiseField, TaskKind, TaskSpec, default_task, gaussian_distort, rollout,
                  synth_demo, tanh_distort, world_at)
from .task import task_search, unified_search

CSV_HEADER = ["ablation", "cell", "task", "trials", "success_rate", "se_success", "mean_rollouts", "se_rollouts"]
TASKS = ("pick", "push", "move")


@dataclass
class RunConfig:
    task: str = "pick"
    noise: str = "gaussian"
    sigma: float = 0.15
    compression: str = "squishe"
    max_error: float = 0.01
    rate_hz: float = 20.0
    M: int = 30
    k: int = 3
    gamma: float = 5.0
    epsilon: float = 0.04
    alpha: float = 0.3
    delta: float = 0.1
    delta_min: float = 0.05
    epsilon_task: float = 0.45
    grasp_budget: int = 60
    task_budget: int = 40
    exploration: str = "split"
    optimizer: str = "gp"
    high_level: str = "regularized"
    stop: str = "both"
    residual: bool = False
    residual_train_tasks: int = 50
    object_x: float = 0.6
    object_y: float = 0.1
    randomize_object: bool = False
    trials: int = 50
    seed: int = 0
    workers: int = 1
    out: str = "runs"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.grasp_budget < 1 or self.task_budget < 1:
            raise ValueError("budgets must be >= 1")
        if self.noise not in ("gaussian", "tanh", "none"):
            raise ValueError(f"unknown noise model {self.noise!r}")
        if self.compression not in ("squishe", "rate", "none"):
            raise ValueError(f"unknown compression {self.compression!r}")
        if self.exploration not in ("split", "unified"):
            raise ValueError(f"unknown exploration {self.exploration!r}")
        TaskKind(self.task)

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrialRecord:
    seed: int
    success: bool
    rollouts: int
    grasp_rollouts: int
    task_rollouts: int
    seconds: float
    ablation: str = ""
    cell: str = ""
    task: str = ""
    error: str = ""
    grasp_point_missed: bool = False
    prior_error: float = float("nan")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def trial_seed(base_seed: int, ablation: str, cell, trial: int) -> int:
    """Stable 63-bit seed from the trial coordinates."""
    key = f"{base_seed}|{ablation}|{cell}|{trial}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


# -- prior construction ----------------------------------------------------

def downsample(traj: Trajectory, rate_hz: float, source_hz: float = 20.0) -> Trajectory:
    """Keep every n-th frame plus both endpoints; contact points are not protected."""
    step = max(1, int(round(source_hz / rate_hz)))
    idx = sorted(set(range(0, len(traj), step)) | {len(traj) - 1})
    return Trajectory(tuple(traj[i] for i in idx), TrajectoryKind.COMPRESSED)


def compress_prior(traj: Trajectory, cfg: RunConfig) -> Trajectory:
    if cfg.compression == "squishe":
        return squishe(traj, CompressionSpec.error(cfg.max_error))
    if cfg.compression == "rate":
        return downsample(traj, cfg.rate_hz)
    return Trajectory(traj.waypoints, TrajectoryKind.COMPRESSED)


def distort(traj: Trajectory, cfg: RunConfig, seed: int, field: TanhNoiseField | None = None) -> Trajectory:
    if cfg.noise == "gaussian":
        return gaussian_distort(traj, cfg.sigma, seed)
    if cfg.noise == "tanh":
        return tanh_distort(traj, field or TanhNoiseField.default())
    return traj


def sample_world(rng) -> SimWorld:
    """Object location for the randomized-world ablation."""
    return world_at(float(rng.uniform(0.45, 0.75)), float(rng.uniform(-0.25, 0.15)))


# -- one trial -------------------------------------------------------------

@dataclass
class TrialOutcome:
    record: TrialRecord
    prior: Trajectory | None = None
    solved: Trajectory | None = None
    free_index: list = field(default_factory=list)
    episodes: list = field(default_factory=list)


class Evaluator:
    """Rollout + reward callback that counts and optionally logs episodes."""

    def __init__(self, world: SimWorld, task: TaskSpec, demo: Demo, log: list | None = None, seed: int = 0):
        self.world, self.task, self.demo = world, task, demo
        self.count = 0
        self.log = log
        self.seed = seed

    def __call__(self, traj: Trajectory):
        res = rollout(self.world, traj, self.task, self.count)
        self.count += 1
        human = align_tracks(self.demo.track, self.demo.times, traj.times)
        rew = waypoint_rewards(human, res.object_track)
        if self.log is not None:
            rec = res.to_dict()
            rec["seed"] = self.seed
            rec["rewards"] = list(rew.values)
            self.log.append(rec)
        return res, rew


def run_trial(cfg: RunConfig, seed: int, world: SimWorld | None = None, task: TaskSpec | None = None,
              model: ResidualModel | None = None, log_episodes: bool = False) -> TrialOutcome:
    """Full pipeline for one seeded trial; module errors become failed records."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    if world is None:
        world = sample_world(rng) if cfg.randomize_object else world_at(cfg.object_x, cfg.object_y)
    task = task or default_task(cfg.task, world)
    episodes = [] if log_episodes else None
    rec = TrialRecord(seed, False, 0, 0, 0, 0.0, task=task.kind.value)
    try:
        demo = synth_demo(world, task)
        compressed = compress_prior(demo.traj, cfg)
        raw_prior = distort(compressed, cfg, int(rng.integers(2 ** 63)))
        prior = correct(model, raw_prior) if model is not None else raw_prior
        prior = world.clamp(prior)
        rec.prior_error = float(np.linalg.norm(prior.positions - compressed.positions, axis=1).mean())
        onset = int(np.flatnonzero(demo.traj.contacts)[0])
        rec.grasp_point_missed = not any(abs(w.t - demo.traj[onset].t) < 1e-9 for w in compressed)
        obj3d = [demo.object_positions[int(round(w.t * 20.0))] for w in prior]
        seg = segment_prior(prior, obj3d)
    except (NoContact, NoTask, ViewError) as exc:
        rec.error = type(exc).__name__
        rec.seconds = time.perf_counter() - t0
        return TrialOutcome(rec, episodes=episodes or [])

    ev = Evaluator(world, task, demo, episodes, seed)
    g = seg.grasp_index
    obj_at = lambda w: demo.object_positions[int(round(w.t * 20.0))]
    tols = [pixel_tolerance(world.cam, obj_at(w), task.success_tol) for w in seg.task]
    region = build_region(seg.grasp[g], seg.object_at_grasp, cfg.delta, cfg.delta_min).clip(world.lo, world.hi)
    bounds = (world.lo, world.hi)
    sub_seed = int(rng.integers(2 ** 63))
    if cfg.exploration == "unified":
        res = unified_search(list(prior[:g]), (region.lo, region.hi), prior[g], seg.task, ev,
                             cfg.grasp_budget + cfg.task_budget, sub_seed, cfg.epsilon_task, bounds, tols,
                             cfg.stop, cfg.optimizer)
        rec.success = res.success
        rec.grasp_rollouts, rec.task_rollouts = 0, res.rollouts
        solved = res.trajectory
    else:
        policy = ExploitationPolicy(cfg.gamma, cfg.epsilon, cfg.alpha)
        gres = grasp_search(region, seg.grasp, ev, policy, cfg.M, cfg.grasp_budget, sub_seed, cfg.k,
                            optimizer=cfg.optimizer, high_level=cfg.high_level)
        rec.grasp_rollouts = gres.rollouts
        solved = None
        if gres.success:
            prefix = list(gres.trajectory[:-1])
            tres = task_search(prefix, seg.task, ev, cfg.task_budget, sub_seed + 1, cfg.epsilon_task, bounds,
                               tols, cfg.stop, cfg.optimizer)
            rec.task_rollouts = tres.rollouts
            rec.success = tres.success
            solved = tres.trajectory
    rec.rollouts = rec.grasp_rollouts + rec.task_rollouts
    rec.seconds = time.perf_counter() - t0
    free = list(range(g, len(prior)))
    return TrialOutcome(rec, raw_prior, solved if rec.success else None, free, episodes or [])


# -- batches ---------------------------------------------------------------

def _run_cell(cfg: RunConfig, ablation: str, cell: str, log_episodes: bool, model=None,
              worlds: list | None = None) -> list[TrialOutcome]:
    out = []
    for i in range(cfg.trials):
        seed = trial_seed(cfg.seed, ablation, f"{cell}|{cfg.task}", i)
        world = worlds[i] if worlds is not None else None
        o = run_trial(cfg, seed, world=world, model=model, log_episodes=log_episodes)
        o.record.ablation, o.record.cell = ablation, cell
        out.append(o)
    return out


def _run_cell_parallel(args):
    cfg, ablation, cell, log_episodes = args
    return _run_cell(cfg, ablation, cell, log_episodes)


def summarize(records: list[TrialRecord]) -> dict:
    """Success rate and mean rollouts with standard errors (failures count their rollouts)."""
    n = len(records)
    s = np.array([r.success for r in records], dtype=float)
    k = np.array([r.rollouts for r in records], dtype=float)
    se = lambda x: float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return {"trials": n, "success_rate": float(s.mean()), "se_success": se(s),
            "mean_rollouts": float(k.mean()), "se_rollouts": se(k)}


def rows_for(ablation: str, cell: str, task: str, records: list[TrialRecord]) -> dict:
    row = {"ablation": ablation, "cell": cell, "task": task}
    row.update(summarize(records))
    return row


def csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        r = dict(r)
        for key in ("success_rate", "se_success", "mean_rollouts", "se_rollouts"):
            r[key] = f"{r[key]:.6f}"
        w.writerow(r)
    return buf.getvalue()


@dataclass
class AblationResult:
    rows: list
    outcomes: dict

    def records(self, cell: str, task: str) -> list[TrialRecord]:
        return [o.record for o in self.outcomes[(cell, task)]]

    def row(self, cell: str, task: str) -> dict:
        for r in self.rows:
            if r["cell"] == cell and r["task"] == task:
                return r
        raise KeyError((cell, task))


def run_cells(name: str, cells: list[tuple[str, RunConfig]], log_episodes: bool = False,
              workers: int = 1) -> AblationResult:
    jobs = [(cfg, name, cell, log_episodes) for cell, cfg in cells]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_cell_parallel, jobs))
    else:
        results = [_run_cell_parallel(j) for j in jobs]
    rows, outcomes = [], {}
    for (cell, cfg), res in zip(cells, results):
        outcomes[(cell, cfg.task)] = res
        rows.append(rows_for(name, cell, cfg.task, [o.record for o in res]))
    return AblationResult(rows, outcomes)


def _tasks(cfg: RunConfig, tasks) -> tuple:
    return tuple(tasks) if tasks is not None else TASKS


def ablate_noise(cfg: RunConfig, sigmas=(0.05, 0.10, 0.15, 0.20), tasks=None, **kw) -> AblationResult:
    cells = [(f"sigma={s:.2f}", cfg.replace(task=t, noise="gaussian", sigma=s))
             for t in _tasks(cfg, tasks) for s in sigmas]
    return run_cells("noise", cells, **kw)


def ablate_compression(cfg: RunConfig, rates=(5.0, 10.0, 20.0), tasks=("pick",), **kw) -> AblationResult:
    cells = []
    for t in tasks:
        cells.append(("squishe", cfg.replace(task=t, compression="squishe")))
        cells += [(f"{r:g}hz", cfg.replace(task=t, compression="rate", rate_hz=r)) for r in rates]
    return run_cells("compression", cells, **kw)


def ablate_exploration(cfg: RunConfig, tasks=None, **kw) -> AblationResult:
    cells = [(mode, cfg.replace(task=t, exploration=mode)) for t in _tasks(cfg, tasks) for mode in ("split", "unified")]
    return run_cells("exploration", cells, **kw)


# -- residual --------------------------------------------------------------

def collect_pairs(dataset: ResidualDataset, outcome: TrialOutcome) -> int:
    """Add (prior, solved) pairs for every explored waypoint of a solved trial."""
    if outcome.solved is None:
        return 0
    prior, solved = outcome.prior.positions, outcome.solved.positions
    for i in outcome.free_index:
        dataset.add(prior[i], solved[i])
    return len(outcome.free_index)


def train_residual(cfg: RunConfig, tasks=TASKS, log_episodes=False):
    """Solve ``cfg.residual_train_tasks`` randomized tasks and fit the residual on them."""
    base = cfg.replace(noise="tanh", randomize_object=True, residual=False)
    dataset = ResidualDataset()
    outcomes = []
    for i in range(cfg.residual_train_tasks):
        t = tasks[i % len(tasks)]
        seed = trial_seed(cfg.seed, "residual-train", t, i)
        o = run_trial(base.replace(task=t), seed, log_episodes=log_episodes)
        o.record.ablation, o.record.cell = "residual", "train"
        outcomes.append(o)
        collect_pairs(dataset, o)
    model = train(dataset, rng_seed=cfg.seed) if len(dataset) else None
    return model, dataset, outcomes


def ablate_residual(cfg: RunConfig, tasks=None, log_episodes: bool = False, model=None, **_) -> AblationResult:
    """Evaluate fresh object locations with and without the trained (frozen) residual."""
    outcomes = {}
    train_out = []
    if model is None:
        model, _, train_out = train_residual(cfg, log_episodes=log_episodes)
    base = cfg.replace(noise="tanh", randomize_object=True)
    rows = []
    for t in _tasks(cfg, tasks):
        for cell, m in (("without", None), ("with", model)):
            res = []
            for i in range(cfg.trials):
                # same world seeds in both cells so the comparison is paired
                seed = trial_seed(cfg.seed, "residual-eval", t, i)
                o = run_trial(base.replace(task=t, residual=m is not None), seed, model=m, log_episodes=log_episodes)
                o.record.ablation, o.record.cell = "residual", cell
                res.append(o)
            outcomes[(cell, t)] = res
            rows.append(rows_for("residual", cell, t, [o.record for o in res]))
    outcomes[("train", "all")] = train_out
    return AblationResult(rows, outcomes)


def run_view(cfg: RunConfig, log_episodes: bool = False) -> AblationResult:
    """Plain runs of one configuration; with ``residual`` on, retrain after each solved trial."""
    if not cfg.residual:
        return run_cells("run", [("default", cfg)], log_episodes=log_episodes, workers=1)
    dataset = ResidualDataset()
    model = None
    res = []
    for i in range(cfg.trials):
        seed = trial_seed(cfg.seed, "run", f"default|{cfg.task}", i)
        o = run_trial(cfg, seed, model=model, log_episodes=log_episodes)
        o.record.ablation, o.record.cell = "run", "default"
        res.append(o)
        if collect_pairs(dataset, o):
            model = train(dataset, rng_seed=cfg.seed)
    return AblationResult([rows_for("run", "default", cfg.task, [o.record for o in res])], {("default", cfg.task): res})


# -- persistence -----------------------------------------------------------

def write_outputs(result: AblationResult, cfg: RunConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(csv_text(result.rows))
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    with open(out / "episodes.jsonl", "w") as fh:
        for (cell, task), outs in result.outcomes.items():
            for o in outs:
                fh.write(json.dumps({"type": "trial", **o.record.to_dict()}) + "\n")
                for ep in o.episodes:
                    fh.write(json.dumps({"type": "episode", "cell": cell, "task": task, **ep}) + "\n")
    return out
