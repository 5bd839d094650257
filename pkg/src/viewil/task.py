"""Post-grasp refinement: one optimizer per task waypoint sharing each rollout,
plus the whole-trajectory joint optimizer used as the ablation baseline."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Trajectory, TrajectoryKind, Waypoint
from .surrogate import make_optimizer

STOP_MODES = ("success", "pixel", "both", "either")


@dataclass
class TaskResult:
    trajectory: Trajectory
    rollouts: int
    success: bool
    rewards: np.ndarray
    log: list = field(default_factory=list)


def _tolerances(tol, n) -> np.ndarray:
    if tol is None:
        return np.full(n, np.inf)
    t = np.asarray(tol, dtype=float)
    return np.full(n, float(t)) if t.ndim == 0 else t


def _done(stop: str, success: bool, pixel_ok: bool) -> bool:
    if stop == "success":
        return success
    if stop == "pixel":
        return pixel_ok
    if stop == "both":
        return success and pixel_ok
    return success or pixel_ok


def _assemble(prefix: Sequence[Waypoint], task_prior: Trajectory, task_pos: np.ndarray) -> Trajectory:
    wps = list(prefix) + [w.moved(p) for w, p in zip(task_prior, task_pos)]
    return Trajectory(tuple(wps), TrajectoryKind.SOLVED)


def task_search(prefix: Sequence[Waypoint], task_prior: Trajectory, env_eval: Callable, budget: int = 40,
                rng_seed=None, epsilon: float = 0.3, bounds=None, tolerances=None, stop: str = "both",
                optimizer: str = "gp") -> TaskResult:
    """Refine the task waypoints after the grasp.

    ``prefix`` is the solved grasp part (ending with the grasp waypoint);
    ``task_prior`` holds the waypoints after it. Every iteration asks each
    unfrozen optimizer for its waypoint, runs one rollout of the assembled
    trajectory and tells each optimizer only its own waypoint's reward.
    A waypoint freezes once its reward is within its pixel tolerance.
    """
    if stop not in STOP_MODES:
        raise ValueError(f"stop must be one of {STOP_MODES}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(rng_seed)
    n = len(task_prior)
    off = len(prefix)
    tol = _tolerances(tolerances, n)
    prior = task_prior.positions
    lo_ws, hi_ws = (np.full(3, -np.inf), np.full(3, np.inf)) if bounds is None else map(np.asarray, bounds)
    opts = []
    for p in prior:
        lo = np.maximum(p - epsilon, lo_ws)
        hi = np.minimum(p + epsilon, hi_ws)
        opts.append(make_optimizer(optimizer, lo, hi, int(rng.integers(2 ** 31))))
    current = np.clip(prior, [o.lo for o in opts], [o.hi for o in opts])
    frozen = np.zeros(n, dtype=bool)
    log = []
    best_total, best_traj, best_r = -np.inf, None, None
    used = 0
    while used < budget:
        if used > 0:
            for t in range(n):
                if not frozen[t]:
                    current[t] = opts[t].ask()
        traj = _assemble(prefix, task_prior, current)
        res, rew = env_eval(traj)
        used += 1
        r = rew.as_array()[off:]
        for t in range(n):
            if not frozen[t]:
                opts[t].tell(current[t], r[t])
        pixel_ok = bool(np.all(np.abs(r) <= tol))
        frozen |= np.abs(r) <= tol
        log.append({"rollout": used, "proposals": current.tolist(), "rewards": r.tolist(),
                    "success": res.success, "pixel_ok": pixel_ok})
        total = float(r.sum())
        if total > best_total or res.success:
            best_total, best_traj, best_r = total, traj, r
        if _done(stop, res.success, pixel_ok):
            return TaskResult(traj, used, res.success, r, log)
        if frozen.all():
            frozen[:] = False
    return TaskResult(best_traj, used, False, best_r, log)


def unified_search(prefix: Sequence[Waypoint], grasp_box, prior_grasp: Waypoint, task_prior: Trajectory,
                   env_eval: Callable, budget: int = 100, rng_seed=None, epsilon: float = 0.3, bounds=None,
                   tolerances=None, stop: str = "both", optimizer: str = "gp") -> TaskResult:
    """Baseline: one joint optimizer over the grasp and every task waypoint.

    The objective is the reward total over grasp and task waypoints.
    ``prefix`` holds the waypoints before the grasp; ``grasp_box`` is the
    (lo, hi) search box for the grasp waypoint.
    """
    if stop not in STOP_MODES:
        raise ValueError(f"stop must be one of {STOP_MODES}")
    rng = np.random.default_rng(rng_seed)
    n = len(task_prior)
    tol = _tolerances(tolerances, n)
    lo_ws, hi_ws = (np.full(3, -np.inf), np.full(3, np.inf)) if bounds is None else map(np.asarray, bounds)
    prior = task_prior.positions
    g_lo, g_hi = (np.asarray(b, dtype=float) for b in grasp_box)
    lo = np.concatenate([g_lo] + [np.maximum(p - epsilon, lo_ws) for p in prior])
    hi = np.concatenate([g_hi] + [np.minimum(p + epsilon, hi_ws) for p in prior])
    opt = make_optimizer(optimizer, lo, hi, int(rng.integers(2 ** 31)))
    x = np.clip(np.concatenate([prior_grasp.position, prior.ravel()]), lo, hi)
    off = len(prefix)
    head = list(prefix) + [prior_grasp]
    log = []
    best = (-np.inf, None, None)
    used = 0
    while used < budget:
        if used > 0:
            x = opt.ask()
        head[-1] = prior_grasp.moved(x[:3])
        traj = _assemble(head, task_prior, x[3:].reshape(n, 3))
        res, rew = env_eval(traj)
        used += 1
        r_all = rew.as_array()[off:]
        total = float(r_all.sum())
        opt.tell(x, total)
        r = r_all[1:]
        pixel_ok = bool(np.all(np.abs(r) <= tol))
        log.append({"rollout": used, "x": x.tolist(), "reward": total, "success": res.success,
                    "pixel_ok": pixel_ok})
        if total > best[0] or res.success:
            best = (total, traj, r)
        if _done(stop, res.success, pixel_ok):
            return TaskResult(traj, used, res.success, r, log)
    return TaskResult(best[1], used, False, best[2], log)
