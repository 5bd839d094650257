"""Deterministic kinematic manipulation simulator.

A point end-effector moves linearly between waypoints; a single object
attaches when a contact waypoint lands within ``grasp_radius`` of its
centre. There is no physics engine: everything is attach/detach plus a
small accidental-contact nudge, which keeps rollouts pure and fast.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernels
from .core import ObjectTrack, Trajectory, TrajectoryKind, ViewError, Waypoint
from .core import PixelPoint
from .ingest import CameraModel, Detection, DetectionFrame
from .reward import project_many


class Infeasible(ViewError):
    pass


class OutOfWorkspace(ViewError):
    """Raised only by callers that want strictness; rollout itself just flags it."""


FRAME_RATE = 20.0
DEFAULT_LO = (0.0, -0.5, 0.0)
DEFAULT_HI = (1.0, 0.5, 0.5)
DEFAULT_HOME = (0.3, -0.1, 0.3)


def default_camera() -> CameraModel:
    return CameraModel.looking_down((0.5, 0.0, 2.0))


@dataclass(frozen=True)
class SimWorld:
    object_pos: tuple[float, float, float]
    object_half_extent: float = 0.04
    table_height: float = 0.0
    grasp_radius: float = 0.04
    workspace_lo: tuple[float, float, float] = DEFAULT_LO
    workspace_hi: tuple[float, float, float] = DEFAULT_HI
    cam: CameraModel = field(default_factory=default_camera)
    knock_radius: float = 0.08
    nudge_max: float = 0.02
    home: tuple[float, float, float] = DEFAULT_HOME

    def __post_init__(self):
        for name in ("object_pos", "workspace_lo", "workspace_hi", "home"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.grasp_radius <= 0:
            raise ValueError("grasp_radius must be positive")
        if self.knock_radius < self.grasp_radius:
            raise ValueError("knock_radius must be >= grasp_radius")
        if not self.contains(self.object_pos):
            raise ValueError(f"object {self.object_pos} outside the workspace")

    @property
    def rest_z(self) -> float:
        return self.table_height + self.object_half_extent

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.workspace_lo)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.workspace_hi)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - 1e-9) and np.all(p <= self.hi + 1e-9))

    def clamp(self, traj: Trajectory) -> Trajectory:
        """Project every waypoint into the workspace box."""
        return traj.with_positions(np.clip(traj.positions, self.lo, self.hi))


def world_at(x: float, y: float, **kw) -> SimWorld:
    """World with the object resting on the table at (x, y)."""
    half = kw.get("object_half_extent", 0.04)
    table = kw.get("table_height", 0.0)
    return SimWorld((x, y, table + half), **kw)


class TaskKind(str, enum.Enum):
    PICK = "pick"
    PUSH = "push"
    MOVE = "move"


@dataclass(frozen=True)
class TaskSpec:
    kind: TaskKind
    goal_pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    lift_height: float = 0.10
    success_tol: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        object.__setattr__(self, "goal_pos", tuple(float(v) for v in self.goal_pos))
        if self.success_tol <= 0:
            raise ValueError("success_tol must be positive")


# Goal offsets from the object used when none is given.
PUSH_OFFSET = (0.15, 0.10)
MOVE_OFFSET = (-0.15, 0.20)


def default_task(kind, world: SimWorld) -> TaskSpec:
    kind = TaskKind(kind)
    ox, oy, _ = world.object_pos
    if kind is TaskKind.PUSH:
        goal = (ox + PUSH_OFFSET[0], oy + PUSH_OFFSET[1], world.rest_z)
    elif kind is TaskKind.MOVE:
        goal = (ox + MOVE_OFFSET[0], oy + MOVE_OFFSET[1], world.rest_z)
    else:
        goal = world.object_pos
    return TaskSpec(kind, goal)


@dataclass(frozen=True)
class EpisodeResult:
    robot_traj: Trajectory
    object_track: ObjectTrack
    grasped: bool
    success: bool
    rollout_index: int = 0
    object_positions: np.ndarray | None = None
    out_of_workspace: bool = False

    def to_dict(self) -> dict:
        return {
            "rollout_index": self.rollout_index,
            "waypoints": self.robot_traj.to_list(),
            "track": self.object_track.as_array().tolist(),
            "grasped": self.grasped,
            "success": self.success,
            "out_of_workspace": self.out_of_workspace,
        }


def _grasp_index(contacts: np.ndarray) -> int | None:
    idx = np.flatnonzero(contacts)
    return int(idx[0]) if idx.size else None


def rollout(world: SimWorld, traj: Trajectory, task: TaskSpec, rollout_index: int = 0) -> EpisodeResult:
    """Execute ``traj`` from a fresh reset of ``world``."""
    pos = traj.positions
    contacts = traj.contacts
    obj, attached, abort = kernels.rollout_core(
        pos, contacts, world.object_pos, world.grasp_radius, world.knock_radius,
        world.nudge_max, world.rest_z, task.kind is TaskKind.PUSH, world.lo, world.hi,
    )
    track = ObjectTrack.from_array(project_many(world.cam, obj), "object")
    g = _grasp_index(contacts)
    grasped = False
    if g is not None and abort < 0:
        k = min(g + 1, len(traj) - 1)
        # a pushed object stays on the table, so only the horizontal gap counts
        dims = 2 if task.kind is TaskKind.PUSH else 3
        grasped = bool(np.linalg.norm(obj[k, :dims] - pos[k, :dims]) <= world.grasp_radius + 1e-12)
    success = False
    if abort < 0:
        final = obj[-1]
        if task.kind is TaskKind.PICK:
            success = grasped and final[2] >= world.table_height + task.lift_height
        else:
            close = np.hypot(final[0] - task.goal_pos[0], final[1] - task.goal_pos[1]) <= task.success_tol
            success = bool(close and (grasped or task.kind is TaskKind.PUSH))
    return EpisodeResult(traj, track, grasped, bool(success), rollout_index, obj, abort >= 0)


# -- noise ----------------------------------------------------------------

def gaussian_distort(traj: Trajectory, sigma: float, rng_seed) -> Trajectory:
    """Add i.i.d. N(0, sigma^2) to every coordinate except the start pose."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = np.random.default_rng(rng_seed)
    noise = rng.normal(0.0, 1.0, size=(len(traj), 3)) * sigma
    noise[0] = 0.0
    return traj.with_positions(traj.positions + noise)


@dataclass(frozen=True)
class TanhNoiseField:
    """Deterministic distortion ``amplitude * tanh((x - centroid) / lam)`` per axis."""

    centroid: tuple[float, float, float]
    lam: float
    amplitude: float

    def __post_init__(self):
        object.__setattr__(self, "centroid", tuple(float(v) for v in self.centroid))
        if self.lam <= 0:
            raise ValueError("lam must be positive")

    def offset(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return self.amplitude * np.tanh((p - np.array(self.centroid)) / self.lam)

    @classmethod
    def default(cls) -> "TanhNoiseField":
        # Tuned so offsets on demo waypoints of the residual task family span
        # roughly 4-30 cm (checked in the sim tests).
        return cls((0.5, -0.1, 0.2), 0.2, 0.2)


def tanh_distort(traj: Trajectory, field: TanhNoiseField) -> Trajectory:
    return traj.with_positions(traj.positions + field.offset(traj.positions))


# -- demonstrations -------------------------------------------------------

@dataclass(frozen=True)
class Demo:
    """A scripted 20 Hz demonstration and the object's motion during it."""

    traj: Trajectory
    track: ObjectTrack
    object_positions: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.traj.times

    def __iter__(self):
        return iter((self.traj, self.track))


# Frames per straight segment; corners land exactly on frames so SQUISHE
# recovers them with zero interpolation error.
_SEGMENTS = {
    TaskKind.PICK: (19, 20),
    TaskKind.PUSH: (19, 20),
    TaskKind.MOVE: (19, 10, 10),
}
DEMO_LIFT = 0.20


def demo_corners(world: SimWorld, task: TaskSpec, start=None) -> np.ndarray:
    """Corner waypoints (start, grasp, ...) of the scripted demonstration."""
    start = np.array(world.home if start is None else start, dtype=float)
    obj = np.array(world.object_pos)
    goal = np.array(task.goal_pos)
    if task.kind is TaskKind.PICK:
        return np.array([start, obj, obj + (0.0, 0.0, DEMO_LIFT)])
    if task.kind is TaskKind.PUSH:
        return np.array([start, obj, (goal[0], goal[1], world.rest_z)])
    place = np.array([goal[0], goal[1], world.rest_z])
    apex = (obj + place) / 2.0 + (0.0, 0.0, DEMO_LIFT)
    return np.array([start, obj, apex, place])


def synth_demo(world: SimWorld, task: TaskSpec, rng_seed=None) -> Demo:
    """Straight-segment demo sampled at 20 Hz (about 40 frames, 2 s).

    With ``rng_seed`` the start pose is drawn from a small box around
    ``world.home``; without it the start is ``world.home`` exactly.
    """
    start = np.array(world.home)
    if rng_seed is not None:
        rng = np.random.default_rng(rng_seed)
        start = start + rng.uniform(-0.05, 0.05, size=3)
    corners = demo_corners(world, task, start)
    counts = _SEGMENTS[task.kind]
    rows, contact = [corners[0]], [False]
    for seg, (a, b) in enumerate(zip(corners, corners[1:])):
        for k in range(1, counts[seg] + 1):
            rows.append(a + (b - a) * (k / counts[seg]))
            contact.append(seg > 0 or k == counts[seg])
    pos = np.array(rows)
    if not (np.all(pos >= world.lo - 1e-9) and np.all(pos <= world.hi + 1e-9)):
        raise Infeasible("demonstration leaves the workspace")
    times = np.arange(len(pos)) / FRAME_RATE
    traj = Trajectory.from_arrays(pos, contact, times, TrajectoryKind.RAW)
    res = rollout(world, traj, task)
    if not res.success:
        raise Infeasible(f"scripted {task.kind.value} demo does not succeed")
    return Demo(traj, res.object_track, res.object_positions)


def record_demo(world: SimWorld, demo: Demo, tag: str = "cup", distractors=(("bowl", (0.3, 0.3, 0.04)),),
                box_px: float = 30.0):
    """Per-frame perception outputs a detector stack would emit for ``demo``.

    Depth samples cover the 3x3 neighbourhoods of the wrist and of every
    detection, so the recording round-trips through ``ingest`` exactly.
    """
    cam = world.cam
    hand_px = project_many(cam, demo.traj.positions)
    obj_px = project_many(cam, demo.object_positions)
    others = [(name, np.asarray(pos, dtype=float)) for name, pos in distractors]
    frames = []
    for i, w in enumerate(demo.traj):
        depth = {}
        dets = []

        def stamp(uv, z):
            u0, v0 = int(round(uv[0])), int(round(uv[1]))
            for du in (-1, 0, 1):
                for dv in (-1, 0, 1):
                    depth.setdefault((u0 + du, v0 + dv), float(z))

        stamp(hand_px[i], cam.to_camera(w.position)[2])
        for name, uv, pos in [(tag, obj_px[i], demo.object_positions[i])] + [
                (n, project_many(cam, p)[0], p) for n, p in others]:
            stamp(uv, cam.to_camera(pos)[2])
            h = box_px / 2.0
            dets.append(Detection(name, (uv[0] - h, uv[1] - h, uv[0] + h, uv[1] + h),
                                  PixelPoint(float(uv[0]), float(uv[1]))))
        frames.append(DetectionFrame(w.t, PixelPoint(float(hand_px[i, 0]), float(hand_px[i, 1])), w.contact,
                                     depth, tuple(dets)))
    return cam, frames


# -- logging --------------------------------------------------------------

def write_episodes(path, records: Iterable[dict]) -> None:
    with open(path, "a") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
