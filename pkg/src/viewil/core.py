"""Waypoint and trajectory value types, prior segmentation and multi-object splitting."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np


class ViewError(Exception):
    """Base class for pipeline errors."""


class InvalidWaypoint(ViewError, ValueError):
    pass


class InvalidTrajectory(ViewError, ValueError):
    pass


class NoContact(ViewError):
    """The prior never registers hand-object contact."""


class NoTask(ViewError):
    """Contact starts on the last waypoint, leaving no post-grasp waypoint."""


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    z: float
    contact: bool = False
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidWaypoint(f"{name}={v!r} is not finite")
        if not math.isfinite(self.t) or self.t < 0:
            raise InvalidWaypoint(f"t={self.t!r} must be finite and nonnegative")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def moved(self, pos) -> "Waypoint":
        return replace(self, x=float(pos[0]), y=float(pos[1]), z=float(pos[2]))

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "z": self.z, "contact": self.contact, "t": self.t}

    @classmethod
    def from_dict(cls, d: dict) -> "Waypoint":
        return cls(float(d["x"]), float(d["y"]), float(d["z"]), bool(d["contact"]), float(d["t"]))


class TrajectoryKind(str, enum.Enum):
    RAW = "raw"
    COMPRESSED = "compressed"
    CORRECTED = "corrected"
    SOLVED = "solved"


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple[Waypoint, ...]
    kind: TrajectoryKind = TrajectoryKind.RAW

    min_length = 2

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        object.__setattr__(self, "kind", TrajectoryKind(self.kind))
        if len(self.waypoints) < self.min_length:
            raise InvalidTrajectory(f"{type(self).__name__} needs at least {self.min_length} waypoints")
        ts = [w.t for w in self.waypoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidTrajectory("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.waypoints)

    def __getitem__(self, i):
        return self.waypoints[i]

    def __iter__(self):
        return iter(self.waypoints)

    @property
    def positions(self) -> np.ndarray:
        return np.array([[w.x, w.y, w.z] for w in self.waypoints], dtype=np.float64)

    @property
    def contacts(self) -> np.ndarray:
        return np.array([w.contact for w in self.waypoints], dtype=bool)

    @property
    def times(self) -> np.ndarray:
        return np.array([w.t for w in self.waypoints], dtype=np.float64)

    def with_positions(self, positions, kind: TrajectoryKind | str | None = None) -> "Trajectory":
        positions = np.asarray(positions, dtype=np.float64)
        if positions.shape != (len(self), 3):
            raise InvalidTrajectory(f"expected {(len(self), 3)} positions, got {positions.shape}")
        wps = tuple(w.moved(p) for w, p in zip(self.waypoints, positions))
        return type(self)(wps, self.kind if kind is None else kind)

    def to_list(self) -> list[dict]:
        return [w.to_dict() for w in self.waypoints]

    @classmethod
    def from_arrays(cls, positions, contacts, times, kind="raw") -> "Trajectory":
        return cls(
            tuple(
                Waypoint(float(p[0]), float(p[1]), float(p[2]), bool(c), float(t))
                for p, c, t in zip(np.asarray(positions, dtype=float), contacts, times)
            ),
            kind,
        )

    @classmethod
    def from_list(cls, items: Sequence[dict], kind="raw") -> "Trajectory":
        return cls(tuple(Waypoint.from_dict(d) for d in items), kind)


class TaskSegment(Trajectory):
    """Post-grasp part of a prior; a pick leaves a single (lift) waypoint."""

    min_length = 1


@dataclass(frozen=True)
class PixelPoint:
    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise InvalidWaypoint(f"pixel ({self.u}, {self.v}) is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])


@dataclass(frozen=True)
class ObjectTrack:
    points: tuple[PixelPoint, ...]
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise InvalidTrajectory("object track is empty")

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.array([[p.u, p.v] for p in self.points], dtype=np.float64)

    @classmethod
    def from_array(cls, uv, tag: str = "") -> "ObjectTrack":
        return cls(tuple(PixelPoint(float(a), float(b)) for a, b in np.asarray(uv, dtype=float)), tag)


@dataclass(frozen=True)
class SegmentedPrior:
    grasp: Trajectory
    task: Trajectory
    grasp_index: int
    object_at_grasp: Waypoint

    @property
    def task_start(self) -> int:
        """Index of the shared waypoint in the undivided prior."""
        return self.grasp_index + 1


def first_contact(contacts) -> int:
    """Index of the first waypoint in contact, or -1."""
    idx = np.flatnonzero(np.asarray(contacts, dtype=bool))
    return int(idx[0]) if idx.size else -1


def segment_prior(prior: Trajectory, object_track_3d: Sequence[Waypoint]) -> SegmentedPrior:
    """Divide a prior at the contact onset into grasp and task trajectories.

    The grasp trajectory runs from the start through one waypoint past the
    onset; the task trajectory starts at that same waypoint, which is
    duplicated verbatim in both halves.
    """
    g = first_contact(prior.contacts)
    if g < 0:
        raise NoContact("prior never registers contact")
    if g + 1 >= len(prior):
        raise NoTask(f"contact begins at the final waypoint ({g}); no task waypoint remains")
    if len(object_track_3d) <= g:
        raise InvalidTrajectory("object track shorter than the grasp index")
    wps = prior.waypoints
    grasp = Trajectory(wps[: g + 2], prior.kind)
    task = TaskSegment(wps[g + 1 :], prior.kind)
    return SegmentedPrior(grasp, task, g, object_track_3d[g])


def combine(grasp: Trajectory, task: Trajectory, kind=TrajectoryKind.SOLVED) -> Trajectory:
    """Re-join segments, dropping the duplicated shared waypoint."""
    return Trajectory(grasp.waypoints[:-1] + task.waypoints, kind)


def contact_blocks(contacts) -> list[tuple[int, int]]:
    """Inclusive (start, end) index pairs of contiguous contact runs."""
    c = np.asarray(contacts, dtype=bool)
    blocks = []
    i, n = 0, len(c)
    while i < n:
        if c[i]:
            j = i
            while j + 1 < n and c[j + 1]:
                j += 1
            blocks.append((i, j))
            i = j + 1
        else:
            i += 1
    return blocks


def debounce_contacts(traj: Trajectory, min_block: int = 2) -> Trajectory:
    """Clear contact runs shorter than ``min_block`` waypoints (detector flicker)."""
    c = traj.contacts.copy()
    for a, b in contact_blocks(c):
        if b - a + 1 < min_block:
            c[a : b + 1] = False
    if np.array_equal(c, traj.contacts):
        return traj
    wps = tuple(replace(w, contact=bool(f)) for w, f in zip(traj.waypoints, c))
    return Trajectory(wps, traj.kind)


def split_multi_object(prior: Trajectory) -> list[Trajectory]:
    """Cut a long prior into one sub-trajectory per contact block.

    Each piece runs from the previous release (or the start) through the
    next release (or the end); consecutive pieces share the release waypoint.
    """
    blocks = contact_blocks(prior.contacts)
    n = len(prior)
    if not blocks:
        return [prior]
    wps = prior.waypoints
    pieces = []
    start = 0
    for k, (_, b) in enumerate(blocks):
        end = n - 1 if k == len(blocks) - 1 else min(b + 1, n - 1)
        pieces.append(Trajectory(wps[start : end + 1], prior.kind))
        start = end
    return pieces
