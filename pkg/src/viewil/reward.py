"""Agent-agnostic rewards: negative pixel distance between object tracks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ObjectTrack, PixelPoint, ViewError
from .ingest import CameraModel


class BehindCamera(ViewError, ValueError):
    pass


class LengthMismatch(ViewError, ValueError):
    pass


class OutOfRange(ViewError, ValueError):
    pass


@dataclass(frozen=True)
class RewardSeries:
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(v > 0 for v in self.values):
            raise ValueError("per-waypoint rewards are non-positive")

    @property
    def total(self) -> float:
        return float(sum(self.values))

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def __len__(self):
        return len(self.values)


def project_many(cam: CameraModel, points) -> np.ndarray:
    """Vectorised projection of (n, 3) robot-frame points to (n, 2) pixels."""
    pc = cam.to_camera(np.atleast_2d(points))
    z = pc[:, 2]
    if np.any(z <= 0):
        raise BehindCamera("point at or behind the camera plane")
    return np.column_stack((cam.fx * pc[:, 0] / z + cam.cx, cam.fy * pc[:, 1] / z + cam.cy))


def project(cam: CameraModel, w) -> PixelPoint:
    """Robot-frame position (array or Waypoint) -> pixel."""
    pos = w.position if hasattr(w, "position") else np.asarray(w, dtype=float)
    uv = project_many(cam, pos[None, :])[0]
    return PixelPoint(float(uv[0]), float(uv[1]))


def camera_depth(cam: CameraModel, w) -> float:
    pos = w.position if hasattr(w, "position") else np.asarray(w, dtype=float)
    return float(cam.to_camera(pos)[2])


def waypoint_rewards(human: ObjectTrack, robot: ObjectTrack) -> RewardSeries:
    if len(human) != len(robot):
        raise LengthMismatch(f"human track has {len(human)} points, robot track {len(robot)}")
    d = np.linalg.norm(robot.as_array() - human.as_array(), axis=1)
    return RewardSeries(tuple(-d))


def align_tracks(track: ObjectTrack, frame_times: Sequence[float], waypoint_times: Sequence[float]) -> ObjectTrack:
    """Resample a per-frame pixel track at the given waypoint times."""
    ft = np.asarray(frame_times, dtype=float)
    wt = np.asarray(waypoint_times, dtype=float)
    if len(ft) != len(track):
        raise LengthMismatch("frame_times must match the track length")
    eps = 1e-9
    if wt.size and (wt.min() < ft[0] - eps or wt.max() > ft[-1] + eps):
        raise OutOfRange(f"waypoint times [{wt.min()}, {wt.max()}] outside [{ft[0]}, {ft[-1]}]")
    uv = track.as_array()
    out = np.column_stack([np.interp(wt, ft, uv[:, c]) for c in range(2)])
    return ObjectTrack.from_array(out, track.tag)


def pixel_tolerance(cam: CameraModel, at, metres: float) -> float:
    """Pixel length of a ``metres`` lateral offset at the depth of ``at``."""
    return min(cam.fx, cam.fy) * metres / camera_depth(cam, at)
