"""Perception-output ingestion: camera model, de-projection, hand and object tracks.

The neural detectors are out of scope; a recording file carries their
per-frame outputs (wrist pixel, contact flag, sparse depth samples and
tagged detections) and everything downstream of them lives here.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import NoContact, ObjectTrack, PixelPoint, Trajectory, TrajectoryKind, ViewError, Waypoint, debounce_contacts


class BadDepth(ViewError, ValueError):
    pass


class TooFewFrames(ViewError):
    pass


class NoCandidates(ViewError):
    pass


class AmbiguousTag(ViewError):
    pass


class TagAbsent(ViewError):
    pass


ANCHOR_BASE_PX = 64.0
DEFAULT_ANCHOR_SCALES = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus a rigid camera->robot transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    extrinsic: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        ext = np.array(self.extrinsic, dtype=np.float64).reshape(4, 4)
        rot = ext[:3, :3]
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-6) or abs(np.linalg.det(rot) - 1.0) > 1e-6:
            raise ValueError("extrinsic rotation block is not orthonormal")
        ext.setflags(write=False)
        object.__setattr__(self, "extrinsic", ext)

    @property
    def rotation(self) -> np.ndarray:
        return self.extrinsic[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.extrinsic[:3, 3]

    def to_camera(self, points) -> np.ndarray:
        """Robot-frame points (..., 3) expressed in the camera frame."""
        p = np.asarray(points, dtype=np.float64)
        return (p - self.translation) @ self.rotation

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "extrinsic": [float(v) for v in self.extrinsic.ravel()]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CameraModel":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   np.array(d.get("extrinsic", np.eye(4).ravel()), dtype=float).reshape(4, 4))

    @classmethod
    def looking_down(cls, eye, fx=1000.0, fy=1000.0, cx=320.0, cy=240.0) -> "CameraModel":
        """Camera at ``eye`` with its optical axis along robot -z."""
        ext = np.eye(4)
        ext[:3, :3] = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
        ext[:3, 3] = eye
        return cls(fx, fy, cx, cy, ext)


def deproject(cam: CameraModel, p: PixelPoint, depth: float) -> np.ndarray:
    """Pixel + metric depth -> robot-frame position."""
    if not (math.isfinite(depth) and depth > 0):
        raise BadDepth(f"depth {depth!r} must be positive and finite")
    pc = np.array([(p.u - cam.cx) * depth / cam.fx, (p.v - cam.cy) * depth / cam.fy, depth])
    return cam.rotation @ pc + cam.translation


@dataclass(frozen=True)
class Detection:
    tag: str
    bbox: tuple[float, float, float, float]
    centroid: PixelPoint


@dataclass(frozen=True)
class DetectionFrame:
    t: float
    wrist: PixelPoint
    contact: bool
    depth: Mapping[tuple[int, int], float] = field(default_factory=dict)
    detections: tuple[Detection, ...] = ()

    def depth_at(self, p: PixelPoint) -> float | None:
        """Median of the valid samples in the 3x3 neighbourhood of ``p``."""
        u0, v0 = int(round(p.u)), int(round(p.v))
        vals = []
        for du in (-1, 0, 1):
            for dv in (-1, 0, 1):
                d = self.depth.get((u0 + du, v0 + dv))
                if d is not None and math.isfinite(d) and d > 0:
                    vals.append(d)
        if not vals:
            return None
        return float(np.median(vals))

    def find(self, tag: str) -> Detection | None:
        for det in self.detections:
            if det.tag == tag:
                return det
        return None


def extract_hand_trajectory(frames: Sequence[DetectionFrame], cam: CameraModel,
                            debounce: bool = True) -> Trajectory:
    """One waypoint per frame with a usable wrist depth; others are skipped."""
    wps = []
    for fr in frames:
        d = fr.depth_at(fr.wrist)
        if d is None:
            continue
        pos = deproject(cam, fr.wrist, d)
        wps.append(Waypoint(float(pos[0]), float(pos[1]), float(pos[2]), bool(fr.contact), float(fr.t)))
    if len(wps) < 2:
        raise TooFewFrames(f"only {len(wps)} frames have a valid wrist depth")
    traj = Trajectory(tuple(wps), TrajectoryKind.RAW)
    return debounce_contacts(traj) if debounce else traj


def _in_anchor(center: PixelPoint, p: PixelPoint, side: float) -> bool:
    half = side / 2.0
    return abs(p.u - center.u) <= half and abs(p.v - center.v) <= half


def count_tags(frames: Sequence[DetectionFrame], anchor_scales=DEFAULT_ANCHOR_SCALES) -> Counter:
    counts: Counter = Counter()
    for fr in frames:
        if not fr.contact:
            continue
        for s in anchor_scales:
            side = s * ANCHOR_BASE_PX
            for det in fr.detections:
                if _in_anchor(fr.wrist, det.centroid, side):
                    counts[det.tag] += 1
    return counts


def vote_object_tag(frames: Sequence[DetectionFrame], anchor_scales=DEFAULT_ANCHOR_SCALES) -> str:
    """Tag whose detections fall inside wrist-centred anchor boxes most often during contact."""
    if not any(fr.contact for fr in frames):
        raise NoContact("no frame registers hand contact")
    counts = count_tags(frames, anchor_scales)
    if not counts:
        raise NoCandidates("no detection fell inside any anchor box")
    ranked = counts.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        tied = sorted(tag for tag, c in ranked if c == ranked[0][1])
        raise AmbiguousTag(f"tie between {tied} at {ranked[0][1]} votes")
    return ranked[0][0]


def _fill(times: np.ndarray, known: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Linear interpolation over time, constant beyond the known range."""
    out = np.empty((len(times), values.shape[1]))
    for c in range(values.shape[1]):
        out[:, c] = np.interp(times, times[known], values[known, c])
    return out


def extract_object_track(frames: Sequence[DetectionFrame], tag: str, cam: CameraModel):
    """Pixel track and de-projected 3D track of ``tag``, gap-filled by interpolation.

    Returns ``(ObjectTrack, list[Waypoint])``; waypoint contact flags copy the
    hand contact of the frame.
    """
    n = len(frames)
    times = np.array([fr.t for fr in frames], dtype=float)
    uv = np.zeros((n, 2))
    seen = np.zeros(n, dtype=bool)
    for i, fr in enumerate(frames):
        det = fr.find(tag)
        if det is not None:
            uv[i] = (det.centroid.u, det.centroid.v)
            seen[i] = True
    if seen.sum() < 2:
        raise TagAbsent(f"tag {tag!r} detected in {int(seen.sum())} frames; need 2")
    uv = _fill(times, seen, uv)
    xyz = np.zeros((n, 3))
    has_depth = np.zeros(n, dtype=bool)
    for i, fr in enumerate(frames):
        p = PixelPoint(float(uv[i, 0]), float(uv[i, 1]))
        d = fr.depth_at(p)
        if d is not None:
            xyz[i] = deproject(cam, p, d)
            has_depth[i] = True
    if not has_depth.any():
        raise TagAbsent(f"no depth available along the track of {tag!r}")
    xyz = _fill(times, has_depth, xyz)
    track = ObjectTrack.from_array(uv, tag)
    wps = [Waypoint(float(p[0]), float(p[1]), float(p[2]), bool(fr.contact), float(fr.t))
           for p, fr in zip(xyz, frames)]
    return track, wps


# -- recording files -------------------------------------------------------

def frame_from_dict(d: Mapping) -> DetectionFrame:
    depth = {}
    for u, v, z in d.get("depth", []):
        depth[(int(round(u)), int(round(v)))] = float(z)
    dets = tuple(
        Detection(str(x["tag"]), tuple(float(b) for b in x["bbox"]), PixelPoint(*map(float, x["centroid"])))
        for x in d.get("detections", [])
    )
    return DetectionFrame(float(d["t"]), PixelPoint(*map(float, d["wrist"])), bool(d["contact"]), depth, dets)


def frame_to_dict(fr: DetectionFrame) -> dict:
    return {
        "t": fr.t,
        "wrist": [fr.wrist.u, fr.wrist.v],
        "contact": fr.contact,
        "depth": [[u, v, z] for (u, v), z in sorted(fr.depth.items())],
        "detections": [{"tag": d.tag, "bbox": list(d.bbox), "centroid": [d.centroid.u, d.centroid.v]}
                       for d in fr.detections],
    }


def load_recording(path) -> tuple[CameraModel, list[DetectionFrame]]:
    doc = json.loads(Path(path).read_text())
    return CameraModel.from_dict(doc["camera"]), [frame_from_dict(f) for f in doc["frames"]]


def save_recording(path, cam: CameraModel, frames: Sequence[DetectionFrame]) -> None:
    doc = {"camera": cam.to_dict(), "frames": [frame_to_dict(f) for f in frames]}
    Path(path).write_text(json.dumps(doc, indent=1))


@dataclass(frozen=True)
class ExtractedPrior:
    """Everything the pipeline needs from one demonstration recording."""

    hand: Trajectory
    tag: str
    track: ObjectTrack
    track_times: np.ndarray
    object_3d: tuple[Waypoint, ...]


def extract_prior(cam: CameraModel, frames: Sequence[DetectionFrame], tag: str | None = None,
                  anchor_scales=DEFAULT_ANCHOR_SCALES) -> ExtractedPrior:
    hand = extract_hand_trajectory(frames, cam)
    if tag is None:
        tag = vote_object_tag(frames, anchor_scales)
    track, obj = extract_object_track(frames, tag, cam)
    times = np.array([fr.t for fr in frames], dtype=float)
    return ExtractedPrior(hand, tag, track, times, tuple(obj))
