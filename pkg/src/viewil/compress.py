"""SQUISH-E trajectory compression under the synchronized Euclidean distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Trajectory, TrajectoryKind, ViewError, Waypoint


class BadOrder(ViewError, ValueError):
    pass


DEFAULT_MAX_ERROR = 0.01


@dataclass(frozen=True)
class CompressionSpec:
    """Either ``target_count`` (keep n points) or ``max_error`` (SED bound, metres)."""

    target_count: int | None = None
    max_error: float | None = DEFAULT_MAX_ERROR
    pin_contact_changes: bool = True

    def __post_init__(self):
        if self.target_count is not None:
            if self.target_count < 2:
                raise ValueError("target_count must be >= 2")
            object.__setattr__(self, "max_error", None)
        elif self.max_error is None or self.max_error < 0:
            raise ValueError("max_error must be >= 0 when no target_count is given")

    @classmethod
    def count(cls, n: int, pin_contact_changes: bool = True) -> "CompressionSpec":
        return cls(target_count=n, pin_contact_changes=pin_contact_changes)

    @classmethod
    def error(cls, mu: float = DEFAULT_MAX_ERROR, pin_contact_changes: bool = True) -> "CompressionSpec":
        return cls(max_error=mu, pin_contact_changes=pin_contact_changes)


def sed(prev: Waypoint, removed: Waypoint, nxt: Waypoint) -> float:
    """Distance from ``removed`` to the prev->next interpolant at ``removed.t``."""
    if not (prev.t < removed.t < nxt.t):
        raise BadOrder(f"timestamps {prev.t}, {removed.t}, {nxt.t} not strictly increasing")
    return kernels.sed(prev.x, prev.y, prev.z, prev.t, removed.x, removed.y, removed.z, removed.t,
                       nxt.x, nxt.y, nxt.z, nxt.t)


def contact_change_mask(traj: Trajectory) -> np.ndarray:
    c = traj.contacts
    mask = np.zeros(len(c), dtype=bool)
    mask[1:] = c[1:] != c[:-1]
    return mask


def squishe_plan(traj: Trajectory, spec: CompressionSpec):
    """Run the selection and return ``(keep, removal_order, removal_priority)``."""
    pinned = contact_change_mask(traj) if spec.pin_contact_changes else np.zeros(len(traj), dtype=bool)
    target = -1 if spec.target_count is None else int(spec.target_count)
    mu = 0.0 if spec.max_error is None else float(spec.max_error)
    return kernels.squishe_select(traj.positions, traj.times, pinned, target, mu)


def squishe(traj: Trajectory, spec: CompressionSpec | None = None) -> Trajectory:
    """Compress ``traj``; endpoints and (optionally) contact changes always survive."""
    spec = spec or CompressionSpec()
    keep, _, _ = squishe_plan(traj, spec)
    wps = tuple(w for w, k in zip(traj.waypoints, keep) if k)
    return Trajectory(wps, TrajectoryKind.COMPRESSED)


def max_sed(original: Trajectory, kept_idx) -> float:
    """Largest SED of any dropped point against its enclosing kept segment."""
    kept_idx = sorted(int(i) for i in kept_idx)
    worst = 0.0
    wps = original.waypoints
    for a, b in zip(kept_idx, kept_idx[1:]):
        for i in range(a + 1, b):
            worst = max(worst, sed(wps[a], wps[i], wps[b]))
    return worst
