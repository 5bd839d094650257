"""Waypoint-based visual imitation downstream of perception.

Prior extraction and compression, pixel-space rewards, two-phase grasp and
task exploration, residual correction, and a kinematic simulator for the
ablation studies. Hot loops live in ``viewil.kernels`` (compiled when the
extension is built, numpy otherwise).
"""
from .core import ObjectTrack, PixelPoint, Trajectory, TrajectoryKind, Waypoint
from .kernels import BACKEND

__all__ = ["BACKEND", "ObjectTrack", "PixelPoint", "Trajectory", "TrajectoryKind", "Waypoint"]
__version__ = "0.1.0"
