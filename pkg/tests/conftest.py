import numpy as np
import pytest
from hypothesis import settings

from viewil.core import Trajectory
from viewil.ingest import CameraModel

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def traj_from(contacts, positions=None, dt=0.05):
    n = len(contacts)
    if positions is None:
        positions = np.column_stack([np.linspace(0, 1, n), np.zeros(n), np.zeros(n)])
    return Trajectory.from_arrays(positions, contacts, np.arange(n) * dt)


@pytest.fixture
def simple_cam():
    return CameraModel(100.0, 100.0, 0.0, 0.0)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_camera(rng):
    ext = np.eye(4)
    ext[:3, :3] = random_rotation(rng)
    ext[:3, 3] = rng.uniform(-2, 2, 3)
    return CameraModel(float(rng.uniform(200, 1500)), float(rng.uniform(200, 1500)),
                       float(rng.uniform(0, 640)), float(rng.uniform(0, 480)), ext)
