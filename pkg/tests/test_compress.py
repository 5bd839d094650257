import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from viewil.compress import BadOrder, CompressionSpec, max_sed, sed, squishe, squishe_plan
from viewil.core import Trajectory, Waypoint
from viewil.sim import default_task, synth_demo, world_at
from conftest import traj_from


def test_sed_examples():
    assert sed(Waypoint(0, 0, 0, t=0), Waypoint(1, 0, 0, t=1), Waypoint(2, 0, 0, t=2)) == 0
    assert sed(Waypoint(0, 0, 0, t=0), Waypoint(1, 1, 0, t=1), Waypoint(2, 0, 0, t=2)) == pytest.approx(1)
    assert sed(Waypoint(0, 0, 0, t=0), Waypoint(1, 0, 0, t=1), Waypoint(4, 0, 0, t=4)) == 0
    with pytest.raises(BadOrder):
        sed(Waypoint(0, 0, 0, t=1), Waypoint(1, 0, 0, t=1), Waypoint(4, 0, 0, t=4))


@pytest.mark.parametrize("kind,count", [("pick", 3), ("push", 3), ("move", 4)])
def test_demo_counts(kind, count):
    for x, y in ((0.6, 0.1), (0.5, -0.2), (0.7, 0.0)):
        world = world_at(x, y)
        demo = synth_demo(world, default_task(kind, world))
        assert 35 <= len(demo.traj) <= 45
        assert len(squishe(demo.traj)) == count


def test_straight_line_keeps_endpoints():
    n = 10
    tr = traj_from([False] * n, np.column_stack([np.arange(n) * 0.1, np.zeros(n), np.zeros(n)]))
    out = squishe(tr, CompressionSpec.error(1e-6))
    assert out.waypoints == (tr[0], tr[-1])


def random_traj(rng, n, pin=False):
    contacts = (rng.random(n) < 0.4) if pin else np.zeros(n, bool)
    return Trajectory.from_arrays(rng.normal(size=(n, 3)), contacts, np.cumsum(rng.uniform(0.05, 1, n)))


def test_target_count_vs_exhaustive():
    rng = np.random.default_rng(6)
    for _ in range(40):
        tr = random_traj(rng, 8)
        keep, _, _ = squishe_plan(tr, CompressionSpec.count(4))
        got = max_sed(tr, np.flatnonzero(keep))
        best = min(max_sed(tr, (0,) + c + (7,)) for c in itertools.combinations(range(1, 7), 2))
        assert keep.sum() == 4
        assert got <= 2 * best + 1e-12


@given(st.integers(0, 10_000), st.integers(3, 25), st.floats(0.0, 2.0))
def test_max_error_replay(seed, n, mu):
    tr = random_traj(np.random.default_rng(seed), n, pin=True)
    keep, order, prio = squishe_plan(tr, CompressionSpec.error(mu))
    assert keep[0] and keep[-1]
    assert np.all(prio <= mu + 1e-12)
    mask = np.zeros(n, bool)
    mask[1:] = tr.contacts[1:] != tr.contacts[:-1]
    assert np.all(keep[mask])
    assert set(order.tolist()).isdisjoint(np.flatnonzero(keep).tolist())


@given(st.integers(0, 10_000), st.integers(3, 25), st.integers(2, 10))
def test_target_count_properties(seed, n, target):
    tr = random_traj(np.random.default_rng(seed), n, pin=True)
    spec = CompressionSpec.count(target)
    out = squishe(tr, spec)
    pinned = int((tr.contacts[1:] != tr.contacts[:-1]).sum())
    ends = 2 - int(tr.contacts[-1] != tr.contacts[-2])
    assert len(out) == min(n, max(target, pinned + ends))
    orig = set(tr.waypoints)
    assert all(w in orig for w in out)
    assert squishe(out, spec).waypoints == out.waypoints
