import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from viewil.core import (InvalidTrajectory, InvalidWaypoint, NoContact, NoTask, ObjectTrack, PixelPoint,
                         Trajectory, Waypoint, combine, contact_blocks, debounce_contacts, segment_prior,
                         split_multi_object)
from conftest import traj_from


def objects_for(traj):
    return [Waypoint(0.5, 0.0, 0.04, False, w.t) for w in traj]


def test_waypoint_rejects_nonfinite():
    with pytest.raises(InvalidWaypoint):
        Waypoint(math.nan, 0, 0)
    with pytest.raises(InvalidWaypoint):
        Waypoint(0, 0, 0, t=-1.0)


def test_trajectory_invariants():
    with pytest.raises(InvalidTrajectory):
        Trajectory((Waypoint(0, 0, 0),))
    with pytest.raises(InvalidTrajectory):
        Trajectory((Waypoint(0, 0, 0, t=1.0), Waypoint(1, 0, 0, t=1.0)))
    with pytest.raises(InvalidTrajectory):
        ObjectTrack(())
    with pytest.raises(InvalidWaypoint):
        PixelPoint(math.inf, 0)


def test_segment_four_waypoints_degenerate():
    # contact at index 2 leaves the lift waypoint as the only task point
    tr = traj_from([False, False, True, True])
    seg = segment_prior(tr, objects_for(tr))
    assert seg.grasp_index == 2
    assert len(seg.grasp) == 4 and len(seg.task) == 1
    with pytest.raises(NoTask):
        tr2 = traj_from([False, False, False, True])
        segment_prior(tr2, objects_for(tr2))


def test_segment_five_waypoints():
    tr = traj_from([False, True, True, True, False])
    objs = objects_for(tr)
    seg = segment_prior(tr, objs)
    assert seg.grasp_index == 1
    assert seg.grasp.waypoints == tr.waypoints[0:3]
    assert seg.task.waypoints == tr.waypoints[2:5]
    assert seg.object_at_grasp == objs[1]
    assert seg.grasp[-1] == seg.task[0]


def test_segment_no_contact():
    tr = traj_from([False] * 4)
    with pytest.raises(NoContact):
        segment_prior(tr, objects_for(tr))


@given(st.lists(st.booleans(), min_size=3, max_size=12))
def test_segment_then_combine_roundtrip(contacts):
    tr = traj_from(contacts)
    try:
        seg = segment_prior(tr, objects_for(tr))
    except (NoContact, NoTask):
        return
    assert combine(seg.grasp, seg.task).waypoints == tr.waypoints


@pytest.mark.parametrize("contacts,count", [
    ([False, True, False, True, False], 2),
    ([False, True, True, False], 1),
    ([False, False], 1),
])
def test_split_examples(contacts, count):
    assert len(split_multi_object(traj_from(contacts))) == count


@given(st.lists(st.booleans(), min_size=2, max_size=15))
def test_split_covers_range_in_order(contacts):
    tr = traj_from(contacts)
    pieces = split_multi_object(tr)
    assert pieces[0][0] == tr[0] and pieces[-1][-1] == tr[-1]
    for a, b in zip(pieces, pieces[1:]):
        assert a[-1] == b[0]
        assert a[-1].t <= b[0].t
    joined = list(pieces[0].waypoints)
    for p in pieces[1:]:
        joined += list(p.waypoints[1:])
    assert tuple(joined) == tr.waypoints
    if contact_blocks(contacts):
        assert all(len(contact_blocks(p.contacts)) == 1 for p in pieces)


def test_debounce_clears_single_frame_blocks():
    tr = traj_from([False, True, False, True, True, False])
    out = debounce_contacts(tr)
    assert list(out.contacts) == [False, False, False, True, True, False]
    assert np.array_equal(out.positions, tr.positions)
