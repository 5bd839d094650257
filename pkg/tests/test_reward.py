import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from viewil.core import ObjectTrack
from viewil.ingest import CameraModel, deproject
from viewil.reward import (BehindCamera, LengthMismatch, OutOfRange, RewardSeries, align_tracks, camera_depth,
                           pixel_tolerance, project, waypoint_rewards)

pix = st.floats(-500, 500, allow_nan=False)
tracks = st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.lists(st.tuples(pix, pix), min_size=n, max_size=n), st.lists(st.tuples(pix, pix), min_size=n, max_size=n)))


def test_project_examples(simple_cam):
    p = project(simple_cam, np.array([1.0, 2.0, 5.0]))
    assert (p.u, p.v) == pytest.approx((20, 40))
    cam = CameraModel(100, 100, 7, 9)
    p = project(cam, np.array([0.0, 0.0, 3.0]))
    assert (p.u, p.v) == pytest.approx((7, 9))
    with pytest.raises(BehindCamera):
        project(simple_cam, np.array([0.0, 0.0, -1.0]))


def test_reproject_to_1e9(simple_cam):
    rng = np.random.default_rng(4)
    for w in rng.uniform([-1, -1, 0.5], [1, 1, 4], (50, 3)):
        back = deproject(simple_cam, project(simple_cam, w), camera_depth(simple_cam, w))
        assert np.abs(back - w).max() < 1e-9


def test_reward_examples():
    a = ObjectTrack.from_array([(0, 0), (1, 1)])
    assert waypoint_rewards(a, a).values == (0.0, 0.0)
    r = waypoint_rewards(ObjectTrack.from_array([(0, 0)]), ObjectTrack.from_array([(3, 4)]))
    assert r.values == (-5.0,)
    with pytest.raises(LengthMismatch):
        waypoint_rewards(a, ObjectTrack.from_array([(0, 0)]))
    with pytest.raises(ValueError):
        RewardSeries((1.0,))


def test_reward_matches_loop():
    rng = np.random.default_rng(5)
    h, r = rng.normal(size=(5, 2)) * 50, rng.normal(size=(5, 2)) * 50
    got = waypoint_rewards(ObjectTrack.from_array(h), ObjectTrack.from_array(r))
    expect = [-math.sqrt((h[i, 0] - r[i, 0]) ** 2 + (h[i, 1] - r[i, 1]) ** 2) for i in range(5)]
    assert np.allclose(got.values, expect, atol=1e-12)
    assert got.total == pytest.approx(sum(expect))


@given(tracks, st.tuples(pix, pix))
def test_reward_properties(pair, d):
    h, r = (ObjectTrack.from_array(x) for x in pair)
    fwd, back = waypoint_rewards(h, r), waypoint_rewards(r, h)
    assert np.allclose(fwd.values, back.values)
    shifted = ObjectTrack.from_array(np.asarray(pair[1]) + d)
    moved = waypoint_rewards(h, shifted)
    assert np.all(np.abs(moved.as_array() - fwd.as_array()) <= math.hypot(*d) + 1e-6)
    assert waypoint_rewards(h, h).total == 0.0


def test_align_examples():
    tr = ObjectTrack.from_array([(0, 0), (10, 0)])
    assert np.allclose(align_tracks(tr, [0, 1], [0.5]).as_array(), [(5, 0)])
    tr3 = ObjectTrack.from_array([(0, 0), (1, 2), (4, 4)])
    assert np.allclose(align_tracks(tr3, [0, 1, 2], [0, 1, 2]).as_array(), tr3.as_array())
    with pytest.raises(OutOfRange):
        align_tracks(tr, [0, 1], [1.5])


def test_align_sinusoid():
    ft = np.linspace(0, 2, 20001)
    uv = np.column_stack([100 * np.sin(ft), 50 * np.cos(ft)])
    wt = np.linspace(0.1, 1.9, 37)
    got = align_tracks(ObjectTrack.from_array(uv), ft, wt).as_array()
    expect = np.column_stack([100 * np.sin(wt), 50 * np.cos(wt)])
    assert np.abs(got - expect).max() < 1e-6


def test_pixel_tolerance(simple_cam):
    assert pixel_tolerance(simple_cam, np.array([0, 0, 2.0]), 0.05) == pytest.approx(2.5)
