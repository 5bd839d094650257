import numpy as np

from viewil.compress import squishe
from viewil.core import segment_prior
from viewil.harness import Evaluator
from viewil.reward import pixel_tolerance
from viewil.sim import default_task, synth_demo, world_at
from viewil.task import task_search, unified_search


def setup(kind, offset=None):
    world = world_at(0.6, 0.1)
    task = default_task(kind, world)
    demo = synth_demo(world, task)
    prior = squishe(demo.traj)
    if offset is not None:
        pos = prior.positions
        pos[-1] += offset
        prior = prior.with_positions(pos)
    obj = [demo.object_positions[int(round(w.t * 20))] for w in prior]
    seg = segment_prior(prior, obj)
    tols = [pixel_tolerance(world.cam, obj[seg.task_start + i], task.success_tol) for i in range(len(seg.task))]
    return world, task, demo, seg, tols


def test_zero_noise_single_rollout():
    for kind in ("pick", "push", "move"):
        world, task, demo, seg, tols = setup(kind)
        ev = Evaluator(world, task, demo)
        res = task_search(list(seg.grasp[:-1]), seg.task, ev, 40, 0, 0.3, (world.lo, world.hi), tols)
        assert res.success and res.rollouts == 1
        assert np.allclose(res.rewards, 0.0, atol=1e-9)


def test_lift_offset_is_recovered():
    world, task, demo, seg, tols = setup("pick", offset=np.array([0.1, 0.0, 0.0]))
    ev = Evaluator(world, task, demo)
    res = task_search(list(seg.grasp[:-1]), seg.task, ev, 30, 1, 0.15, (world.lo, world.hi), tols)
    assert res.success
    assert np.all(np.abs(res.rewards) < tols)
    assert res.rollouts <= 30


def test_proposals_stay_in_boxes_and_best_is_monotone():
    world, task, demo, seg, tols = setup("move", offset=np.array([0.1, -0.1, 0.0]))
    ev = Evaluator(world, task, demo)
    eps = 0.2
    res = task_search(list(seg.grasp[:-1]), seg.task, ev, 15, 2, eps, (world.lo, world.hi), tols)
    prior = seg.task.positions
    best = -np.inf
    for rec in res.log:
        p = np.array(rec["proposals"])
        assert np.all(np.abs(p - prior) <= eps + 1e-9)
        assert np.all(p >= world.lo - 1e-9) and np.all(p <= world.hi + 1e-9)
        best = max(best, sum(rec["rewards"]))
    assert len(res.log) == res.rollouts


def test_unified_zero_noise():
    world, task, demo, seg, tols = setup("move")
    ev = Evaluator(world, task, demo)
    g = seg.grasp_index
    box = (seg.grasp[g].position - 0.05, seg.grasp[g].position + 0.05)
    res = unified_search(list(seg.grasp[:g]), box, seg.grasp[g], seg.task, ev, 10, 0, 0.3,
                         (world.lo, world.hi), tols)
    assert res.success and res.rollouts == 1
