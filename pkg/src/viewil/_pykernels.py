"""Pure-Python/numpy reference implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same floating-point operation order, so both backends agree to
rounding error. ``viewil.kernels`` picks one at import.
"""
import heapq
import math

import numpy as np

BACKEND = "python"


def sed(x0, y0, z0, t0, x1, y1, z1, t1, x2, y2, z2, t2):
    """Synchronized Euclidean distance of point 1 against the 0->2 interpolant."""
    ratio = (t1 - t0) / (t2 - t0)
    dx = x1 - (x0 + (x2 - x0) * ratio)
    dy = y1 - (y0 + (y2 - y0) * ratio)
    dz = z1 - (z0 + (z2 - z0) * ratio)
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def _sed_idx(pos, t, a, i, b):
    return sed(pos[a, 0], pos[a, 1], pos[a, 2], t[a],
               pos[i, 0], pos[i, 1], pos[i, 2], t[i],
               pos[b, 0], pos[b, 1], pos[b, 2], t[b])


def squishe_select(pos, t, pinned, target_count, max_error):
    """Offline SQUISH-E point selection.

    Returns ``(keep, order, removed_priority)`` where ``keep`` is a boolean
    mask, ``order`` the removal sequence and ``removed_priority`` the
    accumulated priority of each removed point at the moment it was removed.
    ``target_count < 0`` selects max-error mode.
    """
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    n = pos.shape[0]
    prev = list(range(-1, n - 1))
    nxt = list(range(1, n + 1))
    acc = [0.0] * n
    prio = [math.inf] * n
    version = [0] * n
    alive = [True] * n
    heap = []
    for i in range(1, n - 1):
        if not pinned[i]:
            prio[i] = _sed_idx(pos, t, i - 1, i, i + 1)
            heap.append((prio[i], i, 0))
    heapq.heapify(heap)
    order = []
    removed_priority = []
    remaining = n
    count_mode = target_count >= 0
    while heap:
        if count_mode and remaining <= target_count:
            break
        p, i, ver = heap[0]
        if ver != version[i] or not alive[i]:
            heapq.heappop(heap)
            continue
        if not count_mode and p > max_error:
            break
        heapq.heappop(heap)
        alive[i] = False
        remaining -= 1
        order.append(i)
        removed_priority.append(p)
        a, b = prev[i], nxt[i]
        nxt[a] = b
        prev[b] = a
        for j in (a, b):
            acc[j] += p
            if 0 < j < n - 1 and not pinned[j]:
                prio[j] = acc[j] + _sed_idx(pos, t, prev[j], j, nxt[j])
                version[j] += 1
                heapq.heappush(heap, (prio[j], j, version[j]))
    keep = np.array(alive, dtype=bool)
    return keep, np.array(order, dtype=np.int64), np.array(removed_priority, dtype=np.float64)


def lloyd(points, init, max_iter):
    """Lloyd iterations from ``init``; returns (centroids, labels, iterations)."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    cent = np.array(init, dtype=np.float64, copy=True)
    k = cent.shape[0]
    labels = np.full(points.shape[0], -1, dtype=np.int64)
    it = 0
    for it in range(1, max_iter + 1):
        d2 = ((points[:, None, :] - cent[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        if np.array_equal(new, labels):
            it -= 1
            break
        labels = new
        for c in range(k):
            members = points[labels == c]
            if members.shape[0]:
                cent[c] = members.sum(axis=0) / members.shape[0]
    return cent, labels, it


def se_cross(a, b, lengthscale):
    """Squared-exponential correlation matrix between row sets a and b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * lengthscale * lengthscale))


def expected_improvement(mean, sd, best):
    """EI for maximization; zero wherever the posterior sd vanishes."""
    mean = np.asarray(mean, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    out = np.empty_like(mean)
    for i in range(mean.shape[0]):
        gain = mean[i] - best
        s = sd[i]
        if s <= 0.0:
            out[i] = gain if gain > 0.0 else 0.0
            continue
        z = gain / s
        cdf = 0.5 * math.erfc(-z / math.sqrt(2.0))
        pdf = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        v = gain * cdf + s * pdf
        out[i] = v if v > 0.0 else 0.0
    return out


def rollout_core(wps, contact, obj0, grasp_radius, knock_radius, nudge_max, rest_z, push, lo, hi):
    """Kinematic waypoint execution.

    Returns ``(obj_at, attached_at, abort)``: object centre and attachment
    state recorded on arrival at each waypoint, and the index of the first
    waypoint outside the ``[lo, hi]`` box (-1 if none).

    A free object is disturbed two ways: a sweep whose closest approach lies
    strictly inside the segment and within ``grasp_radius`` pushes it along
    the sweep, and a contact waypoint that misses the grasp but lands within
    ``knock_radius`` knocks it horizontally away. Both moves are capped at
    ``nudge_max``.
    """
    wps = np.ascontiguousarray(wps, dtype=np.float64)
    n = wps.shape[0]
    obj_at = np.empty((n, 3), dtype=np.float64)
    attached_at = np.zeros(n, dtype=bool)
    ox, oy, oz = float(obj0[0]), float(obj0[1]), float(obj0[2])
    attached = False
    offx = offy = offz = 0.0
    r = grasp_radius
    abort = -1
    for i in range(n):
        wx, wy, wz = wps[i, 0], wps[i, 1], wps[i, 2]
        if (wx < lo[0] - 1e-9 or wx > hi[0] + 1e-9 or wy < lo[1] - 1e-9 or wy > hi[1] + 1e-9
                or wz < lo[2] - 1e-9 or wz > hi[2] + 1e-9):
            abort = i
            for j in range(i, n):
                obj_at[j, 0] = ox
                obj_at[j, 1] = oy
                obj_at[j, 2] = oz
                attached_at[j] = attached
            break
        if i > 0:
            if attached:
                ox = wx + offx
                oy = wy + offy
                oz = rest_z if push else wz + offz
            else:
                px, py, pz = wps[i - 1, 0], wps[i - 1, 1], wps[i - 1, 2]
                sx, sy, sz = wx - px, wy - py, wz - pz
                ss = sx * sx + sy * sy + sz * sz
                u = 0.0
                if ss > 0.0:
                    u = ((ox - px) * sx + (oy - py) * sy + (oz - pz) * sz) / ss
                passing = 0.0 < u < 1.0
                if passing:
                    cx, cy, cz = px + u * sx, py + u * sy, pz + u * sz
                    d = math.sqrt((ox - cx) ** 2 + (oy - cy) ** 2 + (oz - cz) ** 2)
                    gx, gy, gz = wx - ox, wy - oy, wz - oz
                    grasp_next = contact[i] and math.sqrt(gx * gx + gy * gy + gz * gz) <= r
                if passing and d < r and not grasp_next:
                    step = r - d
                    if step > nudge_max:
                        step = nudge_max
                    hx, hy = sx, sy
                    hn = math.sqrt(hx * hx + hy * hy)
                    if hn < 1e-12:
                        hx, hy = ox - cx, oy - cy
                        hn = math.sqrt(hx * hx + hy * hy)
                    if hn >= 1e-12:
                        ox += step * hx / hn
                        oy += step * hy / hn
        if attached and not contact[i]:
            attached = False
            oz = rest_z
        elif not attached and contact[i]:
            gx, gy, gz = wx - ox, wy - oy, wz - oz
            d = math.sqrt(gx * gx + gy * gy + gz * gz)
            if d <= r:
                attached = True
                offx, offy, offz = ox - wx, oy - wy, oz - wz
            elif d <= knock_radius:
                # gripper closed next to the object: knock it away horizontally
                step = knock_radius - d
                if step > nudge_max:
                    step = nudge_max
                hx, hy = -gx, -gy
                hn = math.sqrt(hx * hx + hy * hy)
                if hn < 1e-12 and i > 0:
                    hx, hy = wx - wps[i - 1, 0], wy - wps[i - 1, 1]
                    hn = math.sqrt(hx * hx + hy * hy)
                if hn >= 1e-12:
                    ox += step * hx / hn
                    oy += step * hy / hn
        obj_at[i, 0] = ox
        obj_at[i, 1] = oy
        obj_at[i, 2] = oz
        attached_at[i] = attached
    return obj_at, attached_at, abort
