# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; semantics mirror ``_pykernels`` exactly."""
import heapq

import numpy as np

cimport numpy as cnp
from libc.math cimport erfc, exp, sqrt, INFINITY

cnp.import_array()

BACKEND = "cython"


cdef inline double _sed(double x0, double y0, double z0, double t0,
                        double x1, double y1, double z1, double t1,
                        double x2, double y2, double z2, double t2) noexcept nogil:
    cdef double ratio = (t1 - t0) / (t2 - t0)
    cdef double dx = x1 - (x0 + (x2 - x0) * ratio)
    cdef double dy = y1 - (y0 + (y2 - y0) * ratio)
    cdef double dz = z1 - (z0 + (z2 - z0) * ratio)
    return sqrt(dx * dx + dy * dy + dz * dz)


def sed(double x0, double y0, double z0, double t0,
        double x1, double y1, double z1, double t1,
        double x2, double y2, double z2, double t2):
    return _sed(x0, y0, z0, t0, x1, y1, z1, t1, x2, y2, z2, t2)


cdef inline double _sed_idx(double[:, ::1] p, double[::1] t, Py_ssize_t a,
                            Py_ssize_t i, Py_ssize_t b) noexcept nogil:
    return _sed(p[a, 0], p[a, 1], p[a, 2], t[a],
                p[i, 0], p[i, 1], p[i, 2], t[i],
                p[b, 0], p[b, 1], p[b, 2], t[b])


def squishe_select(pos, t, pinned, long target_count, double max_error):
    cdef double[:, ::1] p = np.ascontiguousarray(pos, dtype=np.float64)
    cdef double[::1] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef cnp.uint8_t[::1] pin = np.ascontiguousarray(pinned, dtype=np.uint8)
    cdef Py_ssize_t n = p.shape[0]
    cdef long[::1] prev = np.arange(-1, n - 1, dtype=np.int_)
    cdef long[::1] nxt = np.arange(1, n + 1, dtype=np.int_)
    cdef double[::1] acc = np.zeros(n)
    cdef double[::1] prio = np.full(n, INFINITY)
    cdef long[::1] version = np.zeros(n, dtype=np.int_)
    alive_arr = np.ones(n, dtype=bool)
    cdef cnp.npy_bool[::1] alive = alive_arr
    cdef Py_ssize_t i, j, a, b, remaining = n
    cdef double pr
    cdef long ver
    cdef bint count_mode = target_count >= 0
    heap = []
    for i in range(1, n - 1):
        if not pin[i]:
            prio[i] = _sed_idx(p, tt, i - 1, i, i + 1)
            heap.append((prio[i], i, 0))
    heapq.heapify(heap)
    order = []
    removed = []
    while heap:
        if count_mode and remaining <= target_count:
            break
        pr, i, ver = heap[0]
        if ver != version[i] or not alive[i]:
            heapq.heappop(heap)
            continue
        if not count_mode and pr > max_error:
            break
        heapq.heappop(heap)
        alive[i] = False
        remaining -= 1
        order.append(i)
        removed.append(pr)
        a = prev[i]
        b = nxt[i]
        nxt[a] = b
        prev[b] = a
        for j in (a, b):
            acc[j] += pr
            if 0 < j < n - 1 and not pin[j]:
                prio[j] = acc[j] + _sed_idx(p, tt, prev[j], j, nxt[j])
                version[j] += 1
                heapq.heappush(heap, (prio[j], j, version[j]))
    return alive_arr, np.array(order, dtype=np.int64), np.array(removed, dtype=np.float64)


def lloyd(points, init, long max_iter):
    cdef double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cent_arr = np.array(init, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] cent = cent_arr
    cdef Py_ssize_t npts = x.shape[0], k = cent.shape[0], d = x.shape[1]
    labels_arr = np.full(npts, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef double[:, ::1] sums = np.zeros((k, d))
    cdef cnp.int64_t[::1] counts = np.zeros(k, dtype=np.int64)
    cdef Py_ssize_t it = 0, i, c, q, best
    cdef double dist, bd, diff
    cdef bint changed
    for it in range(1, max_iter + 1):
        changed = False
        for i in range(npts):
            best = 0
            bd = INFINITY
            for c in range(k):
                dist = 0.0
                for q in range(d):
                    diff = x[i, q] - cent[c, q]
                    dist += diff * diff
                if dist < bd:
                    bd = dist
                    best = c
            if labels[i] != best:
                changed = True
                labels[i] = best
        if not changed:
            it -= 1
            break
        sums[:, :] = 0.0
        counts[:] = 0
        for i in range(npts):
            c = labels[i]
            counts[c] += 1
            for q in range(d):
                sums[c, q] += x[i, q]
        for c in range(k):
            if counts[c]:
                for q in range(d):
                    cent[c, q] = sums[c, q] / counts[c]
    return cent_arr, labels_arr, it


def se_cross(a, b, double lengthscale):
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], d = A.shape[1], i, j, q
    out_arr = np.empty((m, n))
    cdef double[:, ::1] out = out_arr
    cdef double inv = 1.0 / (2.0 * lengthscale * lengthscale), s, diff
    with nogil:
        for i in range(m):
            for j in range(n):
                s = 0.0
                for q in range(d):
                    diff = A[i, q] - B[j, q]
                    s += diff * diff
                out[i, j] = exp(-s * inv)
    return out_arr


def expected_improvement(mean, sd, double best):
    cdef double[::1] mu = np.ascontiguousarray(mean, dtype=np.float64)
    cdef double[::1] sg = np.ascontiguousarray(sd, dtype=np.float64)
    cdef Py_ssize_t n = mu.shape[0], i
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double gain, s, z, cdf, pdf, v
    cdef double rt2 = sqrt(2.0), rt2pi = sqrt(2.0 * 3.141592653589793)
    with nogil:
        for i in range(n):
            gain = mu[i] - best
            s = sg[i]
            if s <= 0.0:
                out[i] = gain if gain > 0.0 else 0.0
                continue
            z = gain / s
            cdf = 0.5 * erfc(-z / rt2)
            pdf = exp(-0.5 * z * z) / rt2pi
            v = gain * cdf + s * pdf
            out[i] = v if v > 0.0 else 0.0
    return out_arr


def rollout_core(wps, contact, obj0, double grasp_radius, double knock_radius,
                 double nudge_max, double rest_z, bint push, lo, hi):
    cdef double[:, ::1] w = np.ascontiguousarray(wps, dtype=np.float64)
    cdef cnp.uint8_t[::1] con = np.ascontiguousarray(contact, dtype=np.uint8)
    cdef double[::1] L = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] H = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], i, j
    obj_arr = np.empty((n, 3))
    att_arr = np.zeros(n, dtype=bool)
    cdef double[:, ::1] obj = obj_arr
    cdef cnp.npy_bool[::1] att = att_arr
    cdef double ox = obj0[0], oy = obj0[1], oz = obj0[2]
    cdef double offx = 0.0, offy = 0.0, offz = 0.0
    cdef double r = grasp_radius
    cdef double wx, wy, wz, px, py, pz, sx, sy, sz, ss, u, cx, cy, cz, d
    cdef double gx, gy, gz, step, hx, hy, hn
    cdef bint attached = False, grasp_next, passing
    cdef long abort = -1
    for i in range(n):
        wx = w[i, 0]
        wy = w[i, 1]
        wz = w[i, 2]
        if (wx < L[0] - 1e-9 or wx > H[0] + 1e-9 or wy < L[1] - 1e-9 or wy > H[1] + 1e-9
                or wz < L[2] - 1e-9 or wz > H[2] + 1e-9):
            abort = i
            for j in range(i, n):
                obj[j, 0] = ox
                obj[j, 1] = oy
                obj[j, 2] = oz
                att[j] = attached
            break
        if i > 0:
            if attached:
                ox = wx + offx
                oy = wy + offy
                oz = rest_z if push else wz + offz
            else:
                px = w[i - 1, 0]
                py = w[i - 1, 1]
                pz = w[i - 1, 2]
                sx = wx - px
                sy = wy - py
                sz = wz - pz
                ss = sx * sx + sy * sy + sz * sz
                u = 0.0
                if ss > 0.0:
                    u = ((ox - px) * sx + (oy - py) * sy + (oz - pz) * sz) / ss
                passing = 0.0 < u < 1.0
                grasp_next = False
                d = INFINITY
                if passing:
                    cx = px + u * sx
                    cy = py + u * sy
                    cz = pz + u * sz
                    d = sqrt((ox - cx) ** 2 + (oy - cy) ** 2 + (oz - cz) ** 2)
                    gx = wx - ox
                    gy = wy - oy
                    gz = wz - oz
                    grasp_next = con[i] and sqrt(gx * gx + gy * gy + gz * gz) <= r
                if passing and d < r and not grasp_next:
                    step = r - d
                    if step > nudge_max:
                        step = nudge_max
                    hx = sx
                    hy = sy
                    hn = sqrt(hx * hx + hy * hy)
                    if hn < 1e-12:
                        hx = ox - cx
                        hy = oy - cy
                        hn = sqrt(hx * hx + hy * hy)
                    if hn >= 1e-12:
                        ox += step * hx / hn
                        oy += step * hy / hn
        if attached and not con[i]:
            attached = False
            oz = rest_z
        elif not attached and con[i]:
            gx = wx - ox
            gy = wy - oy
            gz = wz - oz
            d = sqrt(gx * gx + gy * gy + gz * gz)
            if d <= r:
                attached = True
                offx = ox - wx
                offy = oy - wy
                offz = oz - wz
            elif d <= knock_radius:
                step = knock_radius - d
                if step > nudge_max:
                    step = nudge_max
                hx = -gx
                hy = -gy
                hn = sqrt(hx * hx + hy * hy)
                if hn < 1e-12 and i > 0:
                    hx = wx - w[i - 1, 0]
                    hy = wy - w[i - 1, 1]
                    hn = sqrt(hx * hx + hy * hy)
                if hn >= 1e-12:
                    ox += step * hx / hn
                    oy += step * hy / hn
        obj[i, 0] = ox
        obj[i, 1] = oy
        obj[i, 2] = oz
        att[i] = attached
    return obj_arr, att_arr, abort
