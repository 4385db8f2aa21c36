# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled collision and nearest-neighbour kernels.

Same contracts as ``mnplan._pykernels``; loops exit at the first hit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, fabs, sqrt, ceil, INFINITY

cnp.import_array()

DEF KIND_POINT = 0
DEF KIND_RECT = 1
DEF KIND_CHAIN = 2
DEF MAX_DIM = 64


cdef inline bint _seg_box(const double* a, const double* b,
                          const double[:, ::1] box_lo, const double[:, ::1] box_hi,
                          Py_ssize_t j, Py_ssize_t m) noexcept nogil:
    cdef double t0 = 0.0, t1 = 1.0, d, ta, tb, tmp
    cdef Py_ssize_t k
    for k in range(m):
        d = b[k] - a[k]
        if d == 0.0:
            if a[k] < box_lo[j, k] or a[k] > box_hi[j, k]:
                return False
        else:
            ta = (box_lo[j, k] - a[k]) / d
            tb = (box_hi[j, k] - a[k]) / d
            if ta > tb:
                tmp = ta
                ta = tb
                tb = tmp
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    return t0 <= t1


cdef inline bint _point_hits(const double* p, Py_ssize_t m,
                             const double[:, ::1] lo, const double[:, ::1] hi,
                             const double[::1] wlo, const double[::1] whi) noexcept nogil:
    cdef Py_ssize_t j, k
    cdef bint inside
    for k in range(m):
        if p[k] < wlo[k] or p[k] > whi[k]:
            return True
    for j in range(lo.shape[0]):
        inside = True
        for k in range(m):
            if p[k] < lo[j, k] or p[k] > hi[j, k]:
                inside = False
                break
        if inside:
            return True
    return False


cdef inline bint _rect_hits(double cx, double cy, double theta, double hx, double hy,
                            const double[:, ::1] lo, const double[:, ::1] hi,
                            const double[::1] wlo, const double[::1] whi) noexcept nogil:
    cdef double c = cos(theta), s = sin(theta)
    cdef double ac = fabs(c), as_ = fabs(s)
    cdef double ext_x = ac * hx + as_ * hy
    cdef double ext_y = as_ * hx + ac * hy
    cdef double bcx, bcy, bhx, bhy, dx, dy
    cdef Py_ssize_t j
    if (cx - ext_x < wlo[0] or cx + ext_x > whi[0]
            or cy - ext_y < wlo[1] or cy + ext_y > whi[1]):
        return True
    for j in range(lo.shape[0]):
        if cx - ext_x > hi[j, 0] or cx + ext_x < lo[j, 0]:
            continue
        if cy - ext_y > hi[j, 1] or cy + ext_y < lo[j, 1]:
            continue
        bcx = 0.5 * (lo[j, 0] + hi[j, 0])
        bcy = 0.5 * (lo[j, 1] + hi[j, 1])
        bhx = 0.5 * (hi[j, 0] - lo[j, 0])
        bhy = 0.5 * (hi[j, 1] - lo[j, 1])
        dx = bcx - cx
        dy = bcy - cy
        if fabs(dx * c + dy * s) > hx + ac * bhx + as_ * bhy:
            continue
        if fabs(-dx * s + dy * c) > hy + as_ * bhx + ac * bhy:
            continue
        return True
    return False


cdef inline bint _chain_hits(const double* q, const double[::1] L,
                             const double[:, ::1] lo, const double[:, ::1] hi,
                             const double[::1] wlo, const double[::1] whi) noexcept nogil:
    cdef double heading = 0.0, sx = 0.0, sy = 0.0
    cdef double pa[2]
    cdef double pb[2]
    cdef Py_ssize_t l, j
    pa[0] = q[0]
    pa[1] = q[1]
    if pa[0] < wlo[0] or pa[0] > whi[0] or pa[1] < wlo[1] or pa[1] > whi[1]:
        return True
    for l in range(L.shape[0]):
        heading = heading + q[2 + l]
        sx = sx + cos(heading) * L[l]
        sy = sy + sin(heading) * L[l]
        pb[0] = q[0] + sx
        pb[1] = q[1] + sy
        if pb[0] < wlo[0] or pb[0] > whi[0] or pb[1] < wlo[1] or pb[1] > whi[1]:
            return True
        for j in range(lo.shape[0]):
            if _seg_box(pa, pb, lo, hi, j, 2):
                return True
        pa[0] = pb[0]
        pa[1] = pb[1]
    return False


def points_collide_mask(points, box_lo, box_hi, ws_lo, ws_hi):
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] lo = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef const double[::1] wlo = np.ascontiguousarray(ws_lo, dtype=np.float64)
    cdef const double[::1] whi = np.ascontiguousarray(ws_hi, dtype=np.float64)
    cdef Py_ssize_t K = P.shape[0], m = P.shape[1], i
    out = np.zeros(K, dtype=bool)
    cdef cnp.npy_bool[::1] o = out
    with nogil:
        for i in range(K):
            o[i] = _point_hits(&P[i, 0], m, lo, hi, wlo, whi)
    return out


def points_collide(points, box_lo, box_hi, ws_lo, ws_hi):
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] lo = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef const double[::1] wlo = np.ascontiguousarray(ws_lo, dtype=np.float64)
    cdef const double[::1] whi = np.ascontiguousarray(ws_hi, dtype=np.float64)
    cdef Py_ssize_t K = P.shape[0], m = P.shape[1], i
    cdef bint hit = False
    with nogil:
        for i in range(K):
            if _point_hits(&P[i, 0], m, lo, hi, wlo, whi):
                hit = True
                break
    return bool(hit)


def segment_collides(a, b, box_lo, box_hi, ws_lo, ws_hi):
    cdef const double[::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] Bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] lo = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef const double[::1] wlo = np.ascontiguousarray(ws_lo, dtype=np.float64)
    cdef const double[::1] whi = np.ascontiguousarray(ws_hi, dtype=np.float64)
    cdef Py_ssize_t m = A.shape[0], nb = lo.shape[0], j, k
    cdef bint hit = False
    with nogil:
        for k in range(m):
            if A[k] < wlo[k] or A[k] > whi[k] or Bv[k] < wlo[k] or Bv[k] > whi[k]:
                hit = True
                break
        if not hit:
            for j in range(nb):
                if _seg_box(&A[0], &Bv[0], lo, hi, j, m):
                    hit = True
                    break
    return bool(hit)


def chains_collide(configs, link_lengths, box_lo, box_hi, ws_lo, ws_hi):
    cdef const double[:, ::1] C = np.ascontiguousarray(configs, dtype=np.float64)
    cdef const double[::1] L = np.ascontiguousarray(link_lengths, dtype=np.float64)
    cdef const double[:, ::1] lo = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef const double[::1] wlo = np.ascontiguousarray(ws_lo, dtype=np.float64)
    cdef const double[::1] whi = np.ascontiguousarray(ws_hi, dtype=np.float64)
    cdef Py_ssize_t K = C.shape[0], i
    cdef bint hit = False
    with nogil:
        for i in range(K):
            if _chain_hits(&C[i, 0], L, lo, hi, wlo, whi):
                hit = True
                break
    return bool(hit)


def rects_collide(poses, half_extents, box_lo, box_hi, ws_lo, ws_hi):
    cdef const double[:, ::1] P = np.ascontiguousarray(poses, dtype=np.float64)
    cdef const double[:, ::1] lo = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef const double[::1] wlo = np.ascontiguousarray(ws_lo, dtype=np.float64)
    cdef const double[::1] whi = np.ascontiguousarray(ws_hi, dtype=np.float64)
    cdef double hx = half_extents[0], hy = half_extents[1]
    cdef Py_ssize_t K = P.shape[0], i
    cdef bint hit = False
    with nogil:
        for i in range(K):
            if _rect_hits(P[i, 0], P[i, 1], P[i, 2], hx, hy, lo, hi, wlo, whi):
                hit = True
                break
    return bool(hit)


def steer_collides(int kind, c1, c2, lower, upper, scale, double delta, geom,
                   box_lo, box_hi, ws_lo, ws_hi):
    """True if any configuration interpolated from ``c1`` to ``c2`` collides.

    ``K = ceil(|(c2 - c1) * scale| / delta)``; samples ``c1 + (i/K)(c2 - c1)``
    for ``i = 0..K`` (last one exactly ``c2``), clamped into bounds. Endpoints
    outside ``[lower, upper]`` count as collisions.
    """
    cdef const double[::1] A = c1
    cdef const double[::1] B = c2
    cdef const double[::1] rlo = lower
    cdef const double[::1] rhi = upper
    cdef const double[::1] sc = scale
    cdef const double[::1] G = geom
    cdef const double[:, ::1] lo = box_lo
    cdef const double[:, ::1] hi = box_hi
    cdef const double[::1] wlo = ws_lo
    cdef const double[::1] whi = ws_hi
    cdef Py_ssize_t d = A.shape[0], k, i, steps
    cdef double acc = 0.0, t, v, dist
    cdef double q[MAX_DIM]
    cdef bint hit = False
    if d > MAX_DIM:
        raise ValueError("configuration dimension too large")
    with nogil:
        for k in range(d):
            if A[k] < rlo[k] or A[k] > rhi[k] or B[k] < rlo[k] or B[k] > rhi[k]:
                hit = True
                break
            t = (B[k] - A[k]) * sc[k]
            acc = acc + t * t
        if not hit:
            dist = sqrt(acc)
            steps = <Py_ssize_t>ceil(dist / delta)
            for i in range(steps + 1):
                if i == steps:
                    for k in range(d):
                        q[k] = B[k]
                else:
                    t = <double>i / <double>steps
                    for k in range(d):
                        v = A[k] + t * (B[k] - A[k])
                        if v < rlo[k]:
                            v = rlo[k]
                        elif v > rhi[k]:
                            v = rhi[k]
                        q[k] = v
                if kind == KIND_POINT:
                    hit = _point_hits(q, d, lo, hi, wlo, whi)
                elif kind == KIND_RECT:
                    hit = _rect_hits(q[0], q[1], q[2], G[0], G[1], lo, hi, wlo, whi)
                else:
                    hit = _chain_hits(q, G, lo, hi, wlo, whi)
                if hit:
                    break
    return bool(hit)


def nearest(nodes, Py_ssize_t n, q):
    cdef const double[:, ::1] N = nodes
    cdef const double[::1] Q = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t d = N.shape[1], i, k, best = 0
    cdef double bd = INFINITY, acc, t
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(d):
                t = N[i, k] - Q[k]
                acc = acc + t * t
            if acc < bd:
                bd = acc
                best = i
    return best


def within_radius(nodes, Py_ssize_t n, q, double r):
    cdef const double[:, ::1] N = nodes
    cdef const double[::1] Q = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t d = N.shape[1], i, k, cnt = 0
    cdef double acc, t, r2 = r * r
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] o = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(d):
                t = N[i, k] - Q[k]
                acc = acc + t * t
            if acc <= r2:
                o[cnt] = i
                cnt += 1
    return out[:cnt]
