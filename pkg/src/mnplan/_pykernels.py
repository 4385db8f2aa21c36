"""Pure numpy implementations of the collision and nearest-neighbour kernels.

These mirror ``_ckernels.pyx`` one-for-one and are used whenever the compiled
extension is unavailable (or ``MNPLAN_PURE_PYTHON=1`` is set).

All box arrays are ``(B, m)`` float64 lower/upper corners; ``ws_lo``/``ws_hi``
are the workspace bounds. Leaving the workspace counts as a collision and
boundaries are closed.
"""
import numpy as np


def points_collide_mask(points, box_lo, box_hi, ws_lo, ws_hi):
    """Per-point collision flags for an ``(K, m)`` array of points."""
    points = np.asarray(points, dtype=np.float64)
    out = np.any((points < ws_lo) | (points > ws_hi), axis=1)
    if box_lo.shape[0]:
        p = points[:, None, :]
        inside = np.all((p >= box_lo) & (p <= box_hi), axis=2)
        out |= inside.any(axis=1)
    return out


def points_collide(points, box_lo, box_hi, ws_lo, ws_hi):
    return bool(points_collide_mask(points, box_lo, box_hi, ws_lo, ws_hi).any())


def _segments_hit_boxes(a, b, box_lo, box_hi):
    # a, b: (S, m). Returns (S,) bool, closed slab test against every box.
    S, m = a.shape
    if box_lo.shape[0] == 0 or S == 0:
        return np.zeros(S, dtype=bool)
    a3 = a[:, None, :]
    d = (b - a)[:, None, :]
    zero = d == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (box_lo - a3) / d
        tb = (box_hi - a3) / d
    t_near = np.where(zero, -np.inf, np.minimum(ta, tb))
    t_far = np.where(zero, np.inf, np.maximum(ta, tb))
    # parallel axes: miss unless the start coordinate is inside the slab
    parallel_miss = zero & ((a3 < box_lo) | (a3 > box_hi))
    t0 = np.maximum(t_near.max(axis=2), 0.0)
    t1 = np.minimum(t_far.min(axis=2), 1.0)
    hit = (t0 <= t1) & ~parallel_miss.any(axis=2)
    return hit.any(axis=1)


def segment_collides(a, b, box_lo, box_hi, ws_lo, ws_hi):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(a < ws_lo) or np.any(a > ws_hi) or np.any(b < ws_lo) or np.any(b > ws_hi):
        return True
    return bool(_segments_hit_boxes(a[None, :], b[None, :], box_lo, box_hi)[0])


def chain_joints(configs, link_lengths):
    """Joint positions ``(K, k+1, 2)`` of planar chains ``(x, y, th_1..th_k)``.

    Joint angles are relative; the absolute heading of link ``i`` is the
    cumulative sum of the first ``i`` angles.
    """
    configs = np.asarray(configs, dtype=np.float64)
    K = configs.shape[0]
    k = len(link_lengths)
    heading = np.cumsum(configs[:, 2:2 + k], axis=1)
    steps = np.empty((K, k, 2))
    steps[:, :, 0] = np.cos(heading) * link_lengths
    steps[:, :, 1] = np.sin(heading) * link_lengths
    joints = np.empty((K, k + 1, 2))
    joints[:, 0, :] = configs[:, :2]
    joints[:, 1:, :] = configs[:, None, :2] + np.cumsum(steps, axis=1)
    return joints


def chains_collide(configs, link_lengths, box_lo, box_hi, ws_lo, ws_hi):
    joints = chain_joints(configs, np.asarray(link_lengths, dtype=np.float64))
    flat = joints.reshape(-1, 2)
    if np.any(flat < ws_lo) or np.any(flat > ws_hi):
        return True
    a = joints[:, :-1, :].reshape(-1, 2)
    b = joints[:, 1:, :].reshape(-1, 2)
    return bool(_segments_hit_boxes(a, b, box_lo, box_hi).any())


def rects_collide(poses, half_extents, box_lo, box_hi, ws_lo, ws_hi):
    """Separating-axis test for oriented rectangles ``(x, y, theta)``."""
    poses = np.asarray(poses, dtype=np.float64)
    hx, hy = float(half_extents[0]), float(half_extents[1])
    c = np.cos(poses[:, 2])
    s = np.sin(poses[:, 2])
    ac, as_ = np.abs(c), np.abs(s)
    ext_x = ac * hx + as_ * hy
    ext_y = as_ * hx + ac * hy
    cx, cy = poses[:, 0], poses[:, 1]
    if (np.any(cx - ext_x < ws_lo[0]) or np.any(cx + ext_x > ws_hi[0])
            or np.any(cy - ext_y < ws_lo[1]) or np.any(cy + ext_y > ws_hi[1])):
        return True
    if box_lo.shape[0] == 0:
        return False
    bcx = 0.5 * (box_lo[:, 0] + box_hi[:, 0])[None, :]
    bcy = 0.5 * (box_lo[:, 1] + box_hi[:, 1])[None, :]
    bhx = 0.5 * (box_hi[:, 0] - box_lo[:, 0])[None, :]
    bhy = 0.5 * (box_hi[:, 1] - box_lo[:, 1])[None, :]
    cx, cy = cx[:, None], cy[:, None]
    ext_x, ext_y = ext_x[:, None], ext_y[:, None]
    c, s, ac, as_ = c[:, None], s[:, None], ac[:, None], as_[:, None]
    sep = (cx - ext_x > box_hi[None, :, 0]) | (cx + ext_x < box_lo[None, :, 0])
    sep |= (cy - ext_y > box_hi[None, :, 1]) | (cy + ext_y < box_lo[None, :, 1])
    dx, dy = bcx - cx, bcy - cy
    # rectangle's own axes u = (c, s), v = (-s, c)
    sep |= np.abs(dx * c + dy * s) > hx + ac * bhx + as_ * bhy
    sep |= np.abs(-dx * s + dy * c) > hy + as_ * bhx + ac * bhy
    return bool((~sep).any())


KIND_POINT, KIND_RECT, KIND_CHAIN = 0, 1, 2


def steer_collides(kind, c1, c2, lower, upper, scale, delta, geom, box_lo, box_hi, ws_lo, ws_hi):
    """True if any configuration interpolated from ``c1`` to ``c2`` collides.

    ``K = ceil(|(c2 - c1) * scale| / delta)``; samples ``c1 + (i/K)(c2 - c1)``
    for ``i = 0..K`` (last one exactly ``c2``), clamped into bounds. Endpoints
    outside ``[lower, upper]`` count as collisions.
    """
    acc = 0.0
    for k in range(c1.shape[0]):
        if c1[k] < lower[k] or c1[k] > upper[k] or c2[k] < lower[k] or c2[k] > upper[k]:
            return True
        t = (float(c2[k]) - float(c1[k])) * float(scale[k])
        acc = acc + t * t
    steps = int(np.ceil(np.sqrt(acc) / delta))
    if steps == 0:
        configs = c1[None, :].copy()
    else:
        t = np.arange(steps + 1, dtype=np.float64) / steps
        configs = np.clip(c1 + t[:, None] * (c2 - c1), lower, upper)
        configs[-1] = c2
    if kind == KIND_POINT:
        return points_collide(configs, box_lo, box_hi, ws_lo, ws_hi)
    if kind == KIND_RECT:
        return rects_collide(configs, geom, box_lo, box_hi, ws_lo, ws_hi)
    return chains_collide(configs, geom, box_lo, box_hi, ws_lo, ws_hi)


def nearest(nodes, n, q):
    """Index of the nearest of the first ``n`` rows of ``nodes`` (lowest index on ties)."""
    diff = nodes[:n] - q
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def within_radius(nodes, n, q, r):
    diff = nodes[:n] - q
    d2 = np.einsum("ij,ij->i", diff, diff)
    return np.flatnonzero(d2 <= r * r).astype(np.intp)
