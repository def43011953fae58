"""Ray/triangle and ray/tetrahedron primitives.

The ``_``-prefixed functions are scalar numba kernels shared with the
solver's inner loop.  They use only add, multiply, compare and at most
one division per call: no square roots, logs or trigonometry.  The
public wrappers take and return numpy vectors.

Rays are two-sided lines.  The parameter ``t`` along ``origin + t * dir``
may be negative and negative hits are always reported.
"""
from __future__ import annotations

from typing import NamedTuple, Optional

import numba
import numpy as np

DET_EPS = 1e-12
BARY_TOL = 1e-10
DEDUP_TOL = 1e-9

# Faces as (vertex slots) of a tetrahedron; each face omits one vertex.
TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]], dtype=np.int64)


class Ray(NamedTuple):
    origin: np.ndarray
    direction: np.ndarray


class TriHit(NamedTuple):
    t: float
    u: float
    v: float


class TetSegment(NamedTuple):
    r0: float
    r1: float
    w0: np.ndarray
    w1: np.ndarray


_jit = numba.njit(cache=True, nogil=True)


@_jit
def _ray_tri(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz):
    # Moller-Trumbore without back-face or t >= 0 culling
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -DET_EPS < det < DET_EPS:
        return False, 0.0, 0.0, 0.0
    inv = 1.0 / det
    sx = ox - ax
    sy = oy - ay
    sz = oz - az
    u = (sx * px + sy * py + sz * pz) * inv
    if u < -BARY_TOL or u > 1.0 + BARY_TOL:
        return False, 0.0, 0.0, 0.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -BARY_TOL or u + v > 1.0 + BARY_TOL:
        return False, 0.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return True, t, u, v


@_jit
def _cull(rx, ry, rz, rr, dx, dy, dz, lim, rmin2):
    # r = vertex - point, rr = |r|^2, lim = |r|^2 - 2 h^2
    if rr <= rmin2 or lim <= 0.0:
        return False
    d = rx * dx + ry * dy + rz * dz
    return d * d < lim


@_jit
def _ray_tet(ox, oy, oz, dx, dy, dz, P, W, h2, self_slot):
    """Segment of the line through one tetrahedron.

    ``P`` and ``W`` are the (4, 3) vertex positions and vorticities.
    Returns (found, r0, r1, w0x, w0y, w0z, w1x, w1y, w1z) with r0 <= r1.
    """
    tol2 = DEDUP_TOL * DEDUP_TOL * h2
    nhit = 0
    tmin = 0.0
    tmax = 0.0
    w0x = w0y = w0z = 0.0
    w1x = w1y = w1z = 0.0
    for f in range(4):
        i = TET_FACES[f, 0]
        j = TET_FACES[f, 1]
        k = TET_FACES[f, 2]
        ok, t, u, v = _ray_tri(
            ox, oy, oz, dx, dy, dz,
            P[i, 0], P[i, 1], P[i, 2],
            P[j, 0], P[j, 1], P[j, 2],
            P[k, 0], P[k, 1], P[k, 2],
        )
        if not ok:
            continue
        a = 1.0 - u - v
        wx = a * W[i, 0] + u * W[j, 0] + v * W[k, 0]
        wy = a * W[i, 1] + u * W[j, 1] + v * W[k, 1]
        wz = a * W[i, 2] + u * W[j, 2] + v * W[k, 2]
        if nhit == 0:
            tmin = tmax = t
            w0x, w0y, w0z = wx, wy, wz
            w1x, w1y, w1z = wx, wy, wz
            nhit = 1
            continue
        # a hit within the dedup window of a kept end point is a duplicate
        if (t - tmin) * (t - tmin) < tol2 or (t - tmax) * (t - tmax) < tol2:
            continue
        nhit += 1
        if t < tmin:
            tmin = t
            w0x, w0y, w0z = wx, wy, wz
        elif t > tmax:
            tmax = t
            w1x, w1y, w1z = wx, wy, wz
    if nhit >= 2:
        return True, tmin, tmax, w0x, w0y, w0z, w1x, w1y, w1z
    if nhit == 1 and self_slot >= 0:
        sx = W[self_slot, 0]
        sy = W[self_slot, 1]
        sz = W[self_slot, 2]
        if tmin < 0.0:
            return True, tmin, 0.0, w0x, w0y, w0z, sx, sy, sz
        return True, 0.0, tmin, sx, sy, sz, w0x, w0y, w0z
    return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0


@_jit
def _fold(r0, r1, w0x, w0y, w0z, w1x, w1y, w1z):
    """Integral of sign(R) * w(R) over [r0, r1] for linear w.

    The half line R < 0 stands for the opposite ray direction, so its
    contribution enters with a minus sign.  Result still needs s x (.).
    """
    if r0 >= 0.0:
        h = 0.5 * (r1 - r0)
        return h * (w0x + w1x), h * (w0y + w1y), h * (w0z + w1z)
    if r1 <= 0.0:
        h = 0.5 * (r0 - r1)
        return h * (w0x + w1x), h * (w0y + w1y), h * (w0z + w1z)
    # straddles the evaluation point: split at R = 0
    f = -r0 / (r1 - r0)
    mx = w0x + f * (w1x - w0x)
    my = w0y + f * (w1y - w0y)
    mz = w0z + f * (w1z - w0z)
    a = 0.5 * r1
    b = 0.5 * r0
    return (
        a * (mx + w1x) + b * (w0x + mx),
        a * (my + w1y) + b * (w0y + my),
        a * (mz + w1z) + b * (w0z + mz),
    )


def _vec(x):
    return np.asarray(x, dtype=np.float64).reshape(3)


def ray_triangle_intersect(ray: Ray, a, b, c) -> Optional[TriHit]:
    """Intersection (t, u, v) of the line through ``ray`` with triangle abc.

    ``origin + t * direction == (1 - u - v) a + u b + v c``.  Returns
    ``None`` on a miss or when the line is parallel to the plane.
    """
    o = _vec(ray.origin)
    d = _vec(ray.direction)
    a, b, c = _vec(a), _vec(b), _vec(c)
    ok, t, u, v = _ray_tri(*o, *d, *a, *b, *c)
    return TriHit(t, u, v) if ok else None


def tet_cull(eval_point, direction, vertex, h2: float, r_min2: float) -> bool:
    """True when the tetrahedron with ``vertex`` and longest squared edge
    ``h2`` cannot be crossed by the line from ``eval_point`` along
    ``direction``.  Never culls within ``r_min2`` of the vertex."""
    r = _vec(vertex) - _vec(eval_point)
    rr = float(r @ r)
    return bool(_cull(r[0], r[1], r[2], rr, *_vec(direction), rr - 2.0 * h2, r_min2))


def ray_tet_intersect(ray: Ray, vertices, vorticity, self_slot: int = -1,
                      h2: float | None = None) -> Optional[TetSegment]:
    """Entry/exit segment of the line through a tetrahedron.

    ``self_slot`` is the local index (0-3) of the vertex the ray starts
    from when the evaluation point is a node of this tetrahedron, else -1.
    """
    P = np.ascontiguousarray(vertices, dtype=np.float64).reshape(4, 3)
    W = np.ascontiguousarray(vorticity, dtype=np.float64).reshape(4, 3)
    if h2 is None:
        h2 = max_edge2(P)
    res = _ray_tet(*_vec(ray.origin), *_vec(ray.direction), P, W, float(h2), int(self_slot))
    if not res[0]:
        return None
    return TetSegment(res[1], res[2], np.array(res[3:6]), np.array(res[6:9]))


def segment_contribution(seg: TetSegment, direction) -> np.ndarray:
    """1/2 (r1 - r0) s x (w0 + w1): the line integral of s x w over the
    segment for w linear along it."""
    d = _vec(direction)
    return 0.5 * (seg.r1 - seg.r0) * np.cross(d, _vec(seg.w0) + _vec(seg.w1))


def folded_segment_contribution(seg: TetSegment, direction) -> np.ndarray:
    """Integral of sign(R) s x w over the segment.

    Equal to :func:`segment_contribution` for segments with r0 >= 0.
    This is the quantity the solver sums, since a fan direction with
    negative R stands for the opposite direction.
    """
    c = _fold(seg.r0, seg.r1, *_vec(seg.w0), *_vec(seg.w1))
    return np.cross(_vec(direction), np.array(c))


def max_edge2(P) -> float:
    P = np.asarray(P, dtype=np.float64)
    d = P[:, None, :] - P[None, :, :]
    return float((d * d).sum(-1).max())


def signed_volume(a, b, c, d) -> float:
    a = _vec(a)
    return float(np.dot(_vec(b) - a, np.cross(_vec(c) - a, _vec(d) - a)) / 6.0)
