"""Biot-Savart velocities by ray tracing through a tetrahedral mesh.

For every evaluation point x and every fan direction s the line
x + R s is traced through the mesh; each tetrahedron it crosses adds the
exact integral of sign(R) s x w over its chord, and the fan weights sum
those line integrals into a velocity.  The work is split over blocks of
tetrahedra; each block writes a private accumulator and the blocks are
summed once at the end.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .geometry import _fold, _ray_tet
from .mesh import TetMesh
from .quadrature import QuadFan

#: Number of fixed tetrahedron blocks in deterministic mode.  Independent
#: of the worker count so the block sums, and their fold order, never change.
REDUCTION_BLOCKS = 64
#: Default near-field guard radius, as a multiple of each tet's h**2.
RMIN2_FACTOR = 4.0


class DomainError(ValueError):
    """Evaluation point where the requested method is not valid."""


@numba.njit(cache=True, nogil=True)
def _accumulate(nodes, vort, tets, h2, cen, rho2, lo, hi, points, self_ids, dirs, kw,
                rmin2_factor, rmin2_fixed, acc):
    """Add the contributions of tets[lo:hi] to ``acc`` (npoints, 3).

    Outer loop over tetrahedra, then points, then rays.  The vertex
    pre-check (guarded by ``rmin2_fixed`` when positive, else
    ``rmin2_factor * h2``) runs first; surviving rays are also rejected
    when their line clears the tet's bounding sphere (centre ``cen``,
    radius**2 ``rho2``).  Both tests are evaluated for the whole fan in a
    branch-free pass before any ray is traced.
    """
    P = np.empty((4, 3))
    W = np.empty((4, 3))
    npts = points.shape[0]
    nray = dirs.shape[0]
    sx = np.ascontiguousarray(dirs[:, 0])
    sy = np.ascontiguousarray(dirs[:, 1])
    sz = np.ascontiguousarray(dirs[:, 2])
    keep = np.empty(nray, dtype=np.bool_)
    for e in range(lo, hi):
        for a in range(4):
            n = tets[e, a]
            for c in range(3):
                P[a, c] = nodes[n, c]
                W[a, c] = vort[n, c]
        hh = h2[e]
        rmin2 = rmin2_fixed if rmin2_fixed > 0.0 else rmin2_factor * hh
        for p in range(npts):
            px = points[p, 0]
            py = points[p, 1]
            pz = points[p, 2]
            rx = P[0, 0] - px
            ry = P[0, 1] - py
            rz = P[0, 2] - pz
            rr = rx * rx + ry * ry + rz * rz
            lim = rr - 2.0 * hh
            if rr <= rmin2 or lim <= 0.0:
                # vertex pre-check disabled near the element
                lim = -1.0
            gx = cen[e, 0] - px
            gy = cen[e, 1] - py
            gz = cen[e, 2] - pz
            # the line misses the sphere iff (g.s)^2 < |g|^2 - rho^2
            glim = gx * gx + gy * gy + gz * gz - rho2[e]
            nkeep = 0
            for q in range(nray):
                d = rx * sx[q] + ry * sy[q] + rz * sz[q]
                g = gx * sx[q] + gy * sy[q] + gz * sz[q]
                k = (d * d >= lim) & (g * g >= glim)
                keep[q] = k
                nkeep += k
            if nkeep == 0:
                continue
            slot = -1
            sid = self_ids[p]
            if sid >= 0:
                for a in range(4):
                    if tets[e, a] == sid:
                        slot = a
            ax = 0.0
            ay = 0.0
            az = 0.0
            for q in range(nray):
                if not keep[q]:
                    continue
                dx = sx[q]
                dy = sy[q]
                dz = sz[q]
                ok, r0, r1, w0x, w0y, w0z, w1x, w1y, w1z = _ray_tet(
                    px, py, pz, dx, dy, dz, P, W, hh, slot)
                if not ok:
                    continue
                cx, cy, cz = _fold(r0, r1, w0x, w0y, w0z, w1x, w1y, w1z)
                k = kw[q]
                ax += k * (dy * cz - dz * cy)
                ay += k * (dz * cx - dx * cz)
                az += k * (dx * cy - dy * cx)
            acc[p, 0] += ax
            acc[p, 1] += ay
            acc[p, 2] += az


@dataclass
class EvalRequest:
    """Everything :func:`evaluate` needs.

    ``self_nodes[i]`` is the mesh node index that ``points[i]`` coincides
    with, or -1.  ``r_min2`` overrides the per-tet default 4 h**2.
    """

    mesh: TetMesh
    points: np.ndarray
    fan: QuadFan
    self_nodes: Optional[np.ndarray] = None
    r_min2: Optional[float] = None
    workers: int = 1
    deterministic: bool = True

    def __post_init__(self):
        self.points = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64).reshape(-1, 3))
        if self.self_nodes is None:
            self.self_nodes = np.full(len(self.points), -1, dtype=np.int64)
        self.self_nodes = np.ascontiguousarray(np.asarray(self.self_nodes, dtype=np.int64))
        if self.self_nodes.shape != (len(self.points),):
            raise ValueError("self_nodes must have one entry per point")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.r_min2 is not None and not self.r_min2 > 0:
            raise ValueError("r_min2 must be positive")


@dataclass
class VelocityField:
    velocities: np.ndarray
    seconds: float
    workers: int = 1

    def __len__(self):
        return len(self.velocities)


def _blocks(n, parts):
    edges = np.linspace(0, n, parts + 1).round().astype(np.int64)
    return list(zip(edges[:-1], edges[1:]))


def _run_range(req, lo, hi, acc):
    m = req.mesh
    _accumulate(m.nodes, m.vorticity, m.tets, m.h2, m.centroid, m.rho2, lo, hi, req.points, req.self_nodes,
                req.fan.directions, req.fan.weights, RMIN2_FACTOR,
                float(req.r_min2 or 0.0), acc)


def evaluate(req: EvalRequest) -> VelocityField:
    """Velocities at ``req.points``.

    Tetrahedra are block-partitioned over ``req.workers`` threads (the
    kernel releases the GIL).  In deterministic mode the tets are cut into
    :data:`REDUCTION_BLOCKS` fixed blocks, each with its own accumulator,
    and the blocks are folded in ascending order, so the result is
    bit-identical for any worker count.  Otherwise each worker owns one
    accumulator and the accumulators are summed once at the end.
    """
    npts = len(req.points)
    ntet = req.mesh.n_tets
    t0 = time.perf_counter()
    if ntet == 0 or npts == 0:
        return VelocityField(np.zeros((npts, 3)), time.perf_counter() - t0, req.workers)

    if req.deterministic:
        blocks = _blocks(ntet, min(REDUCTION_BLOCKS, ntet))
        partial = np.zeros((len(blocks), npts, 3))
        owner = _blocks(len(blocks), min(req.workers, len(blocks)))

        def work(span):
            for b in range(*span):
                _run_range(req, blocks[b][0], blocks[b][1], partial[b])

        if len(owner) == 1:
            work(owner[0])
        else:
            with ThreadPoolExecutor(len(owner)) as pool:
                list(pool.map(work, owner))
        total = np.zeros((npts, 3))
        for b in range(len(blocks)):
            total += partial[b]
    else:
        spans = _blocks(ntet, min(req.workers, ntet))

        def work(span):
            acc = np.zeros((npts, 3))
            _run_range(req, span[0], span[1], acc)
            return acc

        total = np.zeros((npts, 3))
        with ThreadPoolExecutor(len(spans)) as pool:
            for acc in pool.map(work, spans):
                total += acc
    return VelocityField(total, time.perf_counter() - t0, req.workers)


def node_velocities(mesh: TetMesh, fan: QuadFan, workers=1, deterministic=True,
                    nodes=None) -> VelocityField:
    """Velocity at mesh nodes (all, or the given indices), with self-node tags."""
    idx = np.arange(mesh.n_nodes) if nodes is None else np.asarray(nodes, dtype=np.int64)
    return evaluate(EvalRequest(mesh, mesh.nodes[idx], fan, self_nodes=idx,
                                workers=workers, deterministic=deterministic))


def ray_integral(point, dir, mesh: TetMesh, self_node: int = -1, r_min2=None) -> np.ndarray:
    """Sum over crossed tetrahedra of the folded segment integral along one ray
    (unit weight, no fan prefactor)."""
    req = EvalRequest(mesh, np.asarray(point, dtype=np.float64).reshape(1, 3),
                      _single_ray_fan(dir), self_nodes=np.array([self_node]), r_min2=r_min2)
    acc = np.zeros((1, 3))
    if mesh.n_tets:
        _run_range(req, 0, mesh.n_tets, acc)
    return acc[0]


class _single_ray_fan:
    def __init__(self, d):
        self.directions = np.ascontiguousarray(np.asarray(d, dtype=np.float64).reshape(1, 3))
        self.weights = np.ones(1)


# ------------------------------------------------------------------- oracle

def _red_refine(bary):
    """Split barycentric tets (k, 4, 4) into 8 children each (Bey's rule)."""
    v0, v1, v2, v3 = (bary[:, i] for i in range(4))
    m01 = 0.5 * (v0 + v1)
    m02 = 0.5 * (v0 + v2)
    m03 = 0.5 * (v0 + v3)
    m12 = 0.5 * (v1 + v2)
    m13 = 0.5 * (v1 + v3)
    m23 = 0.5 * (v2 + v3)
    kids = [
        (v0, m01, m02, m03), (m01, v1, m12, m13), (m02, m12, v2, m23), (m03, m13, m23, v3),
        (m01, m02, m03, m13), (m01, m02, m12, m13), (m02, m03, m13, m23), (m02, m12, m13, m23),
    ]
    return np.concatenate([np.stack(k, axis=1) for k in kids])


_CENTROIDS = {}


def _subtet_centroids(levels):
    # barycentric centroids of the 8**levels children; each has volume 8**-levels
    if levels not in _CENTROIDS:
        b = np.eye(4)[None]
        for _ in range(levels):
            b = _red_refine(b)
        _CENTROIDS[levels] = b.mean(axis=1)
    return _CENTROIDS[levels]


def _inside(point, P, tol=1e-12):
    # barycentric test of one point against tets P (m, 4, 3)
    T = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0], P[:, 3] - P[:, 0]], axis=-1)
    lam = np.linalg.solve(T, (point - P[:, 0])[..., None])[..., 0]
    full = np.concatenate([1.0 - lam.sum(1, keepdims=True), lam], axis=1)
    return (full >= -tol).all(1)


def brute_force_velocity(point, mesh: TetMesh, subdivisions: int = 4) -> np.ndarray:
    """Direct volume quadrature of the Biot-Savart integral.

    Each tetrahedron is red-refined ``subdivisions`` times and the
    midpoint rule is applied to every child with the linearly
    interpolated vorticity.  Only valid away from the mesh.
    """
    x = np.asarray(point, dtype=np.float64).reshape(3)
    if mesh.n_tets == 0:
        return np.zeros(3)
    P = mesh.nodes[mesh.tets]
    hit = _inside(x, P)
    if hit.any():
        raise DomainError(f"point {x.tolist()} lies in or on tetrahedra "
                          f"{np.flatnonzero(hit)[:5].tolist()}")
    B = _subtet_centroids(subdivisions)
    frac = 8.0 ** -subdivisions
    vol = np.abs(mesh.volumes())
    W = mesh.vorticity[mesh.tets]
    v = np.zeros(3)
    for e in range(mesh.n_tets):
        y = B @ P[e]
        w = B @ W[e]
        r = x - y
        R3 = np.einsum("ij,ij->i", r, r) ** 1.5
        v -= (np.cross(r, w) / R3[:, None]).sum(0) * (vol[e] * frac)
    return v / (4.0 * math.pi)
