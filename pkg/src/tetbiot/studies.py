"""Benchmark drivers: Hill's vortex accuracy, ring convergence, scaling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .mesh import TetMesh, ball_mesh, random_ball_points, ring_mesh
from .quadrature import build_fan
from .reference import (ErrorStats, GaussianRing, HillVortex, RingTable, rms_error,
                        ring_velocity_table)
from .solver import EvalRequest, evaluate, node_velocities

#: Cube-lattice cells per axis of the default Hill sphere (16**3 = 4096 nodes).
HILL_CELLS = 15


@dataclass
class HillResult:
    n_points: int
    n_quad: int
    workers: int
    stats: ErrorStats
    #: mean axial difference (computed - reference); the frame offset
    axial_offset: float


def hill_mesh(hill: HillVortex = HillVortex(), cells: int = HILL_CELLS) -> TetMesh:
    """Sphere mesh of radius ``hill.a`` carrying the Hill vorticity.

    Surface nodes sit on the sphere, where the interior formula is
    continuous with zero, so the interior expression is used everywhere.
    """
    m = ball_mesh(hill.a, cells)
    x, y = m.nodes[:, 0], m.nodes[:, 1]
    return m.with_vorticity(hill.A * np.stack([-y, x, np.zeros_like(x)], axis=1))


def run_hill(n_points=1000, n_quad=4, seed=0, workers=1, mesh: Optional[TetMesh] = None,
             hill: HillVortex = HillVortex(), deterministic=True, zero_vorticity=False) -> HillResult:
    """Fan-method velocity at random interior points against the analytic field.

    Points between the polyhedral mesh surface and the true sphere are
    kept; the method is valid there and the gap is part of the
    discretization error being measured.
    """
    if mesh is None:
        mesh = hill_mesh(hill)
    if zero_vorticity:
        mesh = mesh.with_vorticity(np.zeros_like(mesh.nodes))
    pts = random_ball_points(n_points, hill.a, seed=seed)
    fan = build_fan(n_quad, n_quad)
    res = evaluate(EvalRequest(mesh, pts, fan, workers=workers, deterministic=deterministic))
    ref = np.zeros_like(pts) if zero_vorticity else hill.velocity(pts)
    stats = rms_error(res.velocities, ref, res.seconds)
    offset = float((res.velocities[:, 2] - ref[:, 2]).mean())
    return HillResult(n_points, n_quad, workers, stats, offset)


# ------------------------------------------------------------------- ring

#: (stations, cross-section nodes per side) for each resolution preset.
RING_PRESETS = {
    "low": (32, 9),
    "medium": (64, 17),
    "high": (128, 33),
}
#: Control points per side of the cross-section grid.  Every preset has
#: nodes at these positions, so all resolutions are scored at the same points.
RING_CONTROL = 9
#: Core half-width of the meshed cross-section, in units of sigma.
RING_HALF_WIDTH = 4.0


@dataclass
class RingCase:
    name: str
    ring: GaussianRing
    mesh: TetMesh
    h: float
    eval_nodes: np.ndarray
    reference: np.ndarray


@dataclass
class RingStudy:
    rows: list = field(default_factory=list)  # (resolution, h, n_quad, eps)
    slope: Optional[float] = None
    prefactor: Optional[float] = None
    seconds: float = 0.0


def ring_case(name: str, ring: GaussianRing = GaussianRing(), table: Optional[RingTable] = None,
              eval_stations: int = 1) -> RingCase:
    """Mesh, evaluation nodes and reference velocities for one preset.

    Evaluation points are the mesh nodes on the ``RING_CONTROL`` squared
    control grid of ``eval_stations`` stations spread evenly in azimuth
    (station 0 first).
    """
    try:
        n_st, n_x = RING_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown ring preset {name!r}; choose from {sorted(RING_PRESETS)}") from None
    L = RING_HALF_WIDTH * ring.sigma
    mesh = ring_mesh(ring.R, L, n_st, n_x)
    mesh = mesh.with_vorticity(ring.vorticity(mesh.nodes))
    if not 1 <= eval_stations <= n_st:
        raise ValueError("eval_stations must lie in [1, n_stations]")
    stations = (np.arange(eval_stations) * n_st) // eval_stations
    step = (n_x - 1) // (RING_CONTROL - 1)
    ii = np.arange(0, n_x, step)
    local = (ii[:, None] * n_x + ii[None, :]).ravel()
    nodes = (stations[:, None] * (n_x * n_x) + local[None, :]).ravel()
    if table is None:
        table = ring_velocity_table(ring)
    ref = table.velocity(mesh.nodes[nodes])
    return RingCase(name, ring, mesh, 2.0 * L / (n_x - 1), nodes, ref)


def fit_power(x, y):
    """Least-squares (exponent, prefactor) of y = c * x**p in log-log space."""
    p, logc = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(p), float(math.exp(logc))


def run_ring_convergence(presets: Sequence[str] = ("low", "medium", "high"),
                         quad_orders: Sequence[int] = (64,), ring: GaussianRing = GaussianRing(),
                         workers=1, eval_stations=1, deterministic=True) -> RingStudy:
    """eps for every (preset, fan order); slope of log eps vs log h at the
    largest fan order when more than one preset is given."""
    table = ring_velocity_table(ring)
    study = RingStudy()
    for name in presets:
        case = ring_case(name, ring, table, eval_stations)
        for nq in quad_orders:
            res = node_velocities(case.mesh, build_fan(nq, nq), workers=workers,
                                  deterministic=deterministic, nodes=case.eval_nodes)
            st = rms_error(res.velocities, case.reference, res.seconds)
            study.rows.append((name, case.h, nq, st.rms))
            study.seconds += res.seconds
    top = max(quad_orders)
    pts = [(h, e) for _, h, nq, e in study.rows if nq == top]
    if len(pts) >= 2:
        study.slope, study.prefactor = fit_power(*zip(*pts))
    return study


# ---------------------------------------------------------------- scaling


@dataclass
class ScalingStudy:
    rows: list  # (workers, seconds)
    exponent: Optional[float]
    identical: bool


def run_scaling(worker_counts: Sequence[int] = (1, 2, 4), n_points=500, n_quad=8, seed=0,
                deterministic=True, repeats=1, mesh: Optional[TetMesh] = None) -> ScalingStudy:
    """Time one fixed Hill workload at each worker count (best of ``repeats``)."""
    if not worker_counts or min(worker_counts) < 1:
        raise ValueError("worker counts must be >= 1")
    if mesh is None:
        mesh = hill_mesh()
    pts = random_ball_points(n_points, 1.0, seed=seed)
    fan = build_fan(n_quad, n_quad)
    rows, first, identical = [], None, True
    for w in worker_counts:
        best = math.inf
        for _ in range(max(1, repeats)):
            res = evaluate(EvalRequest(mesh, pts, fan, workers=w, deterministic=deterministic))
            best = min(best, res.seconds)
        if first is None:
            first = res.velocities
        elif not np.array_equal(first, res.velocities):
            identical = False
        rows.append((w, best))
    exponent = fit_power(*zip(*rows))[0] if len(set(worker_counts)) > 1 else None
    return ScalingStudy(rows, exponent, identical)
