"""Biot-Savart velocities from linear vorticity on tetrahedral meshes by ray tracing."""
from .geometry import (Ray, TetSegment, TriHit, folded_segment_contribution, ray_tet_intersect,
                       ray_triangle_intersect, segment_contribution, tet_cull)
from .mesh import (MeshError, MeshFormatError, MeshParseError, MeshValidationError, TetMesh,
                   ball_mesh, lattice_mesh, load_tetgen, ring_mesh, set_vorticity, write_tetgen)
from .quadrature import GaussRule, QuadFan, build_fan, gauss_legendre
from .reference import (ErrorStats, GaussianRing, HillVortex, RingTable, TableRangeError,
                        hill_velocity, hill_vorticity, ring_velocity_table, rms_error)
from .solver import (DomainError, EvalRequest, VelocityField, brute_force_velocity, evaluate,
                     node_velocities, ray_integral)

__version__ = "0.1.0"
