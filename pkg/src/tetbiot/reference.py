"""Analytic and semi-analytic reference velocity fields, and error metrics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.interpolate import RegularGridInterpolator

# ------------------------------------------------------------------- Hill


@dataclass(frozen=True)
class HillVortex:
    """Hill's spherical vortex, azimuthal vorticity A * r inside radius a.

    ``frame="lab"`` is the fluid at rest at infinity, which is what the
    Biot-Savart integral of the vorticity produces.  ``frame="vortex"``
    moves with the sphere, i.e. subtracts :attr:`translation_speed` from
    the axial velocity everywhere.
    """

    A: float = 1.0
    a: float = 1.0
    frame: str = "lab"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("radius must be positive")
        if self.frame not in ("lab", "vortex"):
            raise ValueError(f"unknown frame {self.frame!r}")

    @property
    def translation_speed(self) -> float:
        return 2.0 * self.A * self.a ** 2 / 15.0

    def velocity(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        r2 = x * x + y * y
        s2 = r2 + z * z
        a2 = self.a ** 2
        A = self.A
        U = self.translation_speed
        inside = s2 <= a2
        s5 = np.where(inside, 1.0, s2) ** 2.5
        # u_r / r, so the Cartesian split needs no division by r
        ur_r = np.where(inside, A * z / 5.0, 1.5 * U * a2 * self.a * z / s5)
        uz = np.where(inside, A / 5.0 * (5.0 / 3.0 * a2 - 2.0 * r2 - z * z),
                      0.5 * U * a2 * self.a * (2.0 * z * z - r2) / s5)
        if self.frame == "vortex":
            uz = uz - U
        return np.stack([ur_r * x, ur_r * y, uz], axis=-1)

    def vorticity(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        inside = (x * x + y * y + z * z) <= self.a ** 2
        f = np.where(inside, self.A, 0.0)
        return np.stack([-f * y, f * x, np.zeros_like(x)], axis=-1)


def hill_velocity(p, hill: HillVortex = HillVortex()) -> np.ndarray:
    return hill.velocity(p)


def hill_vorticity(p, hill: HillVortex = HillVortex()) -> np.ndarray:
    return hill.vorticity(p)


# ------------------------------------------------------ elliptic integrals

AGM_TOL = 1e-14


@numba.njit(cache=True)
def _agm_k_kme(m):
    # K(m) and K(m) - E(m), parameter m = k**2, by the AGM.  K - E is
    # accumulated directly from the c_n terms so it keeps full relative
    # precision as m -> 0.
    a = 1.0
    b = math.sqrt(1.0 - m)
    tw = 0.5
    s = 0.5 * m
    for _ in range(60):
        c = 0.5 * (a - b)
        an = 0.5 * (a + b)
        b = math.sqrt(a * b)
        a = an
        tw *= 2.0
        s += tw * c * c
        if abs(c) <= AGM_TOL * a:
            break
    K = math.pi / (2.0 * a)
    return K, K * s


def ellipke(m):
    """Complete elliptic integrals K(m), E(m) for parameter m in [0, 1)."""
    m = np.asarray(m, dtype=np.float64)
    K = np.empty_like(m)
    KmE = np.empty_like(m)
    flat_m, flat_K, flat_D = m.reshape(-1), K.reshape(-1), KmE.reshape(-1)
    for i in range(flat_m.size):
        if not 0.0 <= flat_m[i] < 1.0:
            raise ValueError("elliptic parameter must lie in [0, 1)")
        flat_K[i], flat_D[i] = _agm_k_kme(flat_m[i])
    return K, K - KmE


@numba.njit(cache=True)
def _ring_green(r, z, rs, zs):
    # Stokes stream function at (r, z) of a unit-circulation filament at
    # (rs, zs):  (r1 + r2) (K(lam) - E(lam)) / (2 pi)
    dz2 = (z - zs) * (z - zs)
    r1 = math.sqrt((r - rs) * (r - rs) + dz2)
    r2 = math.sqrt((r + rs) * (r + rs) + dz2)
    lam = (r2 - r1) / (r2 + r1)
    _, kme = _agm_k_kme(lam * lam)
    return (r1 + r2) * kme / (2.0 * math.pi)


def ring_green(r, z, rs, zs):
    """Stream function of a unit-circulation circular filament (vectorized)."""
    b = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (r, z, rs, zs)))
    out = np.empty(b[0].shape)
    flat = [v.reshape(-1) for v in b]
    o = out.reshape(-1)
    for i in range(o.size):
        o[i] = _ring_green(flat[0][i], flat[1][i], flat[2][i], flat[3][i])
    return out


# ---------------------------------------------------------- Gaussian ring


@dataclass(frozen=True)
class GaussianRing:
    """Axisymmetric ring with a Gaussian core about radius ``R`` in z = 0.

    omega_theta(rho) = Gamma / (2 pi sigma**2) exp(-rho**2 / (2 sigma**2))
    with rho the distance from the core centre line.
    """

    R: float = 1.0
    sigma: float = 0.2
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.R > 0 and self.sigma > 0):
            raise ValueError("ring and core radii must be positive")

    @property
    def peak(self) -> float:
        return self.gamma / (2.0 * math.pi * self.sigma ** 2)

    def omega_theta(self, r, z):
        rho2 = (np.asarray(r) - self.R) ** 2 + np.asarray(z) ** 2
        return self.peak * np.exp(-rho2 / (2.0 * self.sigma ** 2))

    def vorticity(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        r = np.hypot(x, y)
        w = self.omega_theta(r, z)
        f = np.divide(w, r, out=np.zeros_like(r), where=r > 0)
        return np.stack([-f * y, f * x, np.zeros_like(x)], axis=-1)


@numba.njit(cache=True)
def _psi_grid(rg, zg, R, sigma, gamma, s_nodes, s_weights, n_alpha, far_nodes, far_weights, out):
    """Stream function on the tensor grid rg x zg.

    Near the core the source integral is done in polar coordinates about
    the evaluation point, where the rho d rho Jacobian (further smoothed by
    rho = rho_max s**2) absorbs the log singularity of the kernel.  Points
    well outside the core use polar coordinates about the core centre.
    """
    peak = gamma / (2.0 * math.pi * sigma * sigma)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    cut = 6.0 * sigma
    dal = 2.0 * math.pi / n_alpha
    ca = np.empty(n_alpha)
    sa = np.empty(n_alpha)
    for j in range(n_alpha):
        ca[j] = math.cos(j * dal)
        sa[j] = math.sin(j * dal)
    for i in range(rg.size):
        r = rg[i]
        for l in range(zg.size):
            z = zg[l]
            d = math.sqrt((r - R) * (r - R) + z * z)
            acc = 0.0
            if d > cut + 2.0 * sigma:
                for q in range(far_nodes.size):
                    rho = far_nodes[q]
                    w = far_weights[q] * rho * dal * peak * math.exp(-rho * rho * inv2s2)
                    for j in range(n_alpha):
                        acc += w * _ring_green(r, z, R + rho * ca[j], rho * sa[j])
            else:
                rmax = d + cut
                for q in range(s_nodes.size):
                    s = s_nodes[q]
                    rho = rmax * s * s
                    wq = s_weights[q] * 2.0 * rmax * rmax * s * s * s * dal
                    for j in range(n_alpha):
                        rs = r + rho * ca[j]
                        if rs <= 0.0:
                            continue
                        zs = z + rho * sa[j]
                        rho2 = (rs - R) * (rs - R) + zs * zs
                        acc += wq * peak * math.exp(-rho2 * inv2s2) * _ring_green(r, z, rs, zs)
            out[i, l] = acc


def ring_stream_function(ring: GaussianRing, r, z, n_s=64, n_alpha=64):
    """Stokes stream function psi on the tensor grid ``r`` x ``z``."""
    from .quadrature import gauss_legendre

    g = gauss_legendre(n_s)
    s_nodes = 0.5 * (g.nodes + 1.0)
    s_w = 0.5 * g.weights
    far = gauss_legendre(48)
    far_nodes = 3.0 * ring.sigma * (far.nodes + 1.0)
    far_w = 3.0 * ring.sigma * far.weights
    r = np.ascontiguousarray(r, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    out = np.empty((r.size, z.size))
    _psi_grid(r, z, ring.R, ring.sigma, ring.gamma, s_nodes, s_w, n_alpha, far_nodes, far_w, out)
    return out


class TableRangeError(ValueError):
    pass


# 4th-order central first-difference stencil
_D4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


class RingTable:
    """(u_r, u_z) on a regular (r, z) grid with bilinear lookup."""

    def __init__(self, ring, r, z, ur, uz):
        self.ring = ring
        self.r = r
        self.z = z
        self.ur = ur
        self.uz = uz
        self._iur = RegularGridInterpolator((r, z), ur, method="linear", bounds_error=True)
        self._iuz = RegularGridInterpolator((r, z), uz, method="linear", bounds_error=True)

    @property
    def spacing(self):
        return self.r[1] - self.r[0]

    def query_rz(self, r, z):
        r = np.asarray(r, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        pts = np.stack(np.broadcast_arrays(r, z), axis=-1)
        # absorb rounding at the table edges
        tol = 1e-9 * self.spacing
        pts[..., 0] = np.where(np.abs(pts[..., 0] - self.r[0]) < tol, self.r[0], pts[..., 0])
        pts[..., 0] = np.where(np.abs(pts[..., 0] - self.r[-1]) < tol, self.r[-1], pts[..., 0])
        pts[..., 1] = np.where(np.abs(pts[..., 1] - self.z[0]) < tol, self.z[0], pts[..., 1])
        pts[..., 1] = np.where(np.abs(pts[..., 1] - self.z[-1]) < tol, self.z[-1], pts[..., 1])
        shape = pts.shape[:-1]
        try:
            return self._iur(pts).reshape(shape), self._iuz(pts).reshape(shape)
        except ValueError as exc:
            raise TableRangeError(f"query outside table r in [{self.r[0]}, {self.r[-1]}], "
                                  f"z in [{self.z[0]}, {self.z[-1]}]") from exc

    def velocity(self, p) -> np.ndarray:
        """Cartesian velocity at points ``p`` (n, 3)."""
        p = np.asarray(p, dtype=np.float64)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        r = np.hypot(x, y)
        ur, uz = self.query_rz(r, z)
        c = np.divide(x, r, out=np.ones_like(r), where=r > 0)
        s = np.divide(y, r, out=np.zeros_like(r), where=r > 0)
        return np.stack([ur * c, ur * s, uz], axis=-1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "z", "ur", "uz"])
            for i, r in enumerate(self.r):
                for j, z in enumerate(self.z):
                    wr.writerow([repr(float(r)), repr(float(z)),
                                 repr(float(self.ur[i, j])), repr(float(self.uz[i, j]))])


def ring_velocity_table(ring: GaussianRing, r_range=None, z_range=None, spacing=None,
                        n_s=64, n_alpha=64) -> RingTable:
    """Velocity table of a Gaussian ring from its stream function.

    psi is tabulated on the requested grid plus two padding layers and
    differentiated with 4th-order central differences:
    u_r = -psi_z / r, u_z = psi_r / r.  The default grid spans 4 sigma
    either side of the core centre with spacing sigma / 16.
    """
    R, sg = ring.R, ring.sigma
    if spacing is None:
        spacing = sg / 16.0
    if r_range is None:
        r_range = (R - 4.0 * sg, R + 4.0 * sg)
    if z_range is None:
        z_range = (-4.0 * sg, 4.0 * sg)
    eps = 1e-9 * spacing
    if (r_range[0] > R - 4 * sg + eps or r_range[1] < R + 4 * sg - eps
            or z_range[0] > -4 * sg + eps or z_range[1] < 4 * sg - eps):
        raise ValueError("table must extend at least 4 sigma from the core centre")
    nr = int(round((r_range[1] - r_range[0]) / spacing))
    nz = int(round((z_range[1] - z_range[0]) / spacing))
    r = r_range[0] + spacing * np.arange(-2, nr + 3)
    z = z_range[0] + spacing * np.arange(-2, nz + 3)
    if r[0] <= 0:
        raise ValueError("table (with padding) must stay off the axis")
    psi = ring_stream_function(ring, r, z, n_s=n_s, n_alpha=n_alpha)
    dpsi_dr = sum(c * psi[k:k + nr + 1, 2:-2] for k, c in enumerate(_D4) if c) / spacing
    dpsi_dz = sum(c * psi[2:-2, k:k + nz + 1] for k, c in enumerate(_D4) if c) / spacing
    rin = r[2:-2]
    return RingTable(ring, rin, z[2:-2], -dpsi_dz / rin[:, None], dpsi_dr / rin[:, None])


# ------------------------------------------------------------------ errors


@dataclass(frozen=True)
class ErrorStats:
    """``rms`` is the RMS error over points divided by ``scale``, the RMS
    magnitude of the reference; ``rms_abs`` and ``max_abs`` are raw."""

    rms: float
    rms_abs: float
    max_abs: float
    scale: float
    count: int
    seconds: float = 0.0

    @property
    def max_rel(self) -> float:
        return self.max_abs / self.scale if self.scale > 0 else self.max_abs


def rms_error(computed, reference, seconds: float = 0.0) -> ErrorStats:
    """Normalized RMS velocity error.  With an all-zero reference the
    error is reported unnormalized."""
    c = getattr(computed, "velocities", computed)
    c = np.asarray(c, dtype=np.float64).reshape(-1, 3)
    ref = np.asarray(reference, dtype=np.float64).reshape(-1, 3)
    if c.shape != ref.shape:
        raise ValueError(f"length mismatch: {len(c)} computed vs {len(ref)} reference")
    if len(c) == 0:
        raise ValueError("no points")
    if seconds == 0.0 and hasattr(computed, "seconds"):
        seconds = computed.seconds
    e2 = ((c - ref) ** 2).sum(1)
    rms_abs = float(np.sqrt(e2.mean()))
    scale = float(np.sqrt((ref ** 2).sum(1).mean()))
    rms = rms_abs / scale if scale > 0 else rms_abs
    return ErrorStats(rms, rms_abs, float(np.sqrt(e2.max())), scale, len(c), float(seconds))
