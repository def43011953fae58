"""Gauss-Legendre rules and the precomputed ray fan.

The fan covers the half sphere phi in (0, pi), theta in (0, pi).  Every
direction is paired with its opposite through the signed ray parameter,
so the half sphere is enough to cover all of space once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ORDER = 512
NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100

#: Weight prefactor.  The angular measure sin(phi) dphi dtheta maps to
#: (pi/2)**2 sin(phi_n) dt dt on [-1, 1]**2, and the Biot-Savart kernel
#: contributes 1/(4 pi), giving pi/16.  ``tests/test_quadrature.py``
#: re-derives this against the direct volume integral.
FAN_PREFACTOR = np.pi / 16.0


@dataclass(frozen=True)
class GaussRule:
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f, a=-1.0, b=1.0):
        """Apply the rule to ``f`` on ``[a, b]``."""
        half = 0.5 * (b - a)
        x = 0.5 * (a + b) + half * self.nodes
        return half * np.dot(self.weights, f(x))


def _legendre(n, x):
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_legendre(order: int) -> GaussRule:
    """Nodes and weights of the ``order``-point Gauss-Legendre rule on [-1, 1].

    Roots of P_order are refined by Newton's method starting from the
    Chebyshev-type guesses cos(pi (i - 1/4) / (n + 1/2)); weights are
    2 / ((1 - t**2) P'(t)**2).
    """
    if isinstance(order, bool) or int(order) != order or not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be an integer in [1, {MAX_ORDER}], got {order!r}")
    n = int(order)
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(NEWTON_MAXITER):
        p, dp = _legendre(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= NEWTON_TOL:
            break
    p, dp = _legendre(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x = x[::-1].copy()
    w = w[::-1].copy()
    # enforce exact symmetry; Newton leaves last-bit differences
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return GaussRule(n, x, w)


@dataclass(frozen=True)
class QuadFan:
    """Ray directions and weights of an ``n_phi`` x ``n_theta`` product rule.

    ``directions[n * n_theta + m]`` is s_nm and ``weights`` holds the
    matching k_nm.  Tables are contiguous so the solver kernels can
    index them directly.
    """

    n_phi: int
    n_theta: int
    phi: np.ndarray
    theta: np.ndarray
    directions: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.n_phi * self.n_theta

    def __len__(self):
        return self.size


def build_fan(n_phi: int, n_theta: int | None = None, prefactor: float = FAN_PREFACTOR) -> QuadFan:
    """Precompute the ray fan.

    This is the only place the solver path touches trigonometric
    functions.
    """
    if n_theta is None:
        n_theta = n_phi
    rp = gauss_legendre(n_phi)
    rt = gauss_legendre(n_theta)
    phi = 0.5 * np.pi * (1.0 + rp.nodes)
    theta = 0.5 * np.pi * (1.0 + rt.nodes)
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    dirs = np.empty((n_phi, n_theta, 3))
    dirs[..., 0] = sp[:, None] * ct[None, :]
    dirs[..., 1] = sp[:, None] * st[None, :]
    dirs[..., 2] = cp[:, None]
    k = prefactor * (sp * rp.weights)[:, None] * rt.weights[None, :]
    return QuadFan(
        n_phi=n_phi,
        n_theta=n_theta,
        phi=phi,
        theta=theta,
        directions=np.ascontiguousarray(dirs.reshape(-1, 3)),
        weights=np.ascontiguousarray(k.reshape(-1)),
    )
