"""Correlation functions, mean counts and number variance in balls.

The number variance of ``B_R`` is computed two ways.  The lunule route
integrates ``|K(o, x)|^2`` against the measure of ``B_R(x) \\ B_R(o)`` along
the radius only.  The direct route evaluates the double integral of
``|K(x, y)|^2`` over ``x`` in ``B_R`` and ``y`` outside, writing the inner
integral as the full radial mass minus the part inside ``B_R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .geometry import (
    SpaceModel,
    ball_volume,
    lunule_volume,
    sphere_area,
    tree_ball,
)
from .kernels import KernelError, KernelImplementationError, RadialKernel, radial_cutoff
from .policy import DEFAULT_POLICY, NumericPolicy
from .quadrature import gauss_legendre, panel_rule

MAX_CORRELATION_ORDER = 12


class NonIntegrableTailError(KernelError):
    """The kernel's radial mass does not close against the ball growth."""


@dataclass(frozen=True)
class Configuration:
    points: list
    region_radius: float

    def __len__(self):
        return len(self.points)


def correlation_rho_n(kernel: RadialKernel, points: Sequence,
                      policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """n-point correlation ``det[K(x_i, x_j)]`` for ``1 <= n <= 12``."""
    n = len(points)
    if not 1 <= n <= MAX_CORRELATION_ORDER:
        raise ValueError(f"correlation order must be in 1..{MAX_CORRELATION_ORDER}, got {n}")
    M = kernel.matrix(points)
    # LU with partial pivoting
    det = complex(np.linalg.det(M))
    if abs(det.imag) > policy.imag_tol * max(1.0, abs(det.real)):
        raise KernelImplementationError(
            f"correlation determinant has imaginary part {det.imag:.3e}"
        )
    return det.real


def expectation(kernel: RadialKernel, R: float) -> float:
    """Mean number of points in ``B_R``: ``K(o,o) * vol(B_R)``."""
    if R < 0:
        raise ValueError("radius must be nonnegative")
    return kernel.koo * ball_volume(kernel.model, R)


def trace_quadrature(kernel: RadialKernel, R: float, n_radial: int = 200,
                     n_angle: int = 64) -> float:
    """``int_{B_R} K(x, x) dvol(x)`` evaluated pointwise, independent of ``K(o,o)``.

    On the disk the integral runs in Euclidean polar coordinates against the
    density ``4 / (1 - |z|^2)^2``; on the tree it is a vertex sum.
    """
    if kernel.model.is_tree:
        nodes = tree_ball(kernel.model.q, R)
        return float(sum(np.real(kernel.complex_eval(x, x)) for x in nodes))
    if R <= 0:
        return 0.0
    rmax = math.tanh(R / 2.0)
    # t = |z|^2 keeps the radial integrand smooth at the origin
    t, wt = panel_rule(np.linspace(0.0, rmax**2, 9), n_radial // 8)
    theta = 2.0 * math.pi * np.arange(n_angle) / n_angle
    z = np.sqrt(t)[:, None] * np.exp(1j * theta)[None, :]
    diag = np.real(kernel.complex_eval(z, z))
    density = 4.0 / (1.0 - t) ** 2
    # dA = r dr dtheta = dt dtheta / 2
    return float(np.sum(diag.mean(axis=1) * density * wt) * math.pi)


def _check_tail(kernel: RadialKernel):
    total = kernel.total_mass
    if not math.isfinite(total):
        raise NonIntegrableTailError(f"{kernel.label}: infinite radial mass")
    return total


def variance_lunule(kernel: RadialKernel, R: float,
                    policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """``int |K(o, x)|^2 vol(B_R(x) \\ B_R(o)) dvol(x)`` by radial reduction.

    For ``d(o, x) > 2R`` the lunule is the whole ball, so that part of the
    integral is ``vol(B_R)`` times the kernel's tail mass beyond ``2R``.
    """
    if R <= 0:
        return 0.0
    _check_tail(kernel)
    model = kernel.model
    vol = ball_volume(model, R)
    if model.is_tree:
        n = int(math.floor(R + 1e-12))
        r = np.arange(0, 2 * n + 1)
        weights = kernel.radial_modulus(r) ** 2 * sphere_area(model, r)
        lun = np.array([lunule_volume(model, ri, n) for ri in r])
        return float(np.sum(weights * lun) + vol * kernel.mass_beyond(2 * n))

    def integrand(r):
        return float(kernel.radial_modulus(r)) ** 2 * 2.0 * math.pi * math.sinh(r) \
            * lunule_volume(model, r, R, policy)

    inner, _ = integrate.quad(integrand, 0.0, 2.0 * R, epsabs=policy.quad_epsabs * 1e-3,
                              epsrel=policy.quad_epsrel, limit=policy.quad_limit)
    tail = kernel.mass_beyond(2.0 * R)
    if not math.isfinite(tail):
        raise NonIntegrableTailError(f"{kernel.label}: tail mass beyond {2 * R} is not finite")
    return inner + vol * tail


def variance_direct(kernel: RadialKernel, R: float,
                    policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """``int_{B_R} int_{complement} |K(x, y)|^2`` evaluated with ``K`` itself.

    The inner integral over the complement equals the total radial mass of the
    kernel minus ``int_{B_R} |K(x, y)|^2 dy``, leaving a double integral over
    ``B_R x B_R``: a vertex double sum on the tree, and on the disk a product
    rule in polar coordinates about ``o`` with adaptive angular integration.
    """
    if R <= 0:
        return 0.0
    total = _check_tail(kernel)
    model = kernel.model
    if model.is_tree:
        nodes = tree_ball(model.q, R)
        inside = 0.0
        chunk = max(1, 2_000_000 // max(1, len(nodes)))
        for start in range(0, len(nodes), chunk):
            K = kernel.matrix(nodes[start : start + chunk], nodes)
            inside += float(np.sum(np.abs(K) ** 2))
        return total * len(nodes) - inside
    return total * ball_volume(model, R) - _disk_ball_pair_integral(kernel, R, policy)


def _disk_ball_pair_integral(kernel, R, policy):
    # x = rho on the positive axis (rotation invariance about o), y = s e^{i phi}
    per = max(8, policy.gl_nodes_per_unit)
    breaks = np.linspace(0.0, R, int(math.ceil(R)) + 1)
    rho, w_rho = panel_rule(breaks, per)
    s, w_s = rho, w_rho
    x = np.tanh(rho / 2.0)[:, None]
    y_abs = np.tanh(s / 2.0)[None, :]

    def angular(phi):
        y = y_abs * np.exp(1j * phi)
        return (np.abs(kernel.complex_eval(x, y)) ** 2).ravel()

    val, _ = integrate.quad_vec(angular, 0.0, math.pi, epsabs=0.0,
                                epsrel=policy.quad_epsrel, norm="max",
                                limit=10_000)
    F = 2.0 * val.reshape(len(rho), len(s))
    inner = F @ (w_s * np.sinh(s))
    return 2.0 * math.pi * float(np.sum(w_rho * np.sinh(rho) * inner))
