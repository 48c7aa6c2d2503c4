"""Radial projection kernels and their legality checks.

A kernel is carried as a :class:`RadialKernel`: the pointwise evaluator
``K(x, y)`` (complex on the disk, real on the tree), the radial modulus
``k(r) = |K(x, y)|`` at ``d(x, y) = r``, the diagonal value ``K(o, o)`` and
the radial tail mass ``mass_beyond(t) = sum/integral of |K(o, x)|^2`` over
``d(o, x) > t``, which every truncated radial integral uses to close its tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate

from .geometry import (
    SpaceModel,
    dist,
    disk_distance,
    log_sphere_size,
    random_points,
    sphere_area,
    tree_distance_matrix,
    tree_path_orbits,
)
from .policy import DEFAULT_POLICY, NumericPolicy
from .quadrature import QuadratureGrid, ball_rule, gauss_legendre, panel_rule


class KernelError(ValueError):
    """Kernel construction or evaluation failed."""


class KernelValidationError(KernelError):
    pass


class DegenerateKernelError(KernelError):
    pass


class KernelImplementationError(KernelError):
    """The evaluator is inconsistent with a Hermitian kernel."""


@dataclass(frozen=True, eq=False)
class RadialKernel:
    model: SpaceModel
    koo: float
    radial_modulus: Callable[[Any], Any]
    complex_eval: Callable[[Any, Any], Any]
    label: str
    mass_beyond: Callable[[float], float] = field(repr=False)
    verified: bool = True
    # signed real profile for kernels in a real radial gauge; lets tree
    # matrices be filled from a distance matrix
    radial_value: Callable[[Any], Any] | None = field(default=None, repr=False)
    # tree only: k(r) * sqrt(|S_r|), which stays O(1) where k(r) underflows
    sphere_normalized: Callable[[Any], Any] | None = field(default=None, repr=False)

    def k(self, r):
        return self.radial_modulus(r)

    @property
    def total_mass(self) -> float:
        """``sum/integral of |K(o, x)|^2`` over the whole space."""
        return self.mass_beyond(-1.0)

    def matrix(self, xs, ys=None) -> np.ndarray:
        """Kernel matrix ``[K(x_i, y_j)]``."""
        ys = xs if ys is None else ys
        if self.model.is_tree:
            d = tree_distance_matrix(list(xs), list(ys))
            if self.radial_value is not None:
                return np.asarray(self.radial_value(d), dtype=float)
            return np.array([[self.complex_eval(x, y) for y in ys] for x in xs])
        xs = np.asarray(xs, dtype=complex)
        ys = np.asarray(ys, dtype=complex)
        return np.asarray(self.complex_eval(xs[:, None], ys[None, :]))


# ---------------------------------------------------------------------------
# weighted Bergman kernels on the disk

def bergman_kernel(alpha: float = 0.0) -> RadialKernel:
    """Weighted Bergman projection kernel in the invariant gauge.

    ``K(z, w) = (alpha+1)/(4 pi) * ((1-|z|^2)(1-|w|^2))^((alpha+2)/2)
    / (1 - z conj(w))^(alpha+2)``, so ``|K| = K(o,o) sech(d/2)^(alpha+2)``.
    """
    if alpha < 0:
        raise KernelError("Bergman weight alpha must be >= 0")
    alpha = float(alpha)
    koo = (alpha + 1.0) / (4.0 * math.pi)
    power = alpha + 2.0

    def complex_eval(z, w):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        scale = ((1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)) ** (power / 2.0)
        return koo * scale / (1.0 - z * np.conj(w)) ** power

    def modulus(r):
        return koo / np.cosh(np.asarray(r, dtype=float) / 2.0) ** power

    def mass_beyond(t):
        if t <= 0:
            return koo
        return koo / math.cosh(t / 2.0) ** (2.0 * (alpha + 1.0))

    return RadialKernel(
        model=SpaceModel.disk(),
        koo=koo,
        radial_modulus=modulus,
        complex_eval=complex_eval,
        label=f"bergman(alpha={alpha:g})",
        mass_beyond=mass_beyond,
    )


# ---------------------------------------------------------------------------
# spectral projections of the adjacency operator of the q-regular tree

def kesten_mckay_density(q: int, lam):
    """Spectral measure of the tree adjacency operator at a vertex."""
    lam = np.asarray(lam, dtype=float)
    edge2 = 4.0 * (q - 1)
    inside = lam**2 < edge2
    out = np.zeros_like(lam)
    out[inside] = (q * np.sqrt(edge2 - lam[inside] ** 2)
                   / (2.0 * math.pi * (q**2 - lam[inside] ** 2)))
    return out


def orthonormal_spherical_polys(q: int, lam, r_max: int) -> np.ndarray:
    """Values of the orthonormal radial polynomials ``P_0 .. P_r_max`` at ``lam``.

    ``P_r(A) delta_o`` is the normalized indicator of the sphere of radius
    ``r``, so ``K(o, x) = <P_r, 1_band> / sqrt(|S_r|)`` for ``d(o, x) = r``.
    """
    lam = np.asarray(lam, dtype=float)
    P = np.empty((r_max + 1,) + lam.shape)
    sq, sq1 = math.sqrt(q), math.sqrt(q - 1)
    P[0] = 1.0
    if r_max >= 1:
        P[1] = lam / sq
    if r_max >= 2:
        P[2] = (lam * P[1] - sq * P[0]) / sq1
    for r in range(2, r_max):
        P[r + 1] = (lam * P[r] - sq1 * P[r - 1]) / sq1
    return P


@lru_cache(maxsize=64)
def _band_coefficients(q: int, a: float, b: float, r_max: int) -> np.ndarray:
    """``m_r = <P_r, 1_[a,b]>`` in ``L^2(spectral measure)``, r = 0..r_max."""
    edge = 2.0 * math.sqrt(q - 1)
    if a <= -edge and b >= edge:
        m = np.zeros(r_max + 1)
        m[0] = 1.0
        m.setflags(write=False)
        return m
    # lam = edge cos(theta) removes the square-root edges of the density
    t_lo, t_hi = math.acos(min(b / edge, 1.0)), math.acos(max(a / edge, -1.0))
    # composite rule with >= 20 nodes per wavelength of the top polynomial
    panels = int(math.ceil((t_hi - t_lo) * (r_max + 2) / (2.0 * math.pi))) + 1
    theta, w = panel_rule(np.linspace(t_lo, t_hi, panels + 1), 20)
    lam = edge * np.cos(theta)
    weight = (w * q * (edge * np.sin(theta)) ** 2
              / (2.0 * math.pi * (q**2 - lam**2)))
    sq, sq1 = math.sqrt(q), math.sqrt(q - 1)
    m = np.empty(r_max + 1)
    prev = np.ones_like(lam)
    m[0] = weight.sum()
    if r_max >= 1:
        cur = lam / sq
        m[1] = weight @ cur
        first = True
        for r in range(1, r_max):
            nxt = (lam * cur - (sq if first else sq1) * prev) / sq1
            first = False
            prev, cur = cur, nxt
            m[r + 1] = weight @ cur
    m.setflags(write=False)
    return m


class _TreeBandProfile:
    """Lazily extended radial profile of a band projection."""

    def __init__(self, q: int, a: float, b: float, r_init: int):
        self.q, self.a, self.b = q, a, b
        self.r_init = r_init

    def coefficients(self, r_needed: int) -> np.ndarray:
        size = max(self.r_init, 64)
        while size < r_needed:
            size *= 2
        return _band_coefficients(self.q, self.a, self.b, size)

    def value(self, r):
        r = np.asarray(r)
        ri = r.astype(np.int64)
        m = self.coefficients(int(ri.max(initial=0)))
        out = m[ri] * np.exp(-0.5 * log_sphere_size(self.q, ri))
        return float(out) if out.ndim == 0 else out

    def normalized(self, r):
        r = np.asarray(r).astype(np.int64)
        return self.coefficients(int(r.max(initial=0)))[r]

    def mass_beyond(self, t: float, policy: NumericPolicy = DEFAULT_POLICY) -> float:
        # Parseval: sum_r m_r^2 = <1_band, 1_band> = K(o, o)
        koo = float(self.coefficients(0)[0])
        if t < 0:
            return koo
        n = int(math.floor(t))
        m = self.coefficients(n)
        return max(koo - float(np.sum(m[: n + 1] ** 2)), 0.0)


def tree_spectral_kernel(q: int, band: Sequence[float], halo_radius: int = 64) -> RadialKernel:
    """Projection onto the spectral subspace of the adjacency operator for ``band``.

    ``halo_radius`` is the initial tabulation radius of the profile; values at
    larger distances are computed on demand.
    """
    model = SpaceModel.tree(q)
    a, b = float(band[0]), float(band[1])
    edge = 2.0 * math.sqrt(q - 1)
    if a > b:
        raise KernelError(f"empty band [{a}, {b}]")
    if a < -edge - 1e-12 or b > edge + 1e-12:
        raise KernelError(f"band [{a}, {b}] leaves the spectrum [-{edge:.6g}, {edge:.6g}]")
    if halo_radius < 1:
        raise KernelError("halo_radius must be >= 1")
    profile = _TreeBandProfile(q, a, b, int(halo_radius))
    koo = float(profile.value(0))
    if koo <= 1e-14:
        raise DegenerateKernelError(f"band [{a}, {b}] carries no spectral mass")

    return RadialKernel(
        model=model,
        koo=koo,
        radial_modulus=lambda r: np.abs(profile.value(r)),
        complex_eval=lambda x, y: profile.value(dist(model, x, y)),
        label=f"tree-spectral(q={q}, band=[{a:g}, {b:g}])",
        mass_beyond=profile.mass_beyond,
        radial_value=profile.value,
        sphere_normalized=profile.normalized,
    )


def identity_kernel(q: int) -> RadialKernel:
    """Full-band projection on the tree: every vertex is occupied."""
    edge = 2.0 * math.sqrt(q - 1)
    return tree_spectral_kernel(q, (-edge, edge))


# ---------------------------------------------------------------------------
# user supplied profiles

def custom_radial_kernel(model: SpaceModel, koo: float, profile,
                         interpolation: str = "linear") -> RadialKernel:
    """Kernel ``K(x, y) = k(d(x, y))`` from a table of ``(r, k(r))``.

    ``interpolation`` is ``"linear"`` or ``"loglinear"``; ``k`` vanishes past the
    last tabulated radius.  The result is marked unverified until
    :func:`verify_projection` accepts it.
    """
    table = np.asarray(profile, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or len(table) < 1:
        raise KernelValidationError("profile must be a sequence of (r, k) pairs")
    rs, ks = table[:, 0], table[:, 1]
    problems = []
    if rs[0] != 0.0:
        problems.append(f"first radius is {rs[0]}, expected 0")
    if np.any(np.diff(rs) <= 0):
        problems.append("radii are not strictly increasing")
    if not koo > 0:
        problems.append(f"K(o,o) = {koo} is not positive")
    if not math.isclose(ks[0], koo, rel_tol=1e-12, abs_tol=0.0):
        problems.append(f"k(0) = {ks[0]} differs from K(o,o) = {koo}")
    for r, k in table:
        if k < 0:
            problems.append(f"k({r:g}) = {k:g} is negative")
        elif k > koo * (1 + 1e-12):
            problems.append(f"k({r:g}) = {k:g} exceeds K(o,o) = {koo:g}")
    if interpolation not in ("linear", "loglinear"):
        problems.append(f"unknown interpolation {interpolation!r}")
    if problems:
        raise KernelValidationError("; ".join(problems))

    r_last = float(rs[-1])
    if interpolation == "loglinear":
        logk = np.log(np.where(ks > 0, ks, np.finfo(float).tiny))

        def value(r):
            r = np.asarray(r, dtype=float)
            out = np.exp(np.interp(r, rs, logk))
            out = np.where(r > r_last, 0.0, out)
            return float(out) if out.ndim == 0 else out
    else:
        def value(r):
            r = np.asarray(r, dtype=float)
            out = np.interp(r, rs, ks, right=0.0)
            out = np.where(r > r_last, 0.0, out)
            return float(out) if out.ndim == 0 else out

    sphere_normalized = None
    if model.is_tree:
        def sphere_normalized(r):
            r = np.asarray(r)
            inside = r <= r_last
            rr = np.where(inside, r, 0)
            return np.where(inside, value(rr) * np.sqrt(sphere_area(model, rr)), 0.0)

        def mass_beyond(t):
            r = np.arange(0, int(math.floor(r_last)) + 1)
            r = r[r > t]
            return float(np.sum(value(r) ** 2 * sphere_area(model, r)))
    else:
        def mass_beyond(t):
            lo = max(t, 0.0)
            if lo >= r_last:
                return 0.0
            # the profile is smooth between table radii, so a panel rule on
            # the table breaks is exact to rounding for tables of any length
            breaks = np.concatenate([[lo], rs[(rs > lo) & (rs < r_last)], [r_last]])
            s, w = panel_rule(breaks, 8)
            return float(np.sum(w * value(s) ** 2 * 2 * math.pi * np.sinh(s)))

    return RadialKernel(
        model=model,
        koo=float(koo),
        radial_modulus=value,
        complex_eval=lambda x, y: value(dist(model, x, y)) if model.is_tree
        else value(disk_distance(x, y)),
        label=f"custom({len(table)} nodes, {interpolation})",
        mass_beyond=mass_beyond,
        verified=False,
        radial_value=value,
        sphere_normalized=sphere_normalized,
    )


def scale_kernel(kernel: RadialKernel, factor: float) -> RadialKernel:
    """``factor * K``; legal only for ``0 < factor <= 1`` on projections."""
    f = float(factor)
    rv = kernel.radial_value
    sn = kernel.sphere_normalized
    return replace(
        kernel,
        koo=kernel.koo * f,
        radial_modulus=lambda r: abs(f) * kernel.radial_modulus(r),
        complex_eval=lambda x, y: f * kernel.complex_eval(x, y),
        label=f"{f:g}*{kernel.label}",
        mass_beyond=lambda t: f * f * kernel.mass_beyond(t),
        verified=False,
        radial_value=None if rv is None else (lambda r: f * rv(r)),
        sphere_normalized=None if sn is None else (lambda r: f * sn(r)),
    )


# ---------------------------------------------------------------------------
# legality

@dataclass(frozen=True)
class ProjectionReport:
    min_eig: float
    max_eig: float
    reproducing_residual: float
    cs_residual: float
    tol: float
    size: int

    @property
    def passed(self) -> bool:
        return -self.tol <= self.min_eig and self.max_eig <= 1.0 + self.tol


def discretized_matrix(kernel: RadialKernel, R: float, grid: QuadratureGrid = QuadratureGrid(),
                       policy: NumericPolicy = DEFAULT_POLICY):
    """``M_ij = sqrt(w_i w_j) K(x_i, x_j)`` on a quadrature rule of ``B_R``."""
    nodes, weights = ball_rule(kernel.model, R, grid)
    if len(weights) == 0:
        return nodes, weights, np.zeros((0, 0))
    sw = np.sqrt(weights)
    M = sw[:, None] * kernel.matrix(nodes) * sw[None, :]
    asym = float(np.max(np.abs(M - M.conj().T)))
    scale = max(1.0, float(np.max(np.abs(M))))
    if asym > policy.hermitian_tol * scale * 10:
        raise KernelImplementationError(
            f"discretized kernel is not Hermitian (max |M - M*| = {asym:.3e})"
        )
    M = 0.5 * (M + M.conj().T)
    return nodes, weights, M


def verify_projection(kernel: RadialKernel, R_test: float, grid: QuadratureGrid = QuadratureGrid(),
                      policy: NumericPolicy = DEFAULT_POLICY, n_pairs: int = 6,
                      seed: int = 0) -> ProjectionReport:
    """Check ``0 <= K <= I`` on ``B_R_test`` plus the reproducing identity.

    Eigenvalues of the discretized operator decide the pass flag; the
    reproducing residual ``max |int K(x,y) K(y,z) dy - K(x,z)|`` over random
    pairs and the Cauchy-Schwarz residual ``max(k(r) - K(o,o), 0)`` are
    reported alongside.
    """
    _, _, M = discretized_matrix(kernel, R_test, grid, policy)
    eig = np.linalg.eigvalsh(M) if M.size else np.zeros(1)
    tol = policy.eig_tol_tree if kernel.model.is_tree else policy.eig_tol_disk
    rng = np.random.default_rng(seed)
    if kernel.model.is_tree:
        residual = _tree_reproducing_residual(kernel, R_test, n_pairs, rng, policy)
        r = np.arange(0, policy.tree_series_cutoff + 1)
    else:
        residual = _disk_reproducing_residual(kernel, R_test, n_pairs, rng, policy)
        r = np.linspace(0.0, R_test + 30.0, 3001)
    cs = float(np.max(np.maximum(kernel.radial_modulus(r) - kernel.koo, 0.0)))
    return ProjectionReport(
        min_eig=float(eig.min()),
        max_eig=float(eig.max()),
        reproducing_residual=residual,
        cs_residual=cs,
        tol=tol,
        size=int(M.shape[0]),
    )


def radial_cutoff(kernel: RadialKernel, rel_tol: float, start: float = 0.0) -> float:
    """Smallest radius (doubling search) with ``mass_beyond <= rel_tol * K(o,o)``."""
    target = rel_tol * kernel.koo
    t = max(start, 1.0)
    while kernel.mass_beyond(t) > target:
        t *= 2.0
        if t > 1e4:
            raise KernelError(f"{kernel.label}: radial mass does not decay below {target:.1e}")
    lo, hi = t / 2.0, t
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if kernel.mass_beyond(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def _disk_reproducing_residual(kernel, R_test, n_pairs, rng, policy):
    xs = random_points(kernel.model, n_pairs, R_test, rng)
    zs = random_points(kernel.model, n_pairs, R_test, rng)
    T = R_test + min(radial_cutoff(kernel, policy.tail_tol), 30.0)
    breaks = np.arange(0.0, math.ceil(T) + 1.0)
    rho_parts, w_parts = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(lo, hi, 16)
        rho_parts.append(x)
        w_parts.append(w)
    rho, w_rho = np.concatenate(rho_parts), np.concatenate(w_parts)
    m = int(min(4096, max(512, 64 * math.sinh(R_test))))
    theta = 2.0 * math.pi * np.arange(m) / m
    ys = (np.tanh(rho / 2.0)[:, None] * np.exp(1j * theta)[None, :]).ravel()
    wy = (w_rho * 2.0 * math.pi * np.sinh(rho) / m)[:, None].repeat(m, axis=1).ravel()
    worst = 0.0
    for x, z in zip(xs, zs):
        val = np.sum(kernel.complex_eval(x, ys) * kernel.complex_eval(ys, z) * wy)
        worst = max(worst, abs(val - kernel.complex_eval(x, z)))
    return float(worst)


def _tree_reproducing_residual(kernel, R_test, n_pairs, rng, policy):
    # homogeneity: the pair (x, z) may be moved to (o, z') with |z'| = d(x, z)
    q = kernel.model.q
    norm = kernel.sphere_normalized
    if norm is None:
        raise KernelError(f"{kernel.label}: tree kernel lacks a sphere-normalized profile")
    depths = rng.integers(0, int(math.floor(R_test)) + 1, size=n_pairs)
    worst = 0.0
    for m in sorted(set(int(d) for d in depths)):
        j, h, log_count = tree_path_orbits(q, m, policy.tree_series_cutoff)
        a, b = j + h, m - j + h
        scale = np.exp(log_count - 0.5 * log_sphere_size(q, a) - 0.5 * log_sphere_size(q, b))
        total = float(np.sum(scale * norm(a) * norm(b)))
        target = float(norm(m)) * math.exp(-0.5 * float(log_sphere_size(q, m)))
        worst = max(worst, abs(total - target))
    return worst
