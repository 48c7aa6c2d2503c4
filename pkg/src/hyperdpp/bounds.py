"""Lower bound on the variance-to-mean ratio and the sweep that checks it."""

from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import dpp_core
from .geometry import GrowthProfile, sphere_area
from .kernels import KernelError, RadialKernel, radial_cutoff
from .policy import DEFAULT_POLICY, NumericPolicy, thread_count
from .quadrature import QuadratureGrid

log = logging.getLogger(__name__)


class DegenerateBoundWarning(UserWarning):
    """The kernel vanishes beyond r0, so the bound is the trivial C = 0."""


@dataclass(frozen=True)
class VarianceReport:
    R: float
    expectation: float
    variance_lunule: float
    variance_direct: float
    C: float
    variance_empirical: float | None = None
    stderr: float | None = None
    error: str | None = None

    @property
    def ratio(self) -> float:
        if self.expectation == 0:
            return math.nan
        return self.variance_lunule / self.expectation

    @property
    def passed(self) -> bool:
        return self.error is None and self.ratio >= self.C

    @property
    def gap(self) -> float:
        return self.ratio - self.C


@dataclass(frozen=True)
class BoundReport:
    profile: GrowthProfile
    C: float
    r0: float
    sweep: list[VarianceReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.sweep)


@dataclass(frozen=True)
class EmpiricalOptions:
    n_samples: int = 20_000
    seed: int = 0
    radii: tuple[float, ...] = (2.0,)
    grid: QuadratureGrid = QuadratureGrid()
    threads: int | None = None


def _bound_factor(profile: GrowthProfile, r):
    expo = profile.alpha * (np.asarray(r, dtype=float) / 2.0 - 2.0 * profile.delta) \
        - 2.0 * math.log(profile.c)
    return -np.expm1(-expo)


def constant_C(kernel: RadialKernel, profile: GrowthProfile,
               policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """``1/(c^2 K(o,o))`` times the radial integral of ``k^2 (1 - e^{...})`` past r0.

    The integral is carried to a cutoff where the kernel's remaining mass is
    below ``tail_tol * K(o,o)``; past it the factor ``1 - e^{...}`` is at least
    its value at the cutoff, which closes the tail from below.
    """
    r0 = profile.r0
    model = kernel.model
    if model.is_tree:
        start = int(math.floor(r0)) + 1 if r0 == math.floor(r0) else int(math.ceil(r0))
        start = max(start, 0)
        # cutoff past which 1 - e^{...} is 1 to double precision
        end = start + int(math.ceil(80.0 / profile.alpha)) + 1
        r = np.arange(start, end + 1)
        body = float(np.sum(kernel.radial_modulus(r) ** 2 * sphere_area(model, r)
                            * _bound_factor(profile, r)))
        tail = kernel.mass_beyond(end) * float(_bound_factor(profile, end + 1))
    else:
        end = max(r0, radial_cutoff(kernel, policy.tail_tol, start=r0))

        def f(r):
            return float(kernel.radial_modulus(r)) ** 2 * 2.0 * math.pi * math.sinh(r) \
                * float(_bound_factor(profile, r))

        body = 0.0
        if end > r0:
            body, _ = integrate.quad(f, r0, end, epsabs=0.0, epsrel=1e-12,
                                     limit=policy.quad_limit)
        tail = kernel.mass_beyond(end) * float(_bound_factor(profile, end))
    value = (body + max(tail, 0.0)) / (profile.c**2 * kernel.koo)
    if value <= 0.0:
        warnings.warn(f"{kernel.label}: kernel vanishes beyond r0 = {r0:.4g}; C = 0",
                      DegenerateBoundWarning, stacklevel=2)
        return 0.0
    return value


def variance_report(kernel: RadialKernel, R: float, C: float,
                    empirical: EmpiricalOptions | None = None,
                    policy: NumericPolicy = DEFAULT_POLICY) -> VarianceReport:
    try:
        e = dpp_core.expectation(kernel, R)
        vl = dpp_core.variance_lunule(kernel, R, policy)
        vd = dpp_core.variance_direct(kernel, R, policy)
        ve = se = None
        if empirical is not None and any(abs(R - r) < 1e-12 for r in empirical.radii):
            from .sampler import empirical_stats

            stats = empirical_stats(kernel, R, empirical.n_samples, empirical.seed,
                                    empirical.grid, empirical.threads, policy)
            ve, se = stats.variance, stats.stderr_variance
        return VarianceReport(R=float(R), expectation=e, variance_lunule=vl,
                              variance_direct=vd, C=C, variance_empirical=ve, stderr=se)
    except (KernelError, ValueError, ArithmeticError) as exc:
        log.error("R=%g failed: %s", R, exc)
        return VarianceReport(R=float(R), expectation=math.nan, variance_lunule=math.nan,
                              variance_direct=math.nan, C=C, error=f"{type(exc).__name__}: {exc}")


def theorem1_sweep(kernel: RadialKernel, profile: GrowthProfile, radii,
                   empirical: EmpiricalOptions | None = None,
                   policy: NumericPolicy = DEFAULT_POLICY,
                   threads: int | None = None) -> BoundReport:
    """Evaluate ``var / mean`` against ``C`` at every radius in ``radii``."""
    radii = [float(R) for R in radii]
    outside = [R for R in radii if not profile.contains(R)]
    if outside:
        raise ValueError(f"radii {outside} lie outside the profile range "
                         f"[{profile.r_min:g}, {profile.r_max:g}]")
    C = constant_C(kernel, profile, policy)
    workers = thread_count(threads)

    def run(R):
        return variance_report(kernel, R, C, empirical, policy)

    if workers == 1:
        sweep = [run(R) for R in radii]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sweep = list(pool.map(run, radii))
    return BoundReport(profile=profile, C=C, r0=profile.r0, sweep=sweep)


def search_c(kernel: RadialKernel, profile: GrowthProfile,
             factors=(1.0, 1.1, 1.25, 1.5, 2.0),
             policy: NumericPolicy = DEFAULT_POLICY) -> tuple[GrowthProfile, float]:
    """Coarse search over admissible ``c >= profile.c`` for the largest ``C``.

    Any larger ``c`` still satisfies the growth bounds, so every candidate is
    valid; the fitted ``c`` normally wins because ``C`` decreases in ``c``.
    """
    best = None
    for f in factors:
        if f < 1.0:
            raise ValueError("factors below 1 would leave the certified range of c")
        cand = dataclasses.replace(profile, c=profile.c * f)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateBoundWarning)
            val = constant_C(kernel, cand, policy)
        if best is None or val > best[1]:
            best = (cand, val)
    return best
