"""Numeric tolerances shared by every module.

All quadrature and truncation knobs live here so that a single record can be
serialized next to a report and overridden from a run configuration.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Any, Mapping


@dataclass(frozen=True)
class NumericPolicy:
    # adaptive quadrature (scipy.integrate.quad / quad_vec)
    quad_epsabs: float = 1e-8
    quad_epsrel: float = 1e-10
    quad_limit: int = 200
    # radial tails are cut where the remaining kernel mass drops below
    # tail_tol * K(o,o)
    tail_tol: float = 1e-12
    # eigenvalue window [-tol, 1 + tol] for legal kernels
    eig_tol_disk: float = 1e-6
    eig_tol_tree: float = 1e-8
    hermitian_tol: float = 1e-12
    imag_tol: float = 1e-10
    orthogonality_tol: float = 1e-8
    # tree series (spectral coefficients, reproducing sums)
    tree_series_cutoff: int = 2048
    # panels used by fixed Gauss-Legendre rules on radial integrals
    gl_nodes_per_unit: int = 12

    def replace(self, **overrides: Any) -> "NumericPolicy":
        return dataclasses.replace(self, **overrides)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "NumericPolicy":
        known = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise KeyError(f"unknown numeric policy keys: {', '.join(unknown)}")
        base = cls()
        converted = {}
        for key, value in values.items():
            default = getattr(base, key)
            converted[key] = type(default)(value)
        return dataclasses.replace(base, **converted)

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


DEFAULT_POLICY = NumericPolicy()


def thread_count(default: int | None = None) -> int:
    """Worker count, capped by ``HYPERDPP_THREADS`` when set."""
    env = os.environ.get("HYPERDPP_THREADS")
    cpus = os.cpu_count() or 1
    n = default if default is not None else cpus
    if env:
        try:
            n = min(n, int(env)) if default is not None else int(env)
        except ValueError:
            raise ValueError(f"HYPERDPP_THREADS must be an integer, got {env!r}")
    return max(1, n)
