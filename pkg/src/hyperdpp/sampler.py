"""Exact sampling of the discretized process on a ball.

The kernel is restricted to ``B_R`` through a quadrature rule, giving a
Hermitian matrix ``M = W^1/2 K W^1/2``.  Sampling follows the spectral
algorithm: keep each eigenvector independently with probability equal to its
eigenvalue, then draw one node per kept vector, projecting the kept span away
from each drawn coordinate.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dpp_core import Configuration, expectation
from .kernels import KernelError, RadialKernel, discretized_matrix
from .policy import DEFAULT_POLICY, NumericPolicy, thread_count
from .quadrature import QuadratureGrid

log = logging.getLogger(__name__)

MIN_SAMPLES = 100


class DiscretizationError(KernelError):
    """The quadrature rule is too coarse for the kernel on this ball."""


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    nodes: object
    weights: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    radius: float

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def trace(self) -> float:
        return float(np.sum(np.real(np.diag(self.matrix))))

    def point(self, j: int):
        return self.nodes[j]


def discretize(kernel: RadialKernel, R: float, grid: QuadratureGrid = QuadratureGrid(),
               policy: NumericPolicy = DEFAULT_POLICY) -> DiscretizedOperator:
    """Restrict ``kernel`` to ``B_R`` and diagonalize."""
    if kernel.model.is_tree:
        R = math.floor(R + 1e-12)
    nodes, weights, M = discretized_matrix(kernel, R, grid, policy)
    if M.size:
        vals, vecs = np.linalg.eigh(M)
    else:
        vals, vecs = np.zeros(0), np.zeros((0, 0))
    tol = policy.eig_tol_tree if kernel.model.is_tree else policy.eig_tol_disk
    if vals.size and (vals.min() < -tol or vals.max() > 1.0 + tol):
        raise DiscretizationError(
            f"{kernel.label} on B_{R:g}: eigenvalues span [{vals.min():.3g}, {vals.max():.3g}]"
            f" outside [-{tol:g}, 1+{tol:g}]; refine the grid (e.g. radial_per_unit"
            f" >= {2 * grid.radial_per_unit:g}, angular_min >= {2 * grid.angular_min})"
        )
    vals = np.clip(vals, 0.0, 1.0)
    return DiscretizedOperator(nodes=nodes, weights=np.asarray(weights), matrix=M,
                               eigenvalues=vals, eigenvectors=vecs, radius=R)


def _orthonormalize(V: np.ndarray) -> np.ndarray:
    # modified Gram-Schmidt, two passes
    V = V.copy()
    k = V.shape[1]
    for _ in range(2):
        for i in range(k):
            for j in range(i):
                V[:, i] -= (V[:, j].conj() @ V[:, i]) * V[:, j]
            V[:, i] /= np.linalg.norm(V[:, i])
    return V


def sample_indices(op: DiscretizedOperator, rng: np.random.Generator,
                   policy: NumericPolicy = DEFAULT_POLICY) -> list[int]:
    keep = rng.random(op.size) < op.eigenvalues
    V = op.eigenvectors[:, keep]
    chosen = []
    while V.shape[1] > 0:
        k = V.shape[1]
        prob = np.sum(np.abs(V) ** 2, axis=1) / k
        prob = np.maximum(prob, 0.0)
        j = int(rng.choice(op.size, p=prob / prob.sum()))
        chosen.append(j)
        if k == 1:
            break
        # drop the column with the largest entry at j and cancel row j in the rest
        c = int(np.argmax(np.abs(V[j])))
        pivot = V[:, c]
        V = np.delete(V, c, axis=1)
        V = V - np.outer(pivot, V[j] / pivot[j])
        V = _orthonormalize(V)
        gram = V.conj().T @ V
        err = float(np.max(np.abs(gram - np.eye(V.shape[1]))))
        if err > policy.orthogonality_tol:
            log.warning("orthogonality loss %.2e after %d points; re-orthogonalizing", err, len(chosen))
            V = _orthonormalize(V)
    return chosen


def sample(op: DiscretizedOperator, seed, policy: NumericPolicy = DEFAULT_POLICY) -> Configuration:
    """One configuration of the discretized process, deterministic in ``seed``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = sample_indices(op, rng, policy)
    if isinstance(op.nodes, np.ndarray):
        points = [complex(op.nodes[j]) for j in idx]
    else:
        points = [op.nodes[j] for j in idx]
    return Configuration(points=points, region_radius=op.radius)


def replica_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replica ``index``; fixed by ``(seed, index)`` alone."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def sample_many(op: DiscretizedOperator, n: int, seed: int, threads: int | None = None,
                policy: NumericPolicy = DEFAULT_POLICY) -> list[Configuration]:
    workers = thread_count(threads)

    def run(i):
        return sample(op, replica_rng(seed, i), policy)

    if workers == 1:
        return [run(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(n)))


@dataclass(frozen=True)
class EmpiricalStats:
    mean: float
    variance: float
    stderr_mean: float
    stderr_variance: float
    n_samples: int


def jackknife(counts: np.ndarray) -> EmpiricalStats:
    """Sample mean and variance with delete-one jackknife standard errors."""
    x = np.asarray(counts, dtype=float)
    n = len(x)
    s1, s2 = x.sum(), np.sum(x * x)
    mean = s1 / n
    var = (s2 - n * mean**2) / (n - 1)
    loo_mean = (s1 - x) / (n - 1)
    loo_var = ((s2 - x * x) - (n - 1) * loo_mean**2) / (n - 2)
    se_mean = math.sqrt((n - 1) / n * np.sum((loo_mean - loo_mean.mean()) ** 2))
    se_var = math.sqrt((n - 1) / n * np.sum((loo_var - loo_var.mean()) ** 2))
    return EmpiricalStats(mean=float(mean), variance=float(var), stderr_mean=se_mean,
                          stderr_variance=se_var, n_samples=n)


def empirical_stats(kernel: RadialKernel, R: float, n_samples: int, seed: int,
                    grid: QuadratureGrid = QuadratureGrid(), threads: int | None = None,
                    policy: NumericPolicy = DEFAULT_POLICY) -> EmpiricalStats:
    """Count statistics in ``B_R`` over ``n_samples`` independent configurations."""
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n_samples}")
    op = discretize(kernel, R, grid, policy)
    trace_gap = abs(op.trace - expectation(kernel, op.radius))
    if trace_gap > 1e-6 * max(1.0, op.trace):
        log.warning("discretized trace differs from the mean count by %.3e", trace_gap)
    configs = sample_many(op, n_samples, seed, threads, policy)
    counts = np.array([len(c) for c in configs], dtype=float)
    return jackknife(counts)
