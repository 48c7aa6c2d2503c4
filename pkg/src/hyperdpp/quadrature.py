"""Quadrature rules on balls.

Disk balls use a geodesic polar product rule: Gauss-Legendre panels in the
radius (the area element ``sinh(rho)`` folded into the weights) and the
trapezoid rule in the angle, with the number of angles on a ring growing like
``sinh(rho)``.  Tree balls are enumerated vertex by vertex with unit weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SpaceModel, tree_ball


@dataclass(frozen=True)
class QuadratureGrid:
    radial_per_unit: float = 10.0
    radial_min: int = 8
    angular_min: int = 24
    angular_per_sinh: float = 14.0

    def __post_init__(self):
        if self.radial_per_unit <= 0 or self.radial_min < 1 or self.angular_min < 1:
            raise ValueError("quadrature resolution must be positive")
        if self.angular_per_sinh < 0:
            raise ValueError("angular_per_sinh must be nonnegative")


def gauss_legendre(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def panel_rule(breaks, nodes_per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule over consecutive intervals of ``breaks``."""
    xs, ws = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi > lo:
            x, w = gauss_legendre(lo, hi, nodes_per_panel)
            xs.append(x)
            ws.append(w)
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def disk_ball_rule(R: float, grid: QuadratureGrid = QuadratureGrid()) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (complex) and weights for integrating over ``B_R`` against area."""
    if R <= 0:
        return np.empty(0, dtype=complex), np.empty(0)
    n_rad = max(grid.radial_min, int(math.ceil(grid.radial_per_unit * R)))
    rho, w_rho = gauss_legendre(0.0, R, n_rad)
    nodes, weights = [], []
    for r, w in zip(rho, w_rho):
        m = grid.angular_min + int(math.ceil(grid.angular_per_sinh * math.sinh(r)))
        theta = 2.0 * math.pi * (np.arange(m) + 0.5) / m
        nodes.append(math.tanh(r / 2.0) * np.exp(1j * theta))
        weights.append(np.full(m, w * math.sinh(r) * 2.0 * math.pi / m))
    return np.concatenate(nodes), np.concatenate(weights)


def ball_rule(model: SpaceModel, R: float, grid: QuadratureGrid = QuadratureGrid()):
    """Nodes and weights on ``B_R``; unit weights on the tree."""
    if model.is_tree:
        nodes = tree_ball(model.q, R)
        return nodes, np.ones(len(nodes))
    return disk_ball_rule(R, grid)
