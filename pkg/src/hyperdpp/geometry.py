"""Metric-measure models: the Poincare disk and the q-regular tree.

Disk points are complex numbers ``z`` with ``|z| < 1``; the metric has
curvature -1 (length element ``2|dz| / (1 - |z|^2)``) and the area measure has
density ``4 / (1 - |z|^2)^2``.  Tree points are words ``(a1, ..., an)`` of
non-backtracking edge labels read from the root, with ``a1`` in ``0..q-1`` and
later labels in ``0..q-2``; the measure is the counting measure on vertices.
All tree radii are floored to integers and tree balls are closed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .policy import DEFAULT_POLICY, NumericPolicy

EPS_BOUNDARY = 1e-12
SMALL_DISTANCE = 1e-6
# thin-triangle constant of the hyperbolic plane (ideal triangles)
DISK_DELTA = math.log(1.0 + math.sqrt(2.0))

Word = tuple


class GeometryError(ValueError):
    """Invalid point, radius or parameter for a space model."""


@dataclass(frozen=True)
class SpaceModel:
    kind: str
    q: int | None = None

    def __post_init__(self):
        if self.kind not in ("disk", "tree"):
            raise GeometryError(f"unknown space kind {self.kind!r}")
        if self.kind == "tree":
            if self.q is None or int(self.q) != self.q or self.q < 3:
                raise GeometryError(
                    f"tree degree must be an integer >= 3, got {self.q!r}"
                )
        elif self.q is not None:
            raise GeometryError("the disk model takes no degree")

    @classmethod
    def disk(cls) -> "SpaceModel":
        return cls("disk")

    @classmethod
    def tree(cls, q: int) -> "SpaceModel":
        return cls("tree", q)

    @property
    def is_tree(self) -> bool:
        return self.kind == "tree"

    @property
    def base_point(self):
        return () if self.is_tree else 0j

    @property
    def growth_rate(self) -> float:
        """Exponential volume growth rate of balls."""
        return math.log(self.q - 1) if self.is_tree else 1.0

    def point(self, value):
        """Validate ``value`` and return it in canonical form."""
        if self.is_tree:
            return tree_point(value, self.q)
        return disk_point(value)

    def __str__(self):
        return f"tree(q={self.q})" if self.is_tree else "disk"


def disk_point(z) -> complex:
    z = complex(z)
    if not abs(z) < 1.0 - EPS_BOUNDARY:
        raise GeometryError(f"disk point {z!r} is on or outside the boundary guard")
    return z


def tree_point(word: Iterable[int], q: int) -> Word:
    w = tuple(int(a) for a in word)
    for i, a in enumerate(w):
        top = q - 1 if i == 0 else q - 2
        if not 0 <= a <= top:
            raise GeometryError(f"label {a} at position {i} outside 0..{top}")
    return w


def _tree_radius(R: float) -> int:
    if R < 0:
        return -1
    return int(math.floor(R + 1e-12))


# ---------------------------------------------------------------------------
# distances

def disk_distance(z, w):
    """Vectorized hyperbolic distance on the disk."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    x = num / den
    out = np.arccosh(1.0 + 2.0 * x)
    small = out < SMALL_DISTANCE
    if np.any(small):
        # arccosh(1 + 2x) loses digits near 1; first-order form is exact to O(x^1.5)
        out = np.where(small, 2.0 * np.sqrt(x), out)
    return out


def tree_distance(x: Sequence[int], y: Sequence[int]) -> int:
    lcp = 0
    for a, b in zip(x, y):
        if a != b:
            break
        lcp += 1
    return len(x) + len(y) - 2 * lcp


def _pad_words(words: Sequence[Word], width: int, fill: int) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.fromiter((len(w) for w in words), dtype=np.int64, count=len(words))
    arr = np.full((len(words), width), fill, dtype=np.int64)
    for i, w in enumerate(words):
        arr[i, : len(w)] = w
    return arr, lengths


def tree_distance_matrix(xs: Sequence[Word], ys: Sequence[Word]) -> np.ndarray:
    """Pairwise tree distances between two lists of words."""
    width = max([len(w) for w in xs] + [len(w) for w in ys] + [1])
    # distinct fills so padding never extends a common prefix
    a, la = _pad_words(xs, width, -1)
    b, lb = _pad_words(ys, width, -2)
    out = np.empty((len(xs), len(ys)), dtype=np.int64)
    step = max(1, 4_000_000 // max(1, len(ys) * width))
    for start in range(0, len(xs), step):
        eq = a[start : start + step, None, :] == b[None, :, :]
        lcp = np.cumprod(eq, axis=2).sum(axis=2)
        out[start : start + step] = la[start : start + step, None] + lb[None, :] - 2 * lcp
    return out


def dist(model: SpaceModel, x, y) -> float:
    if model.is_tree:
        return float(tree_distance(x, y))
    return float(disk_distance(x, y))


# ---------------------------------------------------------------------------
# disk isometries and the hyperboloid model

def mobius(a: complex, z):
    """Disk isometry ``z -> (z + a) / (1 + conj(a) z)`` sending 0 to ``a``."""
    return (z + a) / (1.0 + np.conj(a) * z)


def to_hyperboloid(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    s = 1.0 - np.abs(z) ** 2
    return np.stack([(1.0 + np.abs(z) ** 2) / s, 2.0 * z.real / s, 2.0 * z.imag / s], axis=-1)


def from_hyperboloid(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return (X[..., 1] + 1j * X[..., 2]) / (1.0 + X[..., 0])


def _polar_hyperboloid(r, theta) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sh = np.sinh(r)
    return np.stack([np.cosh(r), sh * np.cos(theta), sh * np.sin(theta)], axis=-1)


def _minkowski(X, Y):
    return -X[..., 0] * Y[..., 0] + X[..., 1] * Y[..., 1] + X[..., 2] * Y[..., 2]


def _hdist(X, Y):
    return np.arccosh(np.maximum(-_minkowski(X, Y), 1.0))


def _unit_tangent(A, B, D):
    """Unit tangent at ``A`` of the geodesic towards ``B`` (``D = d(A, B)``)."""
    sh = np.sinh(D)[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        U = (B - np.cosh(D)[..., None] * A) / sh
    return np.where(sh > 1e-300, U, 0.0)


def _distance_to_segment(P, A, B):
    """Exact distance from ``P`` to the geodesic segment ``[A, B]``.

    Along the segment ``cosh d(P, gamma(t)) = a cosh t + b sinh t``, which is
    convex in ``t``, so the minimizer is the clipped stationary point.
    """
    D = _hdist(A, B)
    U = _unit_tangent(A, B, D)
    a = -_minkowski(P, A)
    b = -_minkowski(P, U)
    t = np.arctanh(np.clip(-b / a, -1.0 + 1e-16, 1.0 - 1e-16))
    t = np.clip(t, 0.0, D)
    c = a * np.cosh(t) + b * np.sinh(t)
    return np.arccosh(np.maximum(c, 1.0))


def _boost(X):
    """Lorentz matrices sending the origin (1, 0, 0) to the points ``X``."""
    X = np.asarray(X, dtype=float)
    r = np.arccosh(np.maximum(X[..., 0], 1.0))
    phi = np.arctan2(X[..., 2], X[..., 1])
    ch, sh = np.cosh(r), np.sinh(r)
    cp, sp = np.cos(phi), np.sin(phi)
    M = np.zeros(X.shape[:-1] + (3, 3))
    # rotation(phi) @ boost(r) @ rotation(-phi)
    M[..., 0, 0] = ch
    M[..., 0, 1] = sh * cp
    M[..., 0, 2] = sh * sp
    M[..., 1, 0] = sh * cp
    M[..., 2, 0] = sh * sp
    M[..., 1, 1] = cp * cp * ch + sp * sp
    M[..., 1, 2] = cp * sp * (ch - 1.0)
    M[..., 2, 1] = cp * sp * (ch - 1.0)
    M[..., 2, 2] = sp * sp * ch + cp * cp
    return M


# ---------------------------------------------------------------------------
# geodesics

def _tree_step_count(t: float) -> int:
    # round to the nearest vertex, ties toward the first endpoint
    return int(math.ceil(t - 0.5 - 1e-12))


def tree_geodesic_vertex(x: Word, y: Word, steps: int) -> Word:
    lcp = 0
    for a, b in zip(x, y):
        if a != b:
            break
        lcp += 1
    up = len(x) - lcp
    if steps <= up:
        return x[: len(x) - steps]
    return y[: lcp + steps - up]


def tree_path(x: Word, y: Word) -> list[Word]:
    d = tree_distance(x, y)
    return [tree_geodesic_vertex(x, y, s) for s in range(d + 1)]


def geodesic_point(model: SpaceModel, x, y, t: float):
    """Point at distance ``t`` from ``x`` on the geodesic ``[x, y]``.

    On the tree ``t`` is rounded to the nearest vertex, with half-integer ties
    resolved toward ``x``.
    """
    d = dist(model, x, y)
    if t < -1e-12 or t > d + 1e-9:
        raise GeometryError(f"geodesic parameter {t} outside [0, {d}]")
    t = min(max(t, 0.0), d)
    if model.is_tree:
        return tree_geodesic_vertex(x, y, _tree_step_count(t))
    if t == 0.0:
        return complex(x)
    if t == d:
        return complex(y)
    x = complex(x)
    w = (complex(y) - x) / (1.0 - x.conjugate() * complex(y))
    p = math.tanh(t / 2.0) * w / abs(w)
    return complex(mobius(x, p))


# ---------------------------------------------------------------------------
# volumes

def ball_volume(model: SpaceModel, R: float) -> float:
    if R < 0:
        raise GeometryError("radius must be nonnegative")
    if model.is_tree:
        q, n = model.q, _tree_radius(R)
        return float(1 + q * ((q - 1) ** n - 1) // (q - 2))
    return 4.0 * math.pi * math.sinh(R / 2.0) ** 2


def sphere_area(model: SpaceModel, r):
    """Area of the sphere of radius ``r`` (vertex count on the tree)."""
    if model.is_tree:
        r = np.asarray(r)
        q = model.q
        rr = np.floor(r).astype(np.int64)
        out = np.where(rr <= 0, 1.0, q * np.power(float(q - 1), np.maximum(rr - 1, 0)))
        out = np.where(rr < 0, 0.0, out)
        return float(out) if out.ndim == 0 else out
    out = 2.0 * math.pi * np.sinh(r)
    return float(out) if np.ndim(out) == 0 else out


def tree_ball(q: int, R: float, center: Word = ()) -> list[Word]:
    """All vertices within distance ``R`` of ``center``, by BFS."""
    n = _tree_radius(R)
    center = tuple(center)
    if n < 0:
        return []
    out = [center]
    frontier = [(center, None)]
    for _ in range(n):
        nxt = []
        for v, prev in frontier:
            for u in tree_neighbors(v, q):
                if u != prev:
                    out.append(u)
                    nxt.append((u, v))
        frontier = nxt
    return out


def tree_neighbors(v: Word, q: int) -> list[Word]:
    labels = range(q) if len(v) == 0 else range(q - 1)
    kids = [v + (a,) for a in labels]
    return ([v[:-1]] if v else []) + kids


@lru_cache(maxsize=256)
def tree_path_orbits(q: int, m: int, max_offset: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vertex classes relative to a path ``o = v_0, ..., v_m``.

    Every vertex ``v`` has a unique closest path vertex ``v_j`` and lies
    ``h >= 0`` steps off the path, so ``d(o, v) = j + h`` and
    ``d(v_m, v) = m - j + h``.  Returns arrays ``(j, h, log_count)`` for
    ``h <= max_offset``; counts are kept as logarithms since they grow like
    ``(q-1)^h``.
    """
    h = np.arange(max_offset + 1)
    js, hs, logs = [], [], []
    for j in range(m + 1):
        if m == 0:
            branches = q
        elif j in (0, m):
            branches = q - 1
        else:
            branches = q - 2
        log_c = np.where(h == 0, 0.0, math.log(branches) + (h - 1) * math.log(q - 1))
        js.append(np.full(len(h), j))
        hs.append(h)
        logs.append(log_c)
    arrays = (np.concatenate(js), np.concatenate(hs), np.concatenate(logs))
    for a in arrays:
        a.setflags(write=False)
    return arrays


def log_sphere_size(q: int, r) -> np.ndarray:
    r = np.asarray(r)
    return np.where(r == 0, 0.0, math.log(q) + (np.maximum(r, 1) - 1) * math.log(q - 1))


def _disk_outside_angle(rho, r, R):
    """Angular measure of the circle of radius ``rho`` about ``x`` outside ``B_R(o)``.

    ``d(o, x) = r``; uses ``cosh d(o, w) = cosh rho cosh r - sinh rho sinh r cos th``.
    """
    if r == 0.0 or rho == 0.0:
        return 2.0 * math.pi if max(r, rho) > R else 0.0
    u = (math.cosh(rho) * math.cosh(r) - math.cosh(R)) / (math.sinh(rho) * math.sinh(r))
    if u >= 1.0:
        return 2.0 * math.pi
    if u <= -1.0:
        return 0.0
    return 2.0 * (math.pi - math.acos(u))


def lunule_volume(model: SpaceModel, r: float, R: float,
                  policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Measure of ``B_R(x) \\ B_R(o)`` for any ``x`` with ``d(o, x) = r``."""
    if r < 0 or R < 0:
        raise GeometryError("radii must be nonnegative")
    if model.is_tree:
        return float(_tree_lunule(model.q, _tree_radius(r), _tree_radius(R)))
    if r == 0.0 or R == 0.0:
        return 0.0
    if r >= 2.0 * R:
        return ball_volume(model, R)
    kink = abs(r - R)
    pieces = [(0.0, kink), (kink, R)] if 0.0 < kink < R else [(0.0, R)]
    total = 0.0
    for lo, hi in pieces:
        val, _ = integrate.quad(
            lambda rho: math.sinh(rho) * _disk_outside_angle(rho, r, R),
            lo, hi, epsabs=policy.quad_epsabs / 2, epsrel=policy.quad_epsrel,
            limit=policy.quad_limit,
        )
        total += val
    return total


def _tree_lunule(q: int, r: int, R: int) -> int:
    if r == 0:
        return 0
    j, h, log_count = tree_path_orbits(q, r, R)
    mask = (j + h > R) & (r - j + h <= R)
    return int(round(float(np.exp(log_count[mask]).sum())))


# ---------------------------------------------------------------------------
# random points

def random_disk_hyperboloid(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform (w.r.t. the area measure) in ``B_radius(o)``."""
    u = rng.random(n)
    r = np.arccosh(1.0 + u * (math.cosh(radius) - 1.0))
    theta = rng.random(n) * 2.0 * math.pi
    return _polar_hyperboloid(r, theta)


def random_points(model: SpaceModel, n: int, radius: float, rng: np.random.Generator):
    """``n`` points drawn uniformly from the ball ``B_radius(o)``."""
    if model.is_tree:
        return [_random_tree_vertex(model.q, _tree_radius(radius), rng) for _ in range(n)]
    return from_hyperboloid(random_disk_hyperboloid(n, radius, rng))


def _random_tree_vertex(q: int, R: int, rng: np.random.Generator, center: Word = ()) -> Word:
    sizes = np.array([1.0] + [q * (q - 1.0) ** (r - 1) for r in range(1, R + 1)])
    depth = int(rng.choice(R + 1, p=sizes / sizes.sum()))
    return _tree_walk(center, depth, q, rng)


def _tree_walk(start: Word, steps: int, q: int, rng: np.random.Generator) -> Word:
    """Uniform vertex on the sphere of radius ``steps`` about ``start``."""
    v, prev = start, None
    for _ in range(steps):
        options = [u for u in tree_neighbors(v, q) if u != prev]
        v, prev = options[int(rng.integers(len(options)))], v
    return v


# ---------------------------------------------------------------------------
# hyperbolicity

def delta_estimate(model: SpaceModel, n_triangles: int, sample_radius: float,
                   seed: int, step: float = 0.01) -> float:
    """Empirical thin-triangle constant.

    For random triangles in ``B_sample_radius`` every side is discretized with
    ``step`` and each point's distance to the union of the other two sides is
    computed; the maximum over all triangles and sides is returned.  This is a
    lower estimate of the optimal delta.
    """
    if n_triangles < 1:
        raise GeometryError("n_triangles must be >= 1")
    rng = np.random.default_rng(seed)
    if model.is_tree:
        return _tree_delta(model.q, n_triangles, _tree_radius(sample_radius), rng)
    pts = random_disk_hyperboloid(3 * n_triangles, sample_radius, rng).reshape(n_triangles, 3, 3)
    best = 0.0
    chunk = 256
    for start in range(0, n_triangles, chunk):
        tri = pts[start : start + chunk]
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            best = max(best, _disk_side_thinness(tri[:, i], tri[:, j], tri[:, k], step))
    return best


def _disk_side_thinness(X, Y, Z, step):
    D = _hdist(X, Y)
    n = np.ceil(D / step).astype(np.int64) + 1
    idx = np.repeat(np.arange(len(D)), n)
    offsets = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    t = np.minimum(offsets * step, D[idx])
    U = _unit_tangent(X, Y, D)
    P = np.cosh(t)[:, None] * X[idx] + np.sinh(t)[:, None] * U[idx]
    d1 = _distance_to_segment(P, X[idx], Z[idx])
    d2 = _distance_to_segment(P, Y[idx], Z[idx])
    return float(np.max(np.minimum(d1, d2), initial=0.0))


def _tree_delta(q, n_triangles, R, rng):
    best = 0
    for _ in range(n_triangles):
        x, y, z = (_random_tree_vertex(q, R, rng) for _ in range(3))
        for a, b, c in ((x, y, z), (y, z, x), (z, x, y)):
            others = tree_path(a, c) + tree_path(b, c)
            for p in tree_path(a, b):
                best = max(best, min(tree_distance(p, v) for v in others))
    return float(best)


# ---------------------------------------------------------------------------
# growth constants

@dataclass(frozen=True)
class GrowthProfile:
    """Constants ``(c, alpha, delta)`` certified on ``[r_min, r_max]``."""

    c: float
    alpha: float
    delta: float
    r_min: float
    r_max: float

    def __post_init__(self):
        if not (self.c > 0 and self.alpha > 0):
            raise GeometryError("growth constants c and alpha must be positive")
        if self.delta < 0:
            raise GeometryError("delta must be nonnegative")
        if not self.r_min <= self.r_max:
            raise GeometryError("empty validity range")

    @property
    def r0(self) -> float:
        """Radius beyond which the lunule lower bound is positive."""
        return 4.0 * (self.delta + math.log(self.c) / self.alpha)

    def contains(self, R: float) -> bool:
        return self.r_min - 1e-12 <= R <= self.r_max + 1e-12

    def violations(self, model: SpaceModel, radii) -> list[float]:
        """Radii where the two-sided exponential bound fails."""
        bad = []
        for R in radii:
            vol = ball_volume(model, R)
            scale = math.exp(self.alpha * (_tree_radius(R) if model.is_tree else R))
            if not (scale / self.c <= vol * (1 + 1e-14) and vol <= self.c * scale * (1 + 1e-14)):
                bad.append(float(R))
        return bad

    def lunule_lower_bound(self, model: SpaceModel, r: float, R: float) -> float:
        """Lower bound on the lunule measure implied by the growth constants."""
        if r < self.r0:
            return 0.0
        expo = self.alpha * (r / 2.0 - 2.0 * self.delta - 2.0 * math.log(self.c) / self.alpha)
        return ball_volume(model, R) * (1.0 - math.exp(-expo)) / self.c**2


def fit_growth_profile(model: SpaceModel, delta: float, r_min: float, r_max: float,
                       grid_step: float, margin: float = 0.01) -> GrowthProfile:
    """Smallest grid-certified ``c`` for the model's analytic growth rate.

    On the tree the ratio ``|B_R| / (q-1)^R`` increases to ``q / (q-2)`` and
    that supremum is folded in, so the profile holds for every radius.
    """
    if not 0 <= r_min < r_max:
        raise GeometryError("need 0 <= r_min < r_max")
    if grid_step <= 0:
        raise GeometryError("grid_step must be positive")
    if ball_volume(model, r_min) == 0.0:
        raise GeometryError(f"ball of radius {r_min} has zero volume; no finite c exists")
    alpha = model.growth_rate
    grid = _grid(r_min, r_max, grid_step)
    c = 1.0
    for R in grid:
        vol = ball_volume(model, R)
        scale = math.exp(alpha * (_tree_radius(R) if model.is_tree else R))
        c = max(c, vol / scale, scale / vol)
    if model.is_tree:
        c = max(c, model.q / (model.q - 2))
    return GrowthProfile(c=c * (1.0 + margin), alpha=alpha, delta=float(delta),
                         r_min=float(r_min), r_max=float(r_max))


def _grid(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(n + 1)
    if grid[-1] < hi - 1e-12:
        grid = np.append(grid, hi)
    return grid


# ---------------------------------------------------------------------------
# containment of ball intersections

@dataclass(frozen=True)
class ContainmentReport:
    violations: int
    max_excess: float
    accepted: int


def containment_check(model: SpaceModel, delta: float, n_trials: int, R: float,
                      seed: int, max_rounds: int = 200) -> ContainmentReport:
    """Monte Carlo check of ``B(x,R) & B(y,R) <= B(p, R - r/2 + 2 delta)``.

    ``p`` is the geodesic midpoint of ``[x, y]`` and ``r = d(x, y)``.  Triples
    with ``z`` outside ``B(y, R)`` are rejected until ``n_trials`` are kept.
    On the tree the midpoint is a vertex and 1/2 of slack is allowed.
    """
    if n_trials < 1:
        raise GeometryError("n_trials must be >= 1")
    if delta < 0:
        raise GeometryError("delta must be nonnegative")
    rng = np.random.default_rng(seed)
    if model.is_tree:
        return _tree_containment(model.q, delta, n_trials, _tree_radius(R), rng)
    violations, kept, worst = 0, 0, -math.inf
    batch = max(1024, n_trials)
    for _ in range(max_rounds):
        if kept >= n_trials:
            break
        X = random_disk_hyperboloid(batch, 1.0, rng)
        L = _boost(X)
        r = rng.random(batch) * 2.0 * R
        Y = np.einsum("nij,nj->ni", L, _polar_hyperboloid(r, rng.random(batch) * 2 * math.pi))
        Z = np.einsum("nij,nj->ni", L, random_disk_hyperboloid(batch, R, rng))
        ok = _hdist(Y, Z) <= R
        ok &= np.cumsum(ok) <= n_trials - kept
        if not ok.any():
            continue
        X, Y, Z, r = X[ok], Y[ok], Z[ok], r[ok]
        D = _hdist(X, Y)
        U = _unit_tangent(X, Y, D)
        P = np.cosh(D / 2)[:, None] * X + np.sinh(D / 2)[:, None] * U
        excess = _hdist(P, Z) - (R - D / 2 + 2 * delta)
        violations += int(np.sum(excess > 1e-9))
        worst = max(worst, float(excess.max()))
        kept += int(ok.sum())
    return ContainmentReport(violations=violations, max_excess=worst, accepted=kept)


def _tree_containment(q, delta, n_trials, R, rng):
    violations, worst, kept = 0, -math.inf, 0
    attempts = 0
    while kept < n_trials and attempts < 200 * n_trials:
        attempts += 1
        x = _random_tree_vertex(q, 2, rng)
        y = _tree_walk(x, int(rng.integers(2 * R + 1)), q, rng)
        z = _random_tree_vertex(q, R, rng, center=x)
        if tree_distance(y, z) > R:
            continue
        kept += 1
        e = _tree_excess(x, y, z, R, delta)
        violations += e > 1e-12
        worst = max(worst, e)
    return ContainmentReport(violations=int(violations), max_excess=worst, accepted=kept)


def _tree_excess(x, y, z, R, delta):
    r = tree_distance(x, y)
    p = tree_geodesic_vertex(x, y, _tree_step_count(r / 2))
    return tree_distance(p, z) - (R - r / 2 + 2 * delta + 0.5)


def tree_containment_exhaustive(q: int, R: int, delta: float = 0.0) -> ContainmentReport:
    """Every triple with ``x`` in ``B_1(o)``, ``y`` within ``2R`` of ``x`` and
    ``z`` in both balls."""
    violations, worst, kept = 0, -math.inf, 0
    for x in tree_ball(q, 1):
        ys = tree_ball(q, 2 * R, center=x)
        zs = tree_ball(q, R, center=x)
        dyz = tree_distance_matrix(ys, zs)
        for iy, y in enumerate(ys):
            for iz in np.nonzero(dyz[iy] <= R)[0]:
                kept += 1
                e = _tree_excess(x, y, zs[iz], R, delta)
                violations += e > 1e-12
                worst = max(worst, e)
    return ContainmentReport(violations=int(violations), max_excess=worst, accepted=kept)
