"""One test per acceptance criterion, each at its stated tolerance.

Each test records a criterion number, a title and a one-line detail; the
conftest prints a PASS/FAIL line per criterion at the end of the run.
"""

import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from hyperdpp.bounds import EmpiricalOptions, constant_C, theorem1_sweep
from hyperdpp.dpp_core import expectation, trace_quadrature, variance_direct, variance_lunule
from hyperdpp.geometry import (
    DISK_DELTA,
    SpaceModel,
    ball_volume,
    containment_check,
    fit_growth_profile,
    lunule_volume,
    tree_containment_exhaustive,
)
from hyperdpp.kernels import bergman_kernel, discretized_matrix, tree_spectral_kernel

ROOT = Path(__file__).resolve().parents[1]
DISK = SpaceModel.disk()
TREE3 = SpaceModel.tree(3)
TK = tree_spectral_kernel(3, (-1.0, 1.0))
B0 = bergman_kernel(0.0)


@pytest.fixture(scope="module")
def disk_profile():
    return fit_growth_profile(DISK, DISK_DELTA, 1.0, 10.0, 0.1)


@pytest.fixture(scope="module")
def tree_profile():
    return fit_growth_profile(TREE3, 0.0, 0, 10, 1)


def tag(record_property, n, title, detail):
    record_property("criterion", n)
    record_property("title", title)
    record_property("detail", detail)


def test_criterion_01_kernel_legality(record_property):
    lines, ok = [], True
    for alpha in (0.0, 1.0, 2.0):
        _, _, M = discretized_matrix(bergman_kernel(alpha), 3.0)
        eig = np.linalg.eigvalsh(M)
        ok &= eig.min() >= -1e-6 and eig.max() <= 1 + 1e-6
        lines.append(f"alpha={alpha:g}: [{eig.min():.1e}, {eig.max():.4f}]")
    for R in range(1, 9):
        _, _, M = discretized_matrix(TK, R)
        eig = np.linalg.eigvalsh(M)
        ok &= eig.min() >= 0.0 and eig.max() <= 1.0
        if R in (2, 8):
            lines.append(f"tree B_{R}: [{eig.min():.1e}, {eig.max():.4f}]")
    tag(record_property, 1, "0 <= K <= I", "; ".join(lines))
    assert ok


def test_criterion_02_reproducing_mass(record_property):
    worst = 0.0
    for alpha in (0.0, 0.5, 1.0, 2.0):
        K = bergman_kernel(alpha)
        mass, _ = integrate.quad(lambda r: K.k(r) ** 2 * 2 * math.pi * math.sinh(r), 0, 100,
                                 epsabs=0, epsrel=1e-12, limit=400)
        rel = abs(mass - (alpha + 1) / (4 * math.pi)) / ((alpha + 1) / (4 * math.pi))
        worst = max(worst, rel)
    r = np.arange(0, 4097)
    tree_mass = float(np.sum(TK.sphere_normalized(r) ** 2))
    tree_rel = abs(tree_mass - TK.koo) / TK.koo
    tag(record_property, 2, "int k^2 sigma = k(0)",
        f"bergman worst rel {worst:.1e} (tol 1e-6); tree rel {tree_rel:.1e} (tol 1e-3)")
    assert worst <= 1e-6
    assert tree_rel <= 1e-3


def test_criterion_03_expectation_identity(record_property):
    worst = 0.0
    for alpha in (0.0, 1.0, 2.0):
        K = bergman_kernel(alpha)
        for R in (1.0, 2.0, 3.0):
            e, t = expectation(K, R), trace_quadrature(K, R)
            worst = max(worst, abs(e - t) / e)
    e2 = expectation(B0, 2.0)
    tag(record_property, 3, "E = K(o,o) vol(B_R)",
        f"worst rel vs 2D trace {worst:.1e} (tol 1e-5); alpha=0 R=2 -> {e2:.6f}")
    assert worst <= 1e-5
    assert round(e2, 5) == 1.38110
    assert e2 == pytest.approx(math.sinh(1.0) ** 2, rel=1e-12)


def test_criterion_04_variance_routes(record_property):
    disk_worst = 0.0
    for R in range(1, 7):
        vl, vd = variance_lunule(B0, R), variance_direct(B0, R)
        disk_worst = max(disk_worst, abs(vl - vd) / vd)
    tree_worst = 0.0
    for R in range(2, 9):
        tree_worst = max(tree_worst, abs(variance_lunule(TK, R) - variance_direct(TK, R)))
    tag(record_property, 4, "lunule route = direct route",
        f"disk worst rel {disk_worst:.1e} (tol 5e-3); tree worst abs {tree_worst:.1e} (tol 1e-10)")
    assert disk_worst <= 5e-3
    assert tree_worst <= 1e-10


def test_criterion_05_variance_domination(record_property, disk_profile, tree_profile):
    points = 0
    for kernel, profile, radii in [(B0, disk_profile, range(1, 9)), (TK, tree_profile, range(2, 9))]:
        for v in theorem1_sweep(kernel, profile, radii).sweep:
            points += 1
            assert 0.0 <= v.variance_lunule <= v.expectation
            assert 0.0 <= v.variance_direct <= v.expectation
    tag(record_property, 5, "0 <= var <= E", f"{points} sweep points, exact comparison")


def test_criterion_06_containment(record_property):
    disk = containment_check(DISK, DISK_DELTA, 100_000, 5.0, seed=2024)
    tree = [tree_containment_exhaustive(3, R, 0.0) for R in range(0, 5)]
    checked = sum(t.accepted for t in tree)
    tag(record_property, 6, "B(x,R) & B(y,R) inside B(p, R - r/2 + 2 delta)",
        f"disk: {disk.violations} violations in {disk.accepted} triples "
        f"(max excess {disk.max_excess:.3f}); tree: {sum(t.violations for t in tree)} "
        f"violations in {checked} triples")
    assert disk.accepted == 100_000 and disk.violations == 0
    assert all(t.violations == 0 for t in tree)


def test_criterion_07_growth_certificate(record_property, disk_profile, tree_profile):
    disk_fine = np.linspace(1.0, 10.0, 901)
    tree_fine = np.arange(0.0, 10.0 + 1e-9, 0.1)
    bad = disk_profile.violations(DISK, disk_fine) + tree_profile.violations(TREE3, tree_fine)
    tag(record_property, 7, "c^-1 e^{aR} <= vol(B_R) <= c e^{aR}",
        f"disk c={disk_profile.c:.6f}; tree (c, alpha) = ({tree_profile.c!r}, "
        f"{tree_profile.alpha:.6f}); fine-grid violations {len(bad)}")
    assert bad == []
    assert tree_profile.c == 3 * 1.01
    assert tree_profile.alpha == math.log(2)


def test_criterion_08_lunule_lower_bound(record_property, disk_profile, tree_profile):
    checked, worst = 0, math.inf
    cases = [
        (DISK, disk_profile, [1.0, 2.0, 4.0, 6.0, 8.0, 10.0],
         np.arange(math.ceil(2 * disk_profile.r0) / 2, 24.01, 0.25)),
        (TREE3, tree_profile, range(0, 11), range(math.ceil(tree_profile.r0), 25)),
    ]
    for model, profile, radii, rs in cases:
        for R in radii:
            for r in rs:
                gap = lunule_volume(model, r, R) - profile.lunule_lower_bound(model, r, R)
                worst = min(worst, gap)
                checked += 1
                assert gap >= -1e-8, (model, R, r)
    tag(record_property, 8, "lunule >= c^-2 vol(B_R)(1 - e^{...}) for r >= r0",
        f"{checked} (r, R) pairs, smallest margin {worst:.3g}")


@pytest.mark.parametrize("which", ["disk", "tree"])
def test_criterion_09_headline_bound(record_property, which, disk_profile, tree_profile):
    if which == "disk":
        kernel, profile, radii = B0, disk_profile, range(1, 9)
    else:
        kernel, profile, radii = TK, tree_profile, range(2, 9)
    emp = EmpiricalOptions(n_samples=20_000, seed=20240601, radii=(2.0,))
    rep = theorem1_sweep(kernel, profile, radii, emp)
    v2 = next(v for v in rep.sweep if v.R == 2.0)
    z = (v2.variance_empirical - v2.variance_lunule) / v2.stderr
    min_ratio = min(v.ratio for v in rep.sweep)
    tag(record_property, f"9{which[0]}", f"var/E >= C > 0 ({which})",
        f"C={rep.C:.4e}, min ratio {min_ratio:.4f}, empirical z at R=2 {z:+.2f}, "
        f"empirical ratio {v2.variance_empirical / v2.expectation:.4f}")
    assert rep.C > 0
    assert all(v.ratio >= rep.C for v in rep.sweep)
    assert abs(z) <= 4.0
    assert v2.variance_empirical / v2.expectation >= rep.C


def test_criterion_10_reproducibility(record_property, tmp_path):
    results = {}
    for config in ("disk_bergman.toml", "tree_spectral.toml"):
        csvs = []
        for threads in ("1", "4"):
            out = tmp_path / f"{config}-{threads}"
            env = dict(os.environ, HYPERDPP_THREADS=threads)
            proc = subprocess.run(
                [sys.executable, "-m", "hyperdpp", "bound", str(ROOT / "configs" / config),
                 "--out", str(out)], env=env, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            csvs.append((out / "bound.csv").read_bytes())
        results[config] = csvs[0] == csvs[1]
    tag(record_property, 10, "byte-identical bound CSV across HYPERDPP_THREADS",
        ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in results.items()))
    assert all(results.values())
