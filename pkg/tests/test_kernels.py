import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

from hyperdpp.geometry import SpaceModel, disk_distance, mobius, random_points
from hyperdpp.kernels import (
    DegenerateKernelError,
    KernelError,
    KernelImplementationError,
    KernelValidationError,
    bergman_kernel,
    custom_radial_kernel,
    identity_kernel,
    orthonormal_spherical_polys,
    radial_cutoff,
    scale_kernel,
    tree_spectral_kernel,
    verify_projection,
)
from hyperdpp.quadrature import QuadratureGrid

FIXTURES = Path(__file__).parent / "fixtures"
DISK = SpaceModel.disk()
COARSE = QuadratureGrid(6, 6, 12, 8)


def jacobi_projection(q, a, b, n_levels=4000, r_max=12):
    """Root row of the band projection for the radial part of the adjacency
    operator on a root-centered ball, normalized per vertex."""
    off = np.full(n_levels - 1, math.sqrt(q - 1))
    off[0] = math.sqrt(q)
    w, V = eigh_tridiagonal(np.zeros(n_levels), off)
    sel = (w >= a) & (w <= b)
    row = (V[0, sel][None, :] * V[: r_max + 1][:, sel]).sum(axis=1)
    r = np.arange(r_max + 1)
    s = np.where(r == 0, 1.0, q * (q - 1.0) ** (r - 1))
    return row / np.sqrt(s)


# -- Bergman family -------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0])
def test_bergman_reproducing_mass(alpha):
    K = bergman_kernel(alpha)
    assert K.koo == pytest.approx((alpha + 1) / (4 * math.pi), rel=1e-15)
    mass, _ = integrate.quad(lambda r: K.k(r) ** 2 * 2 * math.pi * math.sinh(r), 0, 80,
                             epsabs=0, epsrel=1e-13, limit=200)
    assert mass == pytest.approx(K.koo, rel=1e-9)
    assert K.total_mass == pytest.approx(K.koo, rel=1e-15)
    assert K.mass_beyond(3.0) == pytest.approx(
        integrate.quad(lambda r: K.k(r) ** 2 * 2 * math.pi * math.sinh(r), 3, 80,
                       epsabs=0, epsrel=1e-12)[0], rel=1e-9)


def test_bergman_alpha0_value():
    assert bergman_kernel(0).koo == pytest.approx(0.0795774715459477, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
def test_bergman_modulus_matches_complex_kernel(alpha):
    K = bergman_kernel(alpha)
    rng = np.random.default_rng(1)
    z = random_points(DISK, 10_000, 5.0, rng)
    w = random_points(DISK, 10_000, 5.0, rng)
    lhs = np.abs(K.complex_eval(z, w))
    rhs = K.k(disk_distance(z, w))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)
    assert K.k(0.0) == K.koo
    assert np.all(K.k(np.linspace(0, 30, 301)) <= K.koo)


@settings(max_examples=200, deadline=None)
@given(st.complex_numbers(max_magnitude=0.95), st.complex_numbers(max_magnitude=0.95),
       st.complex_numbers(max_magnitude=0.95))
def test_bergman_mobius_invariance(x, y, a):
    K = bergman_kernel(1.0)
    before = abs(K.complex_eval(x, y))
    after = abs(K.complex_eval(mobius(a, x), mobius(a, y)))
    assert after == pytest.approx(before, rel=1e-9, abs=1e-300)


def test_bergman_rejects_negative_weight():
    with pytest.raises(KernelError):
        bergman_kernel(-0.5)


def test_bergman_matrix_is_hermitian():
    K = bergman_kernel(0.0)
    z = random_points(DISK, 40, 2.0, np.random.default_rng(2))
    M = K.matrix(z)
    assert np.max(np.abs(M - M.conj().T)) < 1e-15


# -- tree spectral projections --------------------------------------------

def test_tree_kernel_against_jacobi_truncation():
    K = tree_spectral_kernel(3, (-1.0, 1.0))
    oracle = jacobi_projection(3, -1.0, 1.0)
    got = K.radial_value(np.arange(13))
    # three significant digits out to r = 6; the truncated oracle itself is
    # only good to about 1e-4 absolute
    even = np.arange(0, 7, 2)
    np.testing.assert_allclose(got[even], oracle[even], rtol=1e-3)
    np.testing.assert_allclose(got, oracle, atol=2e-4)


def test_tree_kernel_fixture():
    rows = np.loadtxt(FIXTURES / "tree_spectral_q3_band_m1_1.txt")
    K = tree_spectral_kernel(3, (-1.0, 1.0))
    np.testing.assert_allclose(K.radial_value(rows[:, 0].astype(int)), rows[:, 1],
                               rtol=1e-10, atol=1e-15)
    assert K.koo == pytest.approx(0.3051870965691556, rel=1e-12)


def test_tree_koo_is_kesten_mckay_mass():
    q, a, b = 4, -0.5, 2.0
    edge = 2 * math.sqrt(q - 1)

    def km(x):
        return q * math.sqrt(edge**2 - x * x) / (2 * math.pi * (q * q - x * x))

    mass, _ = integrate.quad(km, a, b, epsabs=0, epsrel=1e-13)
    assert tree_spectral_kernel(q, (a, b)).koo == pytest.approx(mass, rel=1e-10)


def test_tree_reproducing_mass():
    K = tree_spectral_kernel(3, (-1.0, 1.0))
    r = np.arange(0, 4097)
    direct = float(np.sum(K.sphere_normalized(r) ** 2))
    assert direct == pytest.approx(K.koo, rel=1e-3)
    assert K.total_mass == pytest.approx(K.koo, rel=1e-12)


def test_complementary_bands_sum_to_identity():
    q = 3
    edge = 2 * math.sqrt(q - 1)
    lo = tree_spectral_kernel(q, (-edge, 0.3))
    hi = tree_spectral_kernel(q, (0.3, edge))
    r = np.arange(0, 10)
    total = lo.radial_value(r) + hi.radial_value(r)
    np.testing.assert_allclose(total, (r == 0).astype(float), atol=1e-12)


def test_symmetric_band_vanishes_at_odd_radii():
    K = tree_spectral_kernel(3, (-1.0, 1.0))
    assert np.max(np.abs(K.radial_value(np.arange(1, 40, 2)))) < 1e-14


def test_identity_kernel():
    K = identity_kernel(3)
    assert K.koo == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(K.radial_value(np.arange(1, 20)))) < 1e-13


def test_tree_kernel_errors():
    with pytest.raises(DegenerateKernelError):
        tree_spectral_kernel(3, (0.5, 0.5))
    with pytest.raises(KernelError):
        tree_spectral_kernel(3, (1.0, -1.0))
    with pytest.raises(KernelError):
        tree_spectral_kernel(3, (-3.0, 1.0))


def test_spherical_polys_are_orthonormal():
    q = 5
    edge = 2 * math.sqrt(q - 1)
    x, w = np.polynomial.legendre.leggauss(400)
    theta = (x + 1) * math.pi / 2
    lam = edge * np.cos(theta)
    dens = q * np.sqrt(edge**2 - lam**2) / (2 * math.pi * (q * q - lam**2))
    weights = w * math.pi / 2 * edge * np.sin(theta) * dens
    P = orthonormal_spherical_polys(q, lam, 8)
    gram = (P * weights) @ P.T
    np.testing.assert_allclose(gram, np.eye(9), atol=1e-10)


# -- custom profiles ------------------------------------------------------

def test_custom_profile_accepted():
    r = np.linspace(0, 20, 201)
    K = custom_radial_kernel(DISK, 0.1, np.column_stack([r, 0.1 * np.exp(-r)]))
    assert not K.verified
    assert K.k(0.0) == 0.1
    assert K.k(25.0) == 0.0


def test_custom_profile_rejections_list_every_problem():
    table = [(0.0, 1.0), (2.0, 0.5), (5.0, 1.2), (6.0, -0.1)]
    with pytest.raises(KernelValidationError) as info:
        custom_radial_kernel(DISK, 1.0, table)
    msg = str(info.value)
    assert "k(5)" in msg and "k(6)" in msg
    with pytest.raises(KernelValidationError):
        custom_radial_kernel(DISK, 1.0, [(0.0, 0.9)])
    with pytest.raises(KernelValidationError):
        custom_radial_kernel(DISK, 1.0, [(0.0, 1.0), (1.0, 0.5)], interpolation="cubic")


# the interpolated profile has kinks at every table radius
@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_custom_bergman_profile_reproduces_statistics():
    from hyperdpp.dpp_core import variance_lunule

    B = bergman_kernel(0.0)
    r = np.linspace(0, 40, 4001)
    C = custom_radial_kernel(DISK, B.koo, np.column_stack([r, B.k(r)]), "loglinear")
    # loglinear interpolation of sech^2(r/2) on a 0.01 grid is good to ~1e-6
    assert C.total_mass == pytest.approx(B.koo, rel=1e-5)
    assert variance_lunule(C, 2.0) == pytest.approx(variance_lunule(B, 2.0), rel=1e-5)


# -- legality -------------------------------------------------------------

def test_verify_bergman_passes():
    rep = verify_projection(bergman_kernel(0), 2.0, COARSE)
    assert rep.passed
    assert rep.min_eig >= -1e-6 and rep.max_eig <= 1 + 1e-6
    assert rep.reproducing_residual < 1e-8
    assert rep.cs_residual == 0.0


def test_verify_identity_tree_eigenvalues_are_one():
    rep = verify_projection(identity_kernel(3), 3)
    assert rep.size == 22
    assert rep.min_eig == pytest.approx(1.0, abs=1e-12)
    assert rep.max_eig == pytest.approx(1.0, abs=1e-12)


def test_verify_scaled_kernel_fails():
    rep = verify_projection(scale_kernel(identity_kernel(3), 1.5), 2)
    assert rep.max_eig == pytest.approx(1.5, abs=1e-12)
    assert not rep.passed
    base = verify_projection(bergman_kernel(0), 2.0, COARSE)
    scaled = verify_projection(scale_kernel(bergman_kernel(0), 1.5), 2.0, COARSE)
    assert scaled.max_eig == pytest.approx(1.5 * base.max_eig, rel=1e-10)


def test_verify_tree_spectral():
    rep = verify_projection(tree_spectral_kernel(3, (-1.0, 1.0)), 4)
    assert rep.passed
    assert rep.reproducing_residual < 1e-3


def test_non_hermitian_kernel_detected():
    B = bergman_kernel(0)
    bad = replace(B, complex_eval=lambda z, w: B.complex_eval(z, w) * np.exp(1j * np.real(z)))
    with pytest.raises(KernelImplementationError):
        verify_projection(bad, 1.0, COARSE)


def test_radial_cutoff():
    B = bergman_kernel(0)
    t = radial_cutoff(B, 1e-10)
    assert B.mass_beyond(t) <= 1e-10 * B.koo
    assert B.mass_beyond(t - 0.01) > 1e-10 * B.koo
