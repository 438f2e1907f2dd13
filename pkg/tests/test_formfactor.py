import numpy as np
import pytest
from scipy import integrate

from rfock.formfactor import (Mollifier, divergence_residual, mollifier, mollifier_hat,
                              smeared_form_factor)
from rfock.loops import Hoop, hoop_compose, random_hoop
from rfock.quadrature import gauss_legendre_segment_integral


def test_mollifier_at_origin():
    assert mollifier(np.zeros(3), 1.0) == pytest.approx(1 / (2 * np.pi**1.5), rel=1e-15)
    assert mollifier(np.zeros(3), 1.0) == pytest.approx(0.0897936, abs=1e-7)


def _integral(conv, r=0.7):
    # radial reduction of a 3D integral, checked against a direct 3D rule below
    val, _ = integrate.quad(lambda p: 4 * np.pi * p * p * mollifier([p, 0, 0], r, conv),
                            0, np.inf, epsabs=1e-13)
    return val


def test_mollifier_total_mass():
    assert _integral(Mollifier.PAPER) == pytest.approx(np.sqrt(2.0), rel=1e-10)
    assert _integral(Mollifier.UNIT) == pytest.approx(1.0, rel=1e-10)


def test_mollifier_total_mass_3d_cube():
    r = 0.5
    L = 10 * r
    val, _ = integrate.tplquad(lambda z, y, x: mollifier([x, y, z], r),
                               -L, L, -L, L, -L, L, epsabs=1e-10, epsrel=1e-10)
    assert val == pytest.approx(1.4142136, abs=1e-7)


def test_mollifier_hat_matches_grid_transform():
    r = 0.6
    x = np.linspace(-8 * r, 8 * r, 81)
    dx = x[1] - x[0]
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    f = mollifier(np.stack([X, Y, Z], -1), r)
    for k in ([0, 0, 0], [1.0, 0.5, -0.3], [2.0, 1.0, 1.5]):
        ft = np.sum(f * np.exp(-1j * (k[0] * X + k[1] * Y + k[2] * Z))) * dx**3
        assert abs(ft - mollifier_hat(k, r)) < 1e-10


def test_bad_radius():
    with pytest.raises(ValueError):
        mollifier(np.zeros(3), 0.0)


def test_smeared_identity_is_zero(rng):
    x = rng.standard_normal((7, 3))
    np.testing.assert_array_equal(smeared_form_factor(Hoop.identity(), 0.5, x), 0)


def test_smeared_far_field_decay(square):
    assert np.linalg.norm(smeared_form_factor(square, 0.5, [10, 10, 10])) < 1e-40


def _smeared_quadrature(h, r, x, conv=Mollifier.PAPER):
    out = np.zeros(3)
    for lp, w in h.terms:
        starts, ends = lp.segments
        for a, b in zip(starts, ends):
            out += w * gauss_legendre_segment_integral(
                a, b, lambda y: mollifier(x - y, r, conv), n_sub=128)
    return out


@pytest.mark.parametrize("x", [(0.5, 0.5, 0.0), (0.1, 0.9, 0.2), (1.3, -0.2, -0.4)])
def test_smeared_matches_segment_quadrature(square, x):
    x = np.array(x, dtype=float)
    got = smeared_form_factor(square, 0.5, x)
    ref = _smeared_quadrature(square, 0.5, x)
    assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref) + 1e-14


def test_smeared_random_hoop_unit_convention(rng):
    h = random_hoop(rng)
    x = rng.standard_normal((4, 3)) * 0.5
    got = smeared_form_factor(h, 0.3, x, Mollifier.UNIT)
    for xi, g in zip(x, got):
        ref = _smeared_quadrature(h, 0.3, xi, Mollifier.UNIT)
        assert np.linalg.norm(g - ref) <= 1e-10 * max(np.linalg.norm(ref), 1.0)


def test_smeared_center_of_square_points_along_normal(square):
    v = smeared_form_factor(square, 0.5, [0.5, 0.5, 0.0])
    assert abs(v[0]) < 1e-15 and abs(v[1]) < 1e-15


def test_divergence_free(rng, square):
    assert divergence_residual(Hoop.identity(), 0.5, [0.1, 0.2, 0.3], 1e-4) == 0.0
    for _ in range(5):
        x = rng.uniform([0, 0, -0.5], [1, 1, 0.5])
        peak = np.linalg.norm(smeared_form_factor(square, 0.5, [0.0, 0.0, 0.0]))
        assert abs(divergence_residual(square, 0.5, x, 1e-4)) < 1e-6 * peak


def test_smeared_bilinearity(rng):
    for _ in range(20):
        a, b = random_hoop(rng), random_hoop(rng)
        x = rng.standard_normal((3, 3)) * 0.6
        lhs = smeared_form_factor(hoop_compose(a, b), 0.4, x)
        rhs = smeared_form_factor(a, 0.4, x) + smeared_form_factor(b, 0.4, x)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_spatial_transform_matches_momentum_form(square):
    # grid Fourier transform of the smeared field vs mollifier_hat * conj(X^)
    from rfock.loops import fourier_form_factor

    r = 0.4
    x = np.linspace(-2.0, 3.0, 61)
    dx = x[1] - x[0]
    X, Y, Z = np.meshgrid(x, x, np.linspace(-2.5, 2.5, 61), indexing="ij")
    pts = np.stack([X, Y, Z], -1).reshape(-1, 3)
    field = smeared_form_factor(square, r, pts)
    dz = 5.0 / 60
    for k in (np.array([1.0, 0.5, 0.2]), np.array([-2.0, 0.0, 1.0])):
        ft = (field * np.exp(-1j * pts @ k)[:, None]).sum(0) * dx * dx * dz
        ref = mollifier_hat(k, r) * np.conj(fourier_form_factor(square, k))
        assert np.max(np.abs(ft - ref)) < 1e-4
