import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rfock.errors import DegenerateLoop
from rfock.loops import (EuclideanTransform, Hoop, apply_euclidean, fourier_form_factor,
                         hoop_compose, hoop_inverse, make_loop, random_hoop, unit_square)
from rfock.quadrature import gauss_legendre_segment_integral

SQUARE = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]


def test_make_loop_canonical_square():
    lp = make_loop(SQUARE)
    assert lp.vertices.shape == (4, 3)
    assert lp.orientation == 1
    np.testing.assert_array_equal(lp.vertices, np.array(SQUARE, dtype=float))


def test_collinear_midpoint_removed():
    with_mid = [(0, 0, 0), (0.5, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
    assert make_loop(with_mid) == make_loop(SQUARE)


def test_rotation_of_vertex_list_is_same_loop():
    assert make_loop(SQUARE[2:] + SQUARE[:2]) == make_loop(SQUARE)


def test_reversed_loop_has_opposite_orientation():
    a, b = make_loop(SQUARE), make_loop(SQUARE[::-1])
    assert a.key == b.key
    assert a.orientation == -b.orientation
    assert Hoop.from_loop(SQUARE[::-1]) == hoop_inverse(unit_square())


@pytest.mark.parametrize("verts", [
    [(0, 0, 0), (1, 0, 0), (2, 0, 0)],
    [(0, 0, 0), (1, 1, 1)],
    [(0, 0, 0), (0, 0, 0), (0, 0, 0), (1, 0, 0)],
])
def test_degenerate_loops_rejected(verts):
    with pytest.raises(DegenerateLoop):
        make_loop(verts)


def test_group_laws(square):
    e = Hoop.identity()
    assert hoop_compose(square, e) == square
    assert hoop_compose(square, hoop_inverse(square)).is_identity()
    twice = hoop_compose(square, square)
    assert twice.terms == ((make_loop(SQUARE), 2),)
    assert square.power(3).inverse() == square.power(-3)


def test_composition_is_abelian(rng):
    a, b = random_hoop(rng), random_hoop(rng)
    assert hoop_compose(a, b) == hoop_compose(b, a)
    assert hash(hoop_compose(a, b)) == hash(hoop_compose(b, a))


def test_euclidean_identity_and_translation(square):
    I = EuclideanTransform(np.eye(3), np.zeros(3))
    assert apply_euclidean(I, square) == square
    moved = apply_euclidean(EuclideanTransform.from_translation([1, 0, 0]), square)
    expected = np.array(SQUARE, dtype=float) + [1, 0, 0]
    np.testing.assert_allclose(moved.terms[0][0].vertices, expected)


def test_euclidean_inverse_roundtrip(rng):
    h = random_hoop(rng)
    T = EuclideanTransform.random(rng, 5.0)
    assert apply_euclidean(T.inverse(), apply_euclidean(T, h)) == h
    S = EuclideanTransform.random(rng, 5.0)
    x = rng.standard_normal((4, 3))
    np.testing.assert_allclose(T.compose(S)(x), T(S(x)), atol=1e-12)


def test_improper_rotation_rejected():
    with pytest.raises(ValueError):
        EuclideanTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_form_factor_trivial_cases(rng, square):
    k = rng.standard_normal(3)
    np.testing.assert_array_equal(fourier_form_factor(Hoop.identity(), k), 0)
    np.testing.assert_allclose(fourier_form_factor(square, np.zeros(3)), 0, atol=1e-15)


def _ff_quadrature(h, k):
    total = np.zeros(3, dtype=complex)
    for lp, w in h.terms:
        starts, ends = lp.segments
        for a, b in zip(starts, ends):
            total += w * gauss_legendre_segment_integral(
                a, b, lambda y: np.exp(1j * y @ k))
    return total


@pytest.mark.parametrize("k", [(0, 0, 1), (2.5, -1.0, 0.3), (7.0, 4.0, -3.0)])
def test_form_factor_matches_line_quadrature(square, k):
    k = np.array(k, dtype=float)
    np.testing.assert_allclose(fourier_form_factor(square, k), _ff_quadrature(square, k),
                               atol=1e-10)


def test_form_factor_random_hoops_vectorized(rng):
    h = random_hoop(rng)
    ks = 3.0 * rng.standard_normal((5, 3))
    batch = fourier_form_factor(h, ks)
    for k, val in zip(ks, batch):
        np.testing.assert_allclose(val, _ff_quadrature(h, k), atol=1e-10)


def test_form_factor_is_transverse(rng):
    h = random_hoop(rng)
    ks = rng.standard_normal((10, 3)) * 4
    dots = np.einsum("ij,ij->i", fourier_form_factor(h, ks), ks)
    assert np.max(np.abs(dots)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_form_factor_additive_under_composition(seed):
    r = np.random.default_rng(seed)
    a, b = random_hoop(r), random_hoop(r)
    k = r.standard_normal(3) * 3
    np.testing.assert_allclose(fourier_form_factor(hoop_compose(a, b), k),
                               fourier_form_factor(a, k) + fourier_form_factor(b, k),
                               atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_translation_multiplies_form_factor_by_phase(seed):
    r = np.random.default_rng(seed)
    h = random_hoop(r)
    d, k = r.standard_normal(3), r.standard_normal(3) * 2
    moved = apply_euclidean(EuclideanTransform.from_translation(d), h)
    np.testing.assert_allclose(fourier_form_factor(moved, k),
                               np.exp(1j * k @ d) * fourier_form_factor(h, k), atol=1e-12)
