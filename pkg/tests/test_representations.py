import numpy as np
import pytest

from rfock.kernels import TestField, covariance_matrix
from rfock.loops import Hoop, hoop_compose, hoop_inverse, unit_square
from rfock.measures import CylindricalMeasure, char_functional
from rfock.representations import (CylinderFunction, FockRepresentation, HaarRepresentation,
                                   Holonomy, Translation, apply_haar_translation,
                                   apply_holonomy, basis_states, fock_matrix_element,
                                   generator_commutator_check, weyl_check)

FAM = [unit_square(origin=(0, 0, 0)), unit_square(origin=(0.4, 0.3, 0.5)),
       unit_square(origin=(3, 0, 0))]
LAM = TestField(((0.4, unit_square(origin=(0.2, 0.1, 0.3)), 0.4),
                 (-0.3, unit_square(origin=(2.5, 0.4, -0.2)), 0.5)))
LAM2 = TestField.single(unit_square(origin=(0.6, -0.2, 0.1)), 0.35, 0.5)


@pytest.fixture(scope="module")
def fock():
    return CylindricalMeasure.gaussian(covariance_matrix(FAM, 0.5))


@pytest.fixture(scope="module")
def rep(fock):
    return FockRepresentation(fock, 1e-12)


def random_state(rng, n=3):
    psi = CylinderFunction()
    for _ in range(n):
        c = rng.integers(-2, 3, size=len(FAM))
        h = Hoop.identity()
        for k, f in zip(c, FAM):
            h = h.compose(f.power(int(k)))
        psi = psi + complex(*rng.standard_normal(2)) * CylinderFunction.character(h)
    return psi


def test_apply_holonomy_examples():
    a, psi = FAM[0], CylinderFunction.character(FAM[1], 2.0)
    assert apply_holonomy(psi, Hoop.identity()) == psi
    assert apply_holonomy(CylinderFunction.one(), a) == CylinderFunction.character(a)
    assert apply_holonomy(apply_holonomy(psi, a), hoop_inverse(a)) == psi


def test_holonomy_algebra_on_labels(rng):
    psi = random_state(rng)
    a, b = FAM[0], FAM[2]
    assert apply_holonomy(apply_holonomy(psi, b), a) == apply_holonomy(psi, hoop_compose(a, b))


def test_haar_translation_is_phase(rng):
    psi = random_state(rng)
    assert apply_haar_translation(psi, TestField()) == psi
    out = apply_haar_translation(psi, LAM)
    for h, c in psi.terms.items():
        assert abs(out.terms[h]) == pytest.approx(abs(c), rel=1e-14)


def test_empty_word_normalization(rep):
    one = CylinderFunction.one()
    assert rep.matrix_element(one, [], one).value == pytest.approx(1.0, abs=1e-15)


def test_holonomy_expectation_is_char_functional(rep, fock):
    one = CylinderFunction.one()
    val = rep.matrix_element(one, [Holonomy(FAM[0])], one).value
    assert val == pytest.approx(char_functional(fock, FAM[0]), abs=1e-15)
    assert val == pytest.approx(np.exp(-0.5 * fock.sigma[0, 0]), abs=1e-15)


def test_translation_matrix_element_mc_agrees(rep):
    psi = CylinderFunction.character(FAM[1])
    me = rep.matrix_element(psi, [Translation(LAM)], psi, mc_draws=100_000, seed=4)
    assert abs(me.mc_value - me.value) < 3 * me.mc_stderr
    assert me.wrap_estimate < 1e-10
    ref = fock_matrix_element(psi, [Translation(LAM)], psi, FockRepresentation(rep.m).m)
    assert ref.value == pytest.approx(me.value, abs=1e-8)


def test_mixed_word_mc_agrees(rep):
    f = CylinderFunction.character(FAM[0]) + 0.5j * CylinderFunction.character(FAM[2])
    g = CylinderFunction.one() + CylinderFunction.character(FAM[0])
    ops = [Holonomy(FAM[1]), Translation(LAM), Holonomy(FAM[0])]
    me = rep.matrix_element(g, ops, f, mc_draws=100_000, seed=8)
    assert abs(me.mc_value - me.value) < 3 * me.mc_stderr + 1e-12


def test_unitarity(rep, rng):
    for _ in range(3):
        f, g = random_state(rng), random_state(rng)
        lhs = rep.matrix_element(f, [Translation(-LAM), Translation(LAM)], g).value
        assert lhs == pytest.approx(rep.inner(f, g), abs=1e-8)
        vf = rep._apply_terms([Translation(LAM)], rep._terms(f))
        vg = rep._apply_terms([Translation(LAM)], rep._terms(g))
        assert rep._inner_terms(vf, vg) == pytest.approx(rep.inner(f, g), abs=1e-8)


def test_translations_commute(rep, rng):
    f, g = random_state(rng), random_state(rng)
    a = rep.matrix_element(g, [Translation(LAM), Translation(LAM2)], f).value
    b = rep.matrix_element(g, [Translation(LAM2), Translation(LAM)], f).value
    c = rep.matrix_element(g, [Translation(LAM + LAM2)], f).value
    assert abs(a - b) < 1e-8 and abs(a - c) < 1e-8


def test_characters_orthonormal_in_haar():
    rep = HaarRepresentation()
    a, b = CylinderFunction.character(FAM[0]), CylinderFunction.character(FAM[1])
    assert rep.matrix_element(a, [], a).value == 1
    assert rep.matrix_element(a, [], b).value == 0


def test_weyl_trivial_cases(fock):
    assert weyl_check(FAM[0], TestField(), fock) == 0.0
    assert weyl_check(Hoop.identity(), LAM, fock) < 1e-14


@pytest.mark.parametrize("haar", [False, True])
def test_weyl_relation(fock, haar):
    m = CylindricalMeasure.haar(FAM) if haar else fock
    for alpha in (FAM[0], hoop_compose(FAM[1], FAM[2].inverse())):
        assert weyl_check(alpha, LAM, m) < 1e-8


def test_weyl_phase_matters(rep, fock):
    # with the wrong phase the identity fails, so the check is not vacuous
    one = CylinderFunction.one()
    V, Pi = Translation(LAM), Holonomy(FAM[0])
    bra = CylinderFunction.character(FAM[0])
    lhs = rep.matrix_element(bra, [V, Pi], one).value
    rhs = rep.matrix_element(bra, [Pi, V], one).value
    c = rep.weyl_phase(FAM[0], LAM)
    assert abs(c) > 0.05
    assert abs(lhs - np.exp(1j * c) * rhs) < 1e-10
    assert abs(lhs - rhs) > 1e-3


@pytest.mark.parametrize("haar", [False, True])
def test_generator_second_order(fock, haar):
    m = CylindricalMeasure.haar(FAM) if haar else fock
    e1 = generator_commutator_check(FAM[0], LAM, m, 1e-3)
    e2 = generator_commutator_check(FAM[0], LAM, m, 5e-4)
    assert e1 < 1e-5
    assert 3.0 < e1 / e2 < 5.0
    assert generator_commutator_check(FAM[0], TestField(), m) == 0.0


def test_generator_rejects_bad_step(fock):
    with pytest.raises(ValueError):
        generator_commutator_check(FAM[0], LAM, fock, 0.0)


def test_haar_and_fock_phases_differ(rep):
    haar = HaarRepresentation()
    c_fock = rep.weyl_phase(FAM[0], LAM)
    c_haar = haar.weyl_phase(FAM[0], LAM)
    assert abs(c_fock - c_haar) > 0.01 * max(abs(c_fock), abs(c_haar))


def test_basis_states():
    st = basis_states(FAM, 5)
    assert len(st) == 5
    assert st[0] == CylinderFunction.one()
