"""Holonomy and translation operators on cylinder functions.

A cylinder function is a finite sum ``sum_h c_h Psi_h`` of holonomy
characters. Two representations are provided:

* :class:`HaarRepresentation` on ``L2(mu_0)``: characters are orthonormal
  and a test field acts by the phase of its line integral around each hoop.
* :class:`FockRepresentation` on ``L2(mu_r)`` restricted to a hoop family:
  a test field shifts the angles by its smeared pairings and multiplies by
  the square root of the Radon-Nikodym derivative.

In the r-Fock case every state reachable from characters by a word of
operators is a sum of terms ``K exp(w . theta)`` with complex ``w``, and
inner products are Gaussian moment generating functions. That gives closed
forms on the unwrapped Gaussian; a Monte Carlo route on wrapped samples
serves as a cross-check.

Sign convention: ``(V(lam) psi)(theta) = sqrt(rho(theta)) psi(theta + s)``
with ``rho`` the density of the marginal translated by ``-s`` relative to
the marginal. This is the unitary choice that reproduces
``V(lam) Pi(T_a) = exp(i a.s) Pi(T_a) V(lam)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .formfactor import Mollifier
from .kernels import DEFAULT_TOL, TestField, line_pairing, shift_coefficient, shift_vector
from .loops import Hoop
from .measures import (CylindricalMeasure, _precision, family_coordinates, sample,
                       truncation_estimate, wrapped_logpdf)


class CylinderFunction:
    """Finite linear combination of holonomy characters."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Hoop, complex] | Iterable[tuple[Hoop, complex]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Hoop, complex] = {}
        for h, c in items:
            acc[h] = acc.get(h, 0.0) + complex(c)
        self._terms = MappingProxyType({h: c for h, c in acc.items() if c != 0})

    @classmethod
    def character(cls, h: Hoop, coef: complex = 1.0) -> "CylinderFunction":
        return cls({h: coef})

    @classmethod
    def one(cls) -> "CylinderFunction":
        return cls.character(Hoop.identity())

    @property
    def terms(self) -> Mapping[Hoop, complex]:
        return self._terms

    def __add__(self, other: "CylinderFunction") -> "CylinderFunction":
        return CylinderFunction(list(self._terms.items()) + list(other._terms.items()))

    def __rmul__(self, c: complex) -> "CylinderFunction":
        return CylinderFunction({h: c * v for h, v in self._terms.items()})

    def __eq__(self, other):
        if not isinstance(other, CylinderFunction):
            return NotImplemented
        return dict(self._terms) == dict(other._terms)

    def __repr__(self):
        return f"CylinderFunction({dict(self._terms)!r})"


def apply_holonomy(psi: CylinderFunction, alpha: Hoop) -> CylinderFunction:
    """Multiply by the character of ``alpha``: labels ``h -> alpha h``."""
    return CylinderFunction({alpha.compose(h): c for h, c in psi.terms.items()})


def apply_haar_translation(psi: CylinderFunction, lam: TestField, conv=Mollifier.PAPER,
                           tol: float = DEFAULT_TOL) -> CylinderFunction:
    """Haar-representation translation: each ``Psi_h`` picks up ``exp(i oint_h lam)``."""
    return CylinderFunction({
        h: c * np.exp(1j * line_pairing(lam, h, conv, tol)) for h, c in psi.terms.items()})


@dataclass(frozen=True)
class Holonomy:
    hoop: Hoop


@dataclass(frozen=True)
class Translation:
    """``V(scale * lam)``."""

    lam: TestField
    scale: float = 1.0


Word = Sequence["Holonomy | Translation"]


@dataclass
class MatrixElement:
    value: complex
    mc_value: complex | None = None
    mc_stderr: float | None = None
    wrap_estimate: float = 0.0

    def __complex__(self):
        return complex(self.value)


class HaarRepresentation:
    """Holonomy algebra and translations on ``L2(mu_0)``."""

    def __init__(self, conv=Mollifier.PAPER, tol: float = DEFAULT_TOL):
        self.conv = Mollifier.parse(conv)
        self.tol = tol
        self._cache: dict = {}

    def _phase(self, lam: TestField, h: Hoop) -> float:
        key = (id(lam), h)
        if key not in self._cache:
            self._cache[key] = (lam, line_pairing(lam, h, self.conv, self.tol))
        return self._cache[key][1]

    def weyl_phase(self, alpha: Hoop, lam: TestField) -> float:
        return self._phase(lam, alpha)

    def apply(self, ops: Word, psi: CylinderFunction) -> CylinderFunction:
        for op in reversed(ops):
            if isinstance(op, Holonomy):
                psi = apply_holonomy(psi, op.hoop)
            else:
                psi = CylinderFunction({
                    h: c * np.exp(1j * op.scale * self._phase(op.lam, h))
                    for h, c in psi.terms.items()})
        return psi

    def matrix_element(self, bra: CylinderFunction, ops: Word, ket: CylinderFunction) -> MatrixElement:
        out = self.apply(ops, ket)
        val = sum(np.conj(c) * out.terms.get(h, 0.0) for h, c in bra.terms.items())
        return MatrixElement(complex(val))


class FockRepresentation:
    """Holonomies and translations on ``L2(mu_r)`` over a fixed hoop family."""

    def __init__(self, m: CylindricalMeasure, tol: float | None = None):
        if m.is_haar:
            raise TypeError("use HaarRepresentation for the Haar measure")
        self.m = m
        self.tol = tol if tol is not None else m.cov.tol
        self.P, _ = _precision(m.sigma)
        self._shifts: dict = {}
        self._coords: dict = {}

    def coords(self, h: Hoop) -> np.ndarray:
        if h not in self._coords:
            self._coords[h] = family_coordinates(self.m.family, h).astype(float)
        return self._coords[h]

    def shift(self, lam: TestField) -> np.ndarray:
        key = id(lam)
        if key not in self._shifts:
            self._shifts[key] = (lam, shift_vector(lam, self.m.family, self.m.cov.r,
                                                   self.m.cov.conv, self.tol))
        return self._shifts[key][1]

    def weyl_phase(self, alpha: Hoop, lam: TestField) -> float:
        """The smeared pairing, computed directly (not through the family)."""
        return shift_coefficient(lam, alpha, self.m.cov.r, self.m.cov.conv, self.tol)

    # closed form ---------------------------------------------------------

    def _terms(self, psi: CylinderFunction):
        return [(complex(c), 1j * self.coords(h)) for h, c in psi.terms.items()]

    def _apply_terms(self, ops: Word, terms):
        mean = self.m.mean
        for op in reversed(ops):
            if isinstance(op, Holonomy):
                a = 1j * self.coords(op.hoop)
                terms = [(c, w + a) for c, w in terms]
            else:
                s = op.scale * self.shift(op.lam)
                Ps = self.P @ s
                k = np.exp(0.5 * mean @ Ps - 0.25 * s @ Ps)
                terms = [(c * np.exp(w @ s) * k, w - 0.5 * Ps) for c, w in terms]
        return terms

    def _inner_terms(self, f, g) -> complex:
        mean, S = self.m.mean, self.m.sigma
        total = 0.0 + 0.0j
        for cf, wf in f:
            for cg, wg in g:
                z = np.conj(wf) + wg
                total += np.conj(cf) * cg * np.exp(z @ mean + 0.5 * z @ S @ z)
        return complex(total)

    def inner(self, f: CylinderFunction, g: CylinderFunction) -> complex:
        return self._inner_terms(self._terms(f), self._terms(g))

    # Monte Carlo ---------------------------------------------------------

    def _evaluate(self, ops: Word, ket: CylinderFunction, theta: np.ndarray, terms: int):
        if not ops:
            out = np.zeros(len(theta), dtype=complex)
            for h, c in ket.terms.items():
                out += c * np.exp(1j * theta @ self.coords(h))
            return out
        op, rest = ops[0], ops[1:]
        if isinstance(op, Holonomy):
            return np.exp(1j * theta @ self.coords(op.hoop)) * self._evaluate(rest, ket, theta, terms)
        s = op.scale * self.shift(op.lam)
        log_rho = (wrapped_logpdf(theta, self.m.mean - s, self.m.sigma, terms)
                   - wrapped_logpdf(theta, self.m.mean, self.m.sigma, terms))
        return np.exp(0.5 * log_rho) * self._evaluate(rest, ket, theta + s, terms)

    def matrix_element(self, bra: CylinderFunction, ops: Word, ket: CylinderFunction,
                       mc_draws: int = 0, seed: int = 0, terms: int = 3) -> MatrixElement:
        """``<bra, ops ket>`` in ``L2(mu_r)``; ``ops[0]`` acts last.

        With ``mc_draws > 0`` the value is also estimated from wrapped
        samples, using wrapped Radon-Nikodym densities.
        """
        value = self._inner_terms(self._terms(bra), self._apply_terms(ops, self._terms(ket)))
        out = MatrixElement(value, wrap_estimate=truncation_estimate(self.m.sigma, terms))
        if mc_draws:
            theta = sample(self.m, mc_draws, seed).angles
            vals = np.zeros(len(theta), dtype=complex)
            for h, c in bra.terms.items():
                vals += np.conj(c) * np.exp(-1j * theta @ self.coords(h))
            vals *= self._evaluate(list(ops), ket, theta, terms)
            out.mc_value = complex(vals.mean())
            out.mc_stderr = float(np.sqrt(vals.real.var() + vals.imag.var()) / np.sqrt(len(vals)))
        return out


def representation_for(m: CylindricalMeasure, tol: float = DEFAULT_TOL, conv=None):
    if m.is_haar:
        return HaarRepresentation(conv or Mollifier.PAPER, tol)
    return FockRepresentation(m, tol)


def fock_matrix_element(bra: CylinderFunction, ops: Word, ket: CylinderFunction,
                        m: CylindricalMeasure, mc_draws: int = 0, seed: int = 0,
                        tol: float | None = None) -> MatrixElement:
    return FockRepresentation(m, tol).matrix_element(bra, ops, ket, mc_draws, seed)


def basis_states(family: Sequence[Hoop], count: int = 5) -> list[CylinderFunction]:
    """``Psi_1`` followed by characters of family members (up to ``count``)."""
    states = [CylinderFunction.one()]
    for h in family:
        if len(states) >= count:
            break
        states.append(CylinderFunction.character(h))
    i = 0
    while len(states) < count and len(family) >= 2:
        states.append(CylinderFunction.character(family[i % len(family)].compose(
            family[(i + 1) % len(family)].inverse())))
        i += 1
    return states[:count]


def _check_pairs(family, alpha, states):
    kets = list(states) if states is not None else basis_states(family)
    # bras include alpha-images so that Pi(T_alpha) has nonzero elements
    bras = kets + [apply_holonomy(f, alpha) for f in kets]
    return [(g, f) for g in bras for f in kets]


def weyl_check(alpha: Hoop, lam: TestField, m: CylindricalMeasure,
               states: Sequence[CylinderFunction] | None = None,
               tol: float = 1e-12, conv=None) -> float:
    """Largest violation of ``V Pi = exp(i c) Pi V`` over pairs of states."""
    if lam.is_empty():
        return 0.0
    rep = representation_for(m, tol, conv)
    phase = np.exp(1j * rep.weyl_phase(alpha, lam))
    V, Pi = Translation(lam), Holonomy(alpha)
    worst = 0.0
    for g, f in _check_pairs(m.family, alpha, states):
        lhs = rep.matrix_element(g, [V, Pi], f).value
        rhs = rep.matrix_element(g, [Pi, V], f).value
        worst = max(worst, abs(lhs - phase * rhs))
    return worst


def generator_commutator_check(alpha: Hoop, lam: TestField, m: CylindricalMeasure,
                               h_step: float = 1e-3,
                               states: Sequence[CylinderFunction] | None = None,
                               tol: float = 1e-12, conv=None) -> float:
    """Finite-difference check of ``[dV(lam), Pi(T_a)] = c Pi(T_a)``.

    Differentiates ``<g, [V(t lam), Pi] f>`` at ``t = 0`` by central
    differences and compares ``(1/i) d/dt`` with ``c <g, Pi f>``. The error
    is ``O(h_step^2)``.
    """
    if not h_step > 0:
        raise ValueError("h_step must be positive")
    if lam.is_empty():
        return 0.0
    rep = representation_for(m, tol, conv)
    c = rep.weyl_phase(alpha, lam)
    Pi = Holonomy(alpha)

    def comm(g, f, t):
        V = Translation(lam, t)
        return (rep.matrix_element(g, [V, Pi], f).value
                - rep.matrix_element(g, [Pi, V], f).value)

    worst = 0.0
    for g, f in _check_pairs(m.family, alpha, states):
        fd = (comm(g, f, h_step) - comm(g, f, -h_step)) / (2.0 * h_step * 1j)
        target = c * rep.matrix_element(g, [Pi], f).value
        worst = max(worst, abs(fd - target))
    return worst
