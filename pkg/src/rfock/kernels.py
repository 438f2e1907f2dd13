"""Covariance and shift pairings of smeared hoop form factors.

Fourier convention: ``g^(k) = int g(x) e^{-ik.x} d^3x``, inverse with
``(2 pi)^{-3}``; ``(-Laplacian)^{-1/2}`` divides by ``|k|``. Closed-loop form
factors are transverse, so no projector is applied.

Two scalar radial kernels carry everything:

* ``kappa_cov(u, r)`` is the position-space kernel of
  ``mollifier_hat(k)^2 / |k|``. Its closed form is
  ``D(u / 2r) / (pi^2 u r)`` with ``D`` the Dawson integral.
* ``eta_shift(u, t)`` is the kernel of the plain L2 pairing of two
  Gaussian-smeared currents, a Gaussian of variance ``t = r^2 + s^2``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import dawsn

from .errors import NegativeDistance, NotPositiveSemidefinite
from .formfactor import Mollifier
from .loops import EuclideanTransform, Hoop, apply_euclidean, fourier_form_factor
from .quadrature import double_line_integral, gauss_legendre_01

DEFAULT_TOL = 1e-8
PSD_RTOL = 1e-10


def kappa_cov(u, r: float, conv=Mollifier.PAPER):
    """Position-space kernel of ``mollifier_hat(k)^2 / |k|``.

    ``PAPER`` convention: ``D(u/2r) / (pi^2 u r)``, tending to ``1/(2 pi^2 r^2)``
    at ``u = 0`` and to ``1/(pi^2 u^2)`` at large ``u``. The unit-normalized
    mollifier gives half of this.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise NegativeDistance("kernel distance must be >= 0")
    if not r > 0:
        raise ValueError("r must be positive")
    x = u / (2.0 * r)
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    x2 = np.where(small, x * x, 0.0)
    series = (1.0 - x2 * (2.0 / 3.0 - x2 * (4.0 / 15.0 - x2 * 8.0 / 105.0))) / (
        2.0 * np.pi**2 * r * r)
    closed = dawsn(xs) / (2.0 * np.pi**2 * r * r * xs)
    out = np.where(small, series, closed)
    if Mollifier.parse(conv) is Mollifier.UNIT:
        out = 0.5 * out
    return out if out.ndim else float(out)


def eta_shift(u, t: float, conv=Mollifier.PAPER, sides: int = 2):
    """Gaussian kernel of the L2 pairing of two smeared currents.

    ``sides`` is the number of mollifier factors in the pairing: 2 when both
    currents are smeared (combined variance ``t = r^2 + s^2``), 1 when one of
    them is a bare line current (``t = s^2``). Under ``PAPER`` each
    mollifier carries an extra sqrt(2).
    """
    u = np.asarray(u, dtype=float)
    if not t > 0:
        raise ValueError("t must be positive")
    amp = Mollifier.parse(conv).amplitude ** sides
    out = amp * (2.0 * np.pi * t) ** -1.5 * np.exp(-u * u / (2.0 * t))
    return out if out.ndim else float(out)


def pair_covariance(a: Hoop, b: Hoop, r: float, conv=Mollifier.PAPER,
                    tol: float = DEFAULT_TOL, return_error: bool = False):
    """Half the ``(-Laplacian)^{-1/2}`` pairing of two smeared form factors.

    Raises :class:`QuadratureNonConvergence` if the adaptive rule fails.
    """
    conv = Mollifier.parse(conv)
    val, err = double_line_integral(
        a.weighted_segments(), b.weighted_segments(),
        lambda u: kappa_cov(u, r, conv), tol=2.0 * tol)
    if return_error:
        return 0.5 * val, 0.5 * err
    return 0.5 * val


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    family: tuple[Hoop, ...]
    r: float
    conv: Mollifier
    sigma: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        s = np.array(self.sigma, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "family", tuple(self.family))

    def __eq__(self, other):
        if not isinstance(other, CovarianceModel):
            return NotImplemented
        return (self.family == other.family and self.r == other.r and self.conv is other.conv
                and np.array_equal(self.sigma, other.sigma))

    __hash__ = object.__hash__

    @property
    def n(self) -> int:
        return len(self.family)


def _check_psd(sigma: np.ndarray) -> np.ndarray:
    sigma = 0.5 * (sigma + sigma.T)
    trace = float(np.trace(sigma))
    if trace <= 0.0:
        return sigma
    vals, vecs = np.linalg.eigh(sigma)
    if vals.min() < -PSD_RTOL * trace:
        raise NotPositiveSemidefinite(
            f"smallest eigenvalue {vals.min():.3e} below -{PSD_RTOL:g} * trace; "
            "tighten the quadrature tolerance")
    if vals.min() < 0:
        vals = np.maximum(vals, 0.0)
        sigma = (vecs * vals) @ vecs.T
        sigma = 0.5 * (sigma + sigma.T)
    return sigma


def covariance_matrix(family: Sequence[Hoop], r: float, conv=Mollifier.PAPER,
                      tol: float = DEFAULT_TOL, threads: int | None = None) -> CovarianceModel:
    """Assemble the covariance of the angles on a hoop family.

    Pairs are independent quadratures; the result does not depend on
    ``threads``.
    """
    family = tuple(family)
    if not family:
        raise ValueError("family must be non-empty")
    conv = Mollifier.parse(conv)
    n = len(family)
    idx = [(i, j) for i in range(n) for j in range(i, n)]

    def job(ij):
        i, j = ij
        return pair_covariance(family[i], family[j], r, conv, tol)

    workers = threads or os.cpu_count() or 1
    if workers > 1 and len(idx) > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(job, idx))
    else:
        vals = [job(ij) for ij in idx]
    sigma = np.zeros((n, n))
    for (i, j), v in zip(idx, vals):
        sigma[i, j] = sigma[j, i] = v
    return CovarianceModel(family, r, conv, _check_psd(sigma), tol)


def translated_covariance(base: Hoop, n: int, step, r: float, conv=Mollifier.PAPER,
                          tol: float = DEFAULT_TOL) -> CovarianceModel:
    """Covariance of ``base`` translated by ``j * step``, ``j = 0..n-1``.

    Uses translation invariance: entry ``(i, j)`` only depends on ``j - i``,
    so ``n`` quadratures replace ``n (n + 1) / 2``.
    """
    conv = Mollifier.parse(conv)
    step = np.asarray(step, dtype=float)
    family = tuple(apply_euclidean(EuclideanTransform.from_translation(j * step), base)
                   for j in range(n))
    lags = [pair_covariance(base, family[j], r, conv, tol) for j in range(n)]
    i, j = np.indices((n, n))
    sigma = np.asarray(lags)[np.abs(i - j)]
    return CovarianceModel(family, r, conv, _check_psd(sigma), tol)


@dataclass(frozen=True)
class TestField:
    """Finite combination ``sum_j w_j X_{beta_j, s_j}`` of smeared form factors."""

    __test__ = False  # not a pytest class

    terms: tuple[tuple[float, Hoop, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple((float(w), h, float(s)) for w, h, s in self.terms)
        for _, _, s in terms:
            if not s > 0:
                raise ValueError("test field scales must be positive")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, hoop: Hoop, scale: float, weight: float = 1.0) -> "TestField":
        return cls(((weight, hoop, scale),))

    def is_empty(self) -> bool:
        return all(w == 0.0 or h.is_identity() for w, h, _ in self.terms)

    def scaled(self, c: float) -> "TestField":
        return TestField(tuple((c * w, h, s) for w, h, s in self.terms))

    def __add__(self, other: "TestField") -> "TestField":
        return TestField(self.terms + other.terms)

    def __neg__(self) -> "TestField":
        return self.scaled(-1.0)

    def transformed(self, T: EuclideanTransform) -> "TestField":
        return TestField(tuple((w, apply_euclidean(T, h), s) for w, h, s in self.terms))


def shift_coefficient(lam: TestField, h: Hoop, r: float, conv=Mollifier.PAPER,
                      tol: float = DEFAULT_TOL) -> float:
    """``int lam . X_{h,r} d^3x``, the angle shift of hoop ``h`` under ``lam``.

    ``r = 0`` gives the bare line integral of ``lam`` around ``h``.
    """
    if lam.is_empty() or h.is_identity():
        return 0.0
    conv = Mollifier.parse(conv)
    if r < 0:
        raise ValueError("r must be >= 0")
    sides = 2 if r > 0 else 1
    live = [(w, beta, s) for w, beta, s in lam.terms if w != 0.0 and not beta.is_identity()]
    total = 0.0
    segs_h = h.weighted_segments()
    for w, beta, s in live:
        t = s * s + r * r
        val, _ = double_line_integral(
            beta.weighted_segments(), segs_h,
            lambda u, t=t: eta_shift(u, t, conv, sides), tol=tol / (len(live) * abs(w)))
        total += w * val
    return float(total)


def line_pairing(lam: TestField, h: Hoop, conv=Mollifier.PAPER, tol: float = DEFAULT_TOL) -> float:
    """Line integral of the test field around ``h`` (the unsmeared pairing)."""
    return shift_coefficient(lam, h, 0.0, conv, tol)


def shift_vector(lam: TestField, family: Sequence[Hoop], r: float, conv=Mollifier.PAPER,
                 tol: float = DEFAULT_TOL) -> np.ndarray:
    return np.array([shift_coefficient(lam, h, r, conv, tol) for h in family])


# ---------------------------------------------------------------------------
# momentum-space oracle


def _sphere_rule(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Upper-hemisphere product rule (GL in cos theta, trapezoid in phi)."""
    c, wc = gauss_legendre_01(n_theta)  # cos theta in [0, 1]
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - c * c)
    dirs = np.stack([
        np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
        np.outer(c, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    w = np.outer(wc, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
    return dirs, w


def _diameter(*hoops: Hoop) -> float:
    pts = [lp.vertices for h in hoops for lp, _ in h.terms]
    if not pts:
        return 0.0
    p = np.concatenate(pts)
    return float(np.linalg.norm(p.max(axis=0) - p.min(axis=0)))


def _momentum_integral(a: Hoop, b: Hoop, radial, k_max: float, n_radial: int,
                       n_theta: int, n_phi: int) -> float:
    """``(2 pi)^{-3} int radial(|k|) Re[conj(Xa(k)) . Xb(k)] d^3k``.

    The integrand is even in ``k``, so the upper hemisphere is doubled.
    """
    kr, wr = gauss_legendre_01(n_radial)
    kr, wr = kr * k_max, wr * k_max
    dirs, wd = _sphere_rule(n_theta, n_phi)
    rad_w = wr * kr * kr * radial(kr)
    same = a == b
    total = 0.0
    chunk = max(1, 400_000 // len(dirs))
    for lo in range(0, n_radial, chunk):
        k = kr[lo:lo + chunk, None, None] * dirs[None]
        Xa = fourier_form_factor(a, k)
        Xb = Xa if same else fourier_form_factor(b, k)
        dot = np.einsum("rdj,rdj->rd", Xa.conj(), Xb).real
        total += float(rad_w[lo:lo + chunk] @ (dot @ wd))
    return 2.0 * total / (2.0 * np.pi) ** 3


def _grid_sizes(k_max: float, diam: float, fineness: float) -> tuple[int, int, int]:
    band = k_max * (diam + 0.5)
    n_radial = int(np.ceil(fineness * (40 + 1.2 * band)))
    n_theta = int(np.ceil(fineness * (24 + 0.8 * band)))
    n_phi = 2 * n_theta + 8
    return n_radial, n_theta, n_phi


def _oracle(a, b, radial, k_max, fineness, error_estimate):
    if a.is_identity() or b.is_identity():
        return (0.0, 0.0) if error_estimate else 0.0
    diam = _diameter(a, b)
    val = _momentum_integral(a, b, radial, k_max, *_grid_sizes(k_max, diam, fineness))
    if not error_estimate:
        return val
    coarse = _momentum_integral(a, b, radial, k_max, *_grid_sizes(k_max, diam, 0.7 * fineness))
    return val, abs(val - coarse)


def momentum_oracle_covariance(a: Hoop, b: Hoop, r: float, conv=Mollifier.PAPER,
                               fineness: float = 1.0, error_estimate: bool = True):
    """Brute-force covariance by product quadrature over momentum space.

    Independent of :func:`kappa_cov`: uses only the Fourier form factors.
    Returns ``(value, error_estimate)`` unless ``error_estimate=False``.
    Slow; meant for validation.
    """
    amp2 = Mollifier.parse(conv).amplitude ** 2
    k_max = np.sqrt(42.0) / r
    radial = lambda k: 0.5 * amp2 * np.exp(-(r * k) ** 2) / k  # noqa: E731
    return _oracle(a, b, radial, k_max, fineness, error_estimate)


def momentum_oracle_shift(lam: TestField, h: Hoop, r: float, conv=Mollifier.PAPER,
                          fineness: float = 1.0) -> float:
    """Brute-force :func:`shift_coefficient` in momentum space (``r = 0`` allowed)."""
    conv = Mollifier.parse(conv)
    sides = 2 if r > 0 else 1
    amp = conv.amplitude ** sides
    total = 0.0
    for w, beta, s in lam.terms:
        t = s * s + r * r
        k_max = np.sqrt(84.0 / t)
        radial = lambda k, t=t: amp * np.exp(-0.5 * t * k * k)  # noqa: E731
        total += w * _oracle(beta, h, radial, k_max, fineness, False)
    return total
