"""Cylindrical marginals of the Haar measure and the r-Fock measures.

On a family of ``n`` hoops the Haar marginal is uniform on the torus
``U(1)^n`` and the r-Fock marginal is a wrapped Gaussian whose covariance
comes from :func:`rfock.kernels.covariance_matrix`.

Random numbers come from Philox (counter-based). Draws are generated in
fixed blocks of ``BLOCK`` draws; block ``b`` uses key ``seed`` and counter
``(0, 0, 0, b)``. A draw therefore depends only on ``(seed, draw index)``,
never on how blocks are spread over threads.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (CholeskyFailure, DimensionMismatch, FamilyNotDecorrelated,
                     HoopNotInFamilySpan, SingularCovariance)
from .kernels import PSD_RTOL, CovarianceModel, TestField, shift_vector
from .loops import Hoop

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
BLOCK = 4096
DECORRELATION_LIMIT = 0.05


def wrap_angle(theta):
    """Map angles to ``[0, 2 pi)``."""
    return np.mod(theta, TWO_PI)


def wrap_centered(theta):
    """Map angles to ``[-pi, pi)``."""
    return np.mod(np.asarray(theta) + np.pi, TWO_PI) - np.pi


def family_coordinates(family: Sequence[Hoop], h: Hoop) -> np.ndarray:
    """Integer vector ``c`` with ``h = prod_i family[i]^{c_i}``.

    Raises
    ------
    HoopNotInFamilySpan
        If no integer combination of the family reproduces ``h``. Only
        combinations found through a maximal independent sub-family are
        tried, which is exhaustive when the family is independent.
    """
    keys = sorted({lp.key for g in (*family, h) for lp, _ in g.terms})
    index = {k: i for i, k in enumerate(keys)}
    M = np.zeros((len(keys), len(family)))
    for j, g in enumerate(family):
        for lp, w in g.terms:
            M[index[lp.key], j] = w
    v = np.zeros(len(keys))
    for lp, w in h.terms:
        v[index[lp.key]] = w
    if not v.any():
        return np.zeros(len(family), dtype=int)

    def attempt(cols):
        c, *_ = np.linalg.lstsq(M[:, cols], v, rcond=None)
        ci = np.rint(c)
        if np.array_equal(M[:, cols] @ ci, v):
            out = np.zeros(len(family), dtype=int)
            out[cols] = ci.astype(int)
            return out
        return None

    if len(keys):
        found = attempt(list(range(len(family))))
        if found is not None:
            return found
        cols: list[int] = []
        for j in range(len(family)):
            if np.linalg.matrix_rank(M[:, cols + [j]]) > len(cols):
                cols.append(j)
        found = attempt(cols)
        if found is not None:
            return found
    raise HoopNotInFamilySpan(f"{h!r} is not an integer combination of the family")


@dataclass(frozen=True, eq=False)
class CylindricalMeasure:
    """Marginal of a measure on generalized connections over a hoop family."""

    kind: str
    family: tuple[Hoop, ...]
    mean: np.ndarray | None = None
    cov: CovarianceModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", tuple(self.family))
        if self.kind not in ("haar", "gaussian"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.cov is None:
                raise ValueError("gaussian measure needs a covariance model")
            mean = np.zeros(len(self.family)) if self.mean is None else np.array(self.mean, float)
            if not (len(mean) == len(self.family) == self.cov.n):
                raise DimensionMismatch("mean, family and covariance sizes differ")
            mean.setflags(write=False)
            object.__setattr__(self, "mean", mean)

    def __eq__(self, other):
        if not isinstance(other, CylindricalMeasure):
            return NotImplemented
        if self.kind != other.kind or self.family != other.family:
            return False
        return self.is_haar or (np.array_equal(self.mean, other.mean) and self.cov == other.cov)

    __hash__ = object.__hash__

    @classmethod
    def haar(cls, family: Sequence[Hoop]) -> "CylindricalMeasure":
        return cls("haar", tuple(family))

    @classmethod
    def gaussian(cls, cov: CovarianceModel, mean=None) -> "CylindricalMeasure":
        return cls("gaussian", cov.family, mean, cov)

    @property
    def is_haar(self) -> bool:
        return self.kind == "haar"

    @property
    def n(self) -> int:
        return len(self.family)

    @property
    def sigma(self) -> np.ndarray:
        if self.cov is None:
            raise TypeError("Haar measure has no covariance")
        return self.cov.sigma

    def with_mean(self, mean) -> "CylindricalMeasure":
        return CylindricalMeasure("gaussian", self.family, mean, self.cov)


@dataclass(frozen=True)
class CylSample:
    angles: np.ndarray  # (draws, n), radians in [0, 2 pi)
    draws: int
    seed: int


def char_functional(m: CylindricalMeasure, h: Hoop) -> complex:
    """Integral of the holonomy character of ``h`` against ``m``."""
    c = family_coordinates(m.family, h)
    if m.is_haar:
        return complex(1.0) if h.is_identity() or not c.any() else complex(0.0)
    return complex(np.exp(1j * (c @ m.mean) - 0.5 * c @ m.sigma @ c))


def char_functional_vec(m: CylindricalMeasure, c) -> np.ndarray:
    """Characteristic function at integer vectors ``c`` of shape ``(..., n)``."""
    c = np.asarray(c, dtype=float)
    if m.is_haar:
        return np.where(np.any(c != 0, axis=-1), 0.0, 1.0).astype(complex)
    quad = np.einsum("...i,ij,...j->...", c, m.sigma, c)
    return np.exp(1j * (c @ m.mean) - 0.5 * quad)


def covariance_root(sigma: np.ndarray) -> np.ndarray:
    """``L`` with ``L L^T = sigma``; eigenvalue-clamped when not positive definite."""
    sigma = np.asarray(sigma, dtype=float)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
    trace = max(float(np.trace(sigma)), 0.0)
    if vals.min() < -PSD_RTOL * trace:
        raise CholeskyFailure(f"covariance has eigenvalue {vals.min():.3e}")
    return vecs * np.sqrt(np.maximum(vals, 0.0))


def _block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, block]))


def _blocks(draws: int):
    return [(b, min(BLOCK, draws - b * BLOCK)) for b in range(-(-draws // BLOCK))]


def sample(m: CylindricalMeasure, draws: int, seed: int = 0, threads: int | None = None,
           wrap: bool = True) -> CylSample:
    """Draw angle vectors from ``m``.

    With ``wrap=False`` Gaussian draws are returned as real lifts (not reduced
    modulo 2 pi); Haar draws are always in ``[0, 2 pi)``.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    n = m.n
    root = None if m.is_haar else covariance_root(m.sigma)

    def run(block):
        b, size = block
        g = _block_generator(seed, b)
        if m.is_haar:
            return g.uniform(0.0, TWO_PI, size=(size, n))
        z = g.standard_normal((size, n))
        return m.mean + z @ root.T

    blocks = _blocks(draws)
    workers = threads or os.cpu_count() or 1
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    angles = np.concatenate(parts)
    if wrap or m.is_haar:
        angles = wrap_angle(angles)
    return CylSample(angles, draws, seed)


def pushforward_translate(m: CylindricalMeasure, lam: TestField, tol: float | None = None,
                          shift=None) -> CylindricalMeasure:
    """Translate ``m`` by the smeared action of the test field ``lam``.

    Each angle is shifted by the pairing of ``lam`` with the corresponding
    smeared form factor; the covariance is unchanged. Haar is invariant.
    """
    if m.is_haar:
        log.info("Haar measure is translation invariant; returned unchanged")
        return m
    if shift is None:
        shift = shift_vector(lam, m.family, m.cov.r, m.cov.conv, tol or m.cov.tol)
    return m.with_mean(m.mean + np.asarray(shift, dtype=float))


def translate_by_angles(m: CylindricalMeasure, delta) -> CylindricalMeasure:
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (m.n,):
        raise DimensionMismatch(f"expected {m.n} angles, got shape {delta.shape}")
    if m.is_haar:
        return m
    return m.with_mean(wrap_angle(m.mean + delta))


def _precision(sigma: np.ndarray) -> tuple[np.ndarray, float]:
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise SingularCovariance("covariance is not positive definite") from None
    if np.min(np.diag(L)) <= 1e-12 * np.sqrt(max(np.max(np.diag(sigma)), 1e-300)):
        raise SingularCovariance("covariance is numerically singular")
    inv_L = np.linalg.inv(L)
    return inv_L.T @ inv_L, 2.0 * float(np.sum(np.log(np.diag(L))))


def wrapped_logpdf(points, mean, sigma, terms: int = 3) -> np.ndarray:
    """Log density of a wrapped Gaussian on the torus.

    The lattice sum keeps the zero shift and the per-coordinate shifts
    ``j e_i`` for ``1 <= |j| <= terms`` around the nearest image of the mean.
    Shifts in two or more coordinates at once are dropped; their relative
    weight at the mean is below ``exp(-4 pi^2 / lambda_max)``.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    P, logdet = _precision(sigma)
    d = wrap_centered(points - mean)
    g = d @ P
    q0 = np.einsum("ij,ij->i", g, d)
    j = np.concatenate([np.arange(-terms, 0), np.arange(1, terms + 1)]).astype(float)
    # q(d + 2 pi j e_i) = q0 + 4 pi j g_i + 4 pi^2 j^2 P_ii
    q = (q0[:, None, None] + 2.0 * TWO_PI * j[None, None, :] * g[:, :, None]
         + TWO_PI**2 * j[None, None, :] ** 2 * np.diag(P)[None, :, None])
    expo = np.concatenate([-0.5 * q0[:, None], -0.5 * q.reshape(len(d), -1)], axis=1)
    return logsumexp(expo, axis=1) - 0.5 * (n * np.log(TWO_PI) + logdet)


def truncation_estimate(sigma, terms: int = 3) -> float:
    """Relative weight of the dropped lattice terms at the mean."""
    lam_max = float(np.linalg.eigvalsh(sigma).max())
    n = len(sigma)
    return (0.5 * n * (n - 1) * np.exp(-2.0 * TWO_PI**2 / (2.0 * lam_max))
            + 2.0 * n * np.exp(-(TWO_PI * (terms + 1)) ** 2 / (2.0 * lam_max)))


def rn_density(m: CylindricalMeasure, lam: TestField | None, points, terms: int = 3,
               shift=None, tol: float | None = None) -> np.ndarray:
    """Radon-Nikodym derivative of the translated marginal w.r.t. ``m``.

    Ratio of wrapped Gaussian densities with means ``mean + shift`` and
    ``mean``, evaluated at ``points`` (shape ``(N, n)`` or ``(n,)``).
    ``shift`` defaults to the angle shifts induced by ``lam``.
    """
    if m.is_haar:
        raise TypeError("rn_density needs a Gaussian measure")
    if shift is None:
        if lam is None or lam.is_empty():
            shift = np.zeros(m.n)
        else:
            shift = shift_vector(lam, m.family, m.cov.r, m.cov.conv, tol or m.cov.tol)
    shift = np.asarray(shift, dtype=float)
    if shift.shape != (m.n,):
        raise DimensionMismatch("shift length must equal family size")
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    if not shift.any():
        _precision(m.sigma)
        out = np.ones(1 if single else len(pts))
    else:
        out = np.exp(wrapped_logpdf(pts, m.mean + shift, m.sigma, terms)
                     - wrapped_logpdf(pts, m.mean, m.sigma, terms))
    return float(out[0]) if single else out


def decorrelation_residual(sigma) -> float:
    """Largest absolute off-diagonal correlation."""
    sigma = np.asarray(sigma, dtype=float)
    if len(sigma) < 2:
        return 0.0
    d = np.sqrt(np.diag(sigma))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = sigma / np.outer(d, d)
    corr = np.nan_to_num(corr)
    np.fill_diagonal(corr, 0.0)
    return float(np.abs(corr).max())


def wrapped_normal_haar_affinity(var: float, n_grid: int = 4096) -> float:
    """Hellinger affinity between a 1D wrapped normal and the uniform law."""
    if var <= 0:
        return 0.0
    s = np.sqrt(var)
    if s < 0.2:
        # wrapping negligible: int sqrt(N(0, s^2)) / sqrt(2 pi)
        return float(np.sqrt(2.0 * s) * (2.0 * np.pi) ** 0.25 / np.sqrt(TWO_PI))
    th = np.arange(n_grid) * TWO_PI / n_grid - np.pi
    k = np.arange(-12, 13)
    dens = np.exp(-0.5 * ((th[:, None] + TWO_PI * k) / s) ** 2).sum(axis=1) / (s * np.sqrt(TWO_PI))
    return float(np.sum(np.sqrt(dens / TWO_PI)) * TWO_PI / n_grid)


def hellinger_affinity(a: CylindricalMeasure, b: CylindricalMeasure,
                       return_residual: bool = False):
    """Hellinger affinity ``int sqrt(dP dQ)`` of two marginals on one family.

    Gaussian pairs use the closed form on the unwrapped Gaussians. A
    Gaussian against Haar is a product of one-dimensional wrapped-normal
    affinities and requires near-independent coordinates.

    Raises
    ------
    FamilyNotDecorrelated
        Gaussian-vs-Haar on a family with an off-diagonal correlation of at
        least 0.05.
    """
    if a.family != b.family:
        raise DimensionMismatch("measures live on different families")
    residual = 0.0
    if a.is_haar and b.is_haar:
        val = 1.0
    elif not a.is_haar and not b.is_haar:
        Sa, Sb = a.sigma, b.sigma
        if np.array_equal(Sa, Sb) and np.array_equal(a.mean, b.mean):
            val = 1.0
        else:
            Sm = 0.5 * (Sa + Sb)
            _, la = _precision(Sa)
            _, lb = _precision(Sb)
            Pm, lm = _precision(Sm)
            dm = b.mean - a.mean
            val = float(np.exp(0.25 * la + 0.25 * lb - 0.5 * lm - 0.125 * dm @ Pm @ dm))
    else:
        g = b if a.is_haar else a
        residual = decorrelation_residual(g.sigma)
        if residual >= DECORRELATION_LIMIT:
            raise FamilyNotDecorrelated(
                f"max off-diagonal correlation {residual:.3g} >= {DECORRELATION_LIMIT}")
        val = float(np.prod([wrapped_normal_haar_affinity(v) for v in np.diag(g.sigma)]))
    return (val, residual) if return_residual else val
