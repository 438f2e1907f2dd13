"""Desk-scale experiments on mutual singularity, ergodicity and invariance.

All experiments use families of Euclidean translates of one base hoop.
Correlations between translates are small but not zero; every table carries
the measured off-diagonal correlation so the near-independence assumption
can be checked.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .formfactor import Mollifier
from .kernels import DEFAULT_TOL, pair_covariance, translated_covariance
from .loops import EuclideanTransform, Hoop, apply_euclidean
from .measures import (CylindricalMeasure, CylSample, decorrelation_residual,
                       hellinger_affinity, sample, wrapped_logpdf)


@dataclass(frozen=True)
class ExperimentConfig:
    base_hoop: Hoop
    r_values: tuple[float, ...]
    family_size_max: int = 50
    separation: float = 20.0
    draws: int = 1000
    seed: int = 0
    conv: Mollifier = Mollifier.PAPER
    tol: float = DEFAULT_TOL
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.separation > 0:
            raise ValueError("separation must be positive")
        if self.family_size_max < 2:
            raise ValueError("family_size_max must be >= 2")
        object.__setattr__(self, "r_values", tuple(float(r) for r in self.r_values))
        object.__setattr__(self, "conv", Mollifier.parse(self.conv))


def _unit(direction) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    return d / np.linalg.norm(d)


def make_translated_family(base: Hoop, n: int, spacing: float,
                           direction=(1.0, 0.0, 0.0)) -> list[Hoop]:
    """``base`` translated by ``j * spacing * direction`` for ``j = 0..n-1``."""
    if n < 1 or not spacing > 0:
        raise ValueError("need n >= 1 and spacing > 0")
    step = spacing * _unit(direction)
    return [apply_euclidean(EuclideanTransform.from_translation(j * step), base)
            for j in range(n)]


def translated_measure(base: Hoop, n: int, spacing: float, r: float | None,
                       conv=Mollifier.PAPER, tol: float = DEFAULT_TOL,
                       direction=(1.0, 0.0, 0.0)) -> CylindricalMeasure:
    """Centered r-Fock marginal (or Haar when ``r`` is None) on a translated family."""
    if r is None:
        return CylindricalMeasure.haar(make_translated_family(base, n, spacing, direction))
    cov = translated_covariance(base, n, spacing * _unit(direction), r, conv, tol)
    return CylindricalMeasure.gaussian(cov)


@dataclass
class DecayTable:
    rows: list[tuple[int, float, float]] = field(default_factory=list)
    label: str = ""

    @property
    def n(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def affinity(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def first_below(self, threshold: float) -> int | None:
        for n, a, _ in self.rows:
            if a < threshold:
                return n
        return None

    def predicted_crossing(self, threshold: float = 0.01) -> int:
        """``ceil(ln threshold / ln A(1))`` from the single-hoop affinity."""
        a1 = self.rows[0][1]
        if a1 >= 1.0:
            raise ValueError("single-hoop affinity is 1; measures do not separate")
        return math.ceil(math.log(threshold) / math.log(a1))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "affinity", "decorrelation_residual"])
            for n, a, res in self.rows:
                w.writerow([n, repr(a), repr(res)])


def hellinger_decay(cfg: ExperimentConfig, r: float, r_prime: float | None) -> DecayTable:
    """Affinity between two marginals on growing translated families.

    ``r_prime=None`` compares the r-Fock marginal with Haar (product branch).
    """
    if r_prime is not None and r == r_prime:
        raise ValueError("r and r_prime must differ")
    N = cfg.family_size_max
    step = cfg.separation * _unit(cfg.direction)
    ca = translated_covariance(cfg.base_hoop, N, step, r, cfg.conv, cfg.tol)
    cb = None if r_prime is None else translated_covariance(
        cfg.base_hoop, N, step, r_prime, cfg.conv, cfg.tol)
    table = DecayTable(label=f"r={r} vs {'haar' if r_prime is None else f'r={r_prime}'}")
    for n in range(1, N + 1):
        fam = ca.family[:n]
        sa = ca.sigma[:n, :n]
        ma = CylindricalMeasure.gaussian(type(ca)(fam, r, cfg.conv, sa, cfg.tol))
        if cb is None:
            mb = CylindricalMeasure.haar(fam)
        else:
            mb = CylindricalMeasure.gaussian(type(cb)(fam, r_prime, cfg.conv,
                                                      cb.sigma[:n, :n], cfg.tol))
        aff = hellinger_affinity(ma, mb)
        res = max(decorrelation_residual(sa),
                  0.0 if cb is None else decorrelation_residual(cb.sigma[:n, :n]))
        table.rows.append((n, aff, res))
    return table


def ergodic_average(m: CylindricalMeasure, base: Hoop, n: int, spacing: float, draws: int,
                    seed: int = 0, direction=(1.0, 0.0, 0.0),
                    tol: float | None = None) -> tuple[complex, float]:
    """Across-draw mean and spread of ``(1/n) sum_j exp(i theta_j)`` over translates.

    ``m`` selects the law: Haar, or the centered r-Fock marginal at
    ``m.cov.r`` with ``m``'s mollifier convention. The mean concentrates at
    the characteristic functional of ``base``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if m.is_haar:
        fm = translated_measure(base, n, spacing, None, direction=direction)
    else:
        fm = translated_measure(base, n, spacing, m.cov.r, m.cov.conv,
                                tol or m.cov.tol, direction)
    theta = sample(fm, draws, seed).angles
    z = np.exp(1j * theta).mean(axis=1)
    mean = complex(z.mean())
    spread = float(np.sqrt(np.mean(np.abs(z - mean) ** 2)))
    return mean, spread


@dataclass
class Classification:
    labels: np.ndarray  # -1 marks a tie
    loglik: np.ndarray  # (draws, candidates)
    error_rate: float | None = None

    @property
    def ambiguous(self) -> int:
        return int(np.sum(self.labels < 0))


def log_likelihoods(angles: np.ndarray, candidates: Sequence[CylindricalMeasure],
                    terms: int = 3) -> np.ndarray:
    angles = np.atleast_2d(angles)
    n = angles.shape[1]
    cols = []
    for m in candidates:
        if m.n != n:
            raise ValueError("candidate family size does not match the sample")
        if m.is_haar:
            cols.append(np.full(len(angles), -n * np.log(2.0 * np.pi)))
        else:
            cols.append(wrapped_logpdf(angles, m.mean, m.sigma, terms))
    return np.stack(cols, axis=1)


def classify_samples(smp: CylSample | np.ndarray, candidates: Sequence[CylindricalMeasure],
                     truth: int | Sequence[int] | None = None, terms: int = 3) -> Classification:
    """Maximum-likelihood labels of each draw among candidate marginals.

    Ties are labelled -1 and count as half an error when ``truth`` is given.
    """
    angles = smp.angles if isinstance(smp, CylSample) else np.asarray(smp)
    ll = log_likelihoods(angles, candidates, terms)
    best = ll.max(axis=1)
    winners = ll == best[:, None]
    labels = np.where(winners.sum(axis=1) > 1, -1, ll.argmax(axis=1))
    err = None
    if truth is not None:
        t = np.broadcast_to(np.asarray(truth), labels.shape)
        err = float(np.mean(np.where(labels < 0, 0.5, (labels != t).astype(float))))
    return Classification(labels, ll, err)


def classification_experiment(ma: CylindricalMeasure, mb: CylindricalMeasure, draws: int,
                              seed: int = 0, terms: int = 3) -> tuple[float, float]:
    """Error rate classifying ``draws`` samples from each of two marginals.

    Returns ``(error_rate, affinity_bound)``; the Bayes error under equal
    priors never exceeds the Hellinger affinity.
    """
    sa = sample(ma, draws, seed).angles
    sb = sample(mb, draws, seed + 1).angles
    ca = classify_samples(sa, [ma, mb], 0, terms)
    cb = classify_samples(sb, [ma, mb], 1, terms)
    try:
        bound = hellinger_affinity(ma, mb)
    except Exception:  # e.g. correlated family against Haar
        bound = float("nan")
    return 0.5 * (ca.error_rate + cb.error_rate), bound


def euclidean_invariance_report(h: Hoop, r: float, transforms: Sequence[EuclideanTransform],
                                conv=Mollifier.PAPER, tol: float = 1e-11) -> float:
    """Largest change of the self-covariance of ``h`` under rigid motions."""
    ref = pair_covariance(h, h, r, conv, tol)
    worst = 0.0
    for T in transforms:
        g = apply_euclidean(T, h)
        worst = max(worst, abs(pair_covariance(g, g, r, conv, tol) - ref))
    return worst
