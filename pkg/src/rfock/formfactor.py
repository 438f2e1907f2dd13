"""Gaussian mollifier and point evaluation of smeared hoop form factors."""

from __future__ import annotations

import enum

import numpy as np
from scipy.special import erf, erfc

from .loops import Hoop


class Mollifier(enum.Enum):
    """Normalization of the Gaussian mollifier.

    ``PAPER`` is ``exp(-x^2/2r^2) / (2 pi^{3/2} r^3)``, whose integral over
    R^3 is sqrt(2). ``UNIT`` divides that by sqrt(2) so it integrates to 1.
    """

    PAPER = "paper"
    UNIT = "unit"

    @classmethod
    def parse(cls, value) -> "Mollifier":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())

    @property
    def amplitude(self) -> float:
        """Fourier transform of the mollifier at k = 0."""
        return np.sqrt(2.0) if self is Mollifier.PAPER else 1.0


def _check_r(r):
    if not r > 0:
        raise ValueError(f"smearing scale must be positive, got {r}")


def mollifier(x, r: float, conv=Mollifier.PAPER):
    x = np.asarray(x, dtype=float)
    _check_r(r)
    conv = Mollifier.parse(conv)
    r2 = np.sum(x * x, axis=-1)
    norm = 1.0 / (2.0 * np.pi**1.5 * r**3)
    if conv is Mollifier.UNIT:
        norm /= np.sqrt(2.0)
    return norm * np.exp(-r2 / (2.0 * r * r))


def mollifier_hat(k, r: float, conv=Mollifier.PAPER):
    """Fourier transform of :func:`mollifier` (``int f e^{-ik.x} d^3x``)."""
    k = np.asarray(k, dtype=float)
    k2 = np.sum(k * k, axis=-1)
    return Mollifier.parse(conv).amplitude * np.exp(-0.5 * r * r * k2)


def _erf_diff(hi, lo):
    """erf(hi) - erf(lo) without cancellation in the tails."""
    out = erf(hi) - erf(lo)
    pos = lo > 0
    neg = hi < 0
    out = np.where(pos, erfc(lo) - erfc(hi), out)
    out = np.where(neg, erfc(-hi) - erfc(-lo), out)
    return out


def smeared_form_factor(h: Hoop, r: float, x, conv=Mollifier.PAPER) -> np.ndarray:
    """Evaluate the smeared form factor of ``h`` at points ``x``.

    Each straight segment contributes its unit direction times a transverse
    Gaussian in the distance to the segment line and an erf difference along
    the segment axis.

    Parameters
    ----------
    h : Hoop
    r : float
        Smearing scale, > 0.
    x : array_like, shape (..., 3)
    conv : Mollifier or {"paper", "unit"}

    Returns
    -------
    np.ndarray, shape (..., 3)
    """
    _check_r(r)
    x = np.asarray(x, dtype=float)
    a, b, w = h.weighted_segments()
    out = np.zeros(x.shape[:-1] + (3,))
    if len(w) == 0:
        return out
    conv = Mollifier.parse(conv)
    d = b - a
    L = np.linalg.norm(d, axis=1)
    u = d / L[:, None]
    rel = x[..., None, :] - a  # (..., m, 3)
    tau = np.einsum("...mj,mj->...m", rel, u)
    perp2 = np.maximum(np.einsum("...mj,...mj->...m", rel, rel) - tau * tau, 0.0)
    s = np.sqrt(2.0) * r
    axial = r * np.sqrt(np.pi / 2.0) * _erf_diff((L - tau) / s, -tau / s)
    norm = 1.0 / (2.0 * np.pi**1.5 * r**3)
    if conv is Mollifier.UNIT:
        norm /= np.sqrt(2.0)
    amp = norm * np.exp(-perp2 / (2.0 * r * r)) * axial * w
    return amp @ u


def divergence_residual(h: Hoop, r: float, x, step: float, conv=Mollifier.PAPER) -> float:
    """Central-difference divergence of the smeared form factor at ``x``."""
    if not step > 0:
        raise ValueError("step must be positive")
    if h.is_identity():
        return 0.0
    x = np.asarray(x, dtype=float)
    E = np.eye(3) * step
    pts = np.concatenate([x + E, x - E])
    f = smeared_form_factor(h, r, pts, conv)
    return float(sum(f[i, i] - f[i + 3, i] for i in range(3)) / (2.0 * step))
