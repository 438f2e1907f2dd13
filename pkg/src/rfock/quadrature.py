"""Adaptive tensor Gauss-Legendre quadrature for double line integrals.

Computes ``sum_ij w_i w_j (d_i . d_j) int_0^1 int_0^1 K(|x_i(s) - y_j(t)|) ds dt``
over all segment pairs of two polylines, with ``K`` a radial kernel.
Every cell is compared against its four children; accepted cells keep the
refined value. Cells are processed level by level in vectorized batches.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import QuadratureNonConvergence

DEFAULT_ORDER = 10
MAX_DEPTH = 20
_CHUNK = 4096


@lru_cache(maxsize=None)
def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _cell_values(kernel, a0, da, b0, db, s0, t0, h, order):
    """Tensor GL estimate on cells ``[s0, s0+h] x [t0, t0+h]`` (unscaled by factor)."""
    x, w = gauss_legendre_01(order)
    ww = np.outer(w, w).ravel()
    out = np.empty(len(s0))
    for lo in range(0, len(s0), _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        s = s0[sl, None] + h[sl, None] * x  # (c, p)
        t = t0[sl, None] + h[sl, None] * x
        P = a0[sl, None, :] + s[:, :, None] * da[sl, None, :]  # (c, p, 3)
        Q = b0[sl, None, :] + t[:, :, None] * db[sl, None, :]
        diff = P[:, :, None, :] - Q[:, None, :, :]
        u = np.sqrt(np.einsum("cijk,cijk->cij", diff, diff))
        vals = kernel(u).reshape(len(s[:, 0]), -1)
        out[sl] = (vals @ ww) * h[sl] ** 2
    return out


def double_line_integral(
    segs_a: tuple[np.ndarray, np.ndarray, np.ndarray],
    segs_b: tuple[np.ndarray, np.ndarray, np.ndarray],
    kernel: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-8,
    order: int = DEFAULT_ORDER,
    max_depth: int = MAX_DEPTH,
) -> tuple[float, float]:
    """Adaptive double line integral of a radial kernel.

    Parameters
    ----------
    segs_a, segs_b : (starts, ends, weights)
        As returned by :meth:`Hoop.weighted_segments`.
    kernel : callable
        Vectorized ``K(u)`` for ``u >= 0``.
    tol : float
        Target absolute error for the whole sum.

    Returns
    -------
    value, error_estimate : float
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    a_s, a_e, a_w = segs_a
    b_s, b_e, b_w = segs_b
    if len(a_w) == 0 or len(b_w) == 0:
        return 0.0, 0.0
    da_all = a_e - a_s
    db_all = b_e - b_s
    I, J = np.meshgrid(np.arange(len(a_w)), np.arange(len(b_w)), indexing="ij")
    I, J = I.ravel(), J.ravel()
    factor = a_w[I] * b_w[J] * np.einsum("ij,ij->i", da_all[I], db_all[J])
    keep = factor != 0.0
    I, J, factor = I[keep], J[keep], factor[keep]
    if len(factor) == 0:
        return 0.0, 0.0
    tol_pair = tol / (len(factor) * np.abs(factor))

    pair = np.arange(len(factor))
    s0 = np.zeros(len(pair))
    t0 = np.zeros(len(pair))
    h = np.ones(len(pair))

    def evaluate(p, s, t, hh):
        return _cell_values(kernel, a_s[I[p]], da_all[I[p]], b_s[J[p]], db_all[J[p]],
                            s, t, hh, order)

    coarse = evaluate(pair, s0, t0, h)
    total = np.zeros(len(factor))
    err = 0.0
    for _depth in range(max_depth + 1):
        half = 0.5 * h
        cp = np.repeat(pair, 4)
        cs = np.repeat(s0, 4) + np.tile([0.0, 1.0, 0.0, 1.0], len(pair)) * np.repeat(half, 4)
        ct = np.repeat(t0, 4) + np.tile([0.0, 0.0, 1.0, 1.0], len(pair)) * np.repeat(half, 4)
        ch = np.repeat(half, 4)
        child = evaluate(cp, cs, ct, ch)
        fine = child.reshape(-1, 4).sum(axis=1)
        delta = np.abs(fine - coarse)
        ok = delta <= tol_pair[pair] * h * h
        np.add.at(total, pair[ok], fine[ok])
        err += float(np.sum(delta[ok] * np.abs(factor[pair[ok]])))
        if ok.all():
            return float(np.dot(total, factor)), err
        bad = np.repeat(~ok, 4)
        pair, s0, t0, h, coarse = cp[bad], cs[bad], ct[bad], ch[bad], child[bad]
    raise QuadratureNonConvergence(
        f"{len(pair)} cells unresolved after depth {max_depth} (tol={tol:g})"
    )


def gauss_legendre_segment_integral(a, b, func, n_sub: int = 64, order: int = 20):
    """Composite GL integral of ``func(y) * dy`` along the segment ``a -> b``.

    ``func`` maps ``(N, 3)`` points to ``(N, ...)`` values; returns
    ``sum over nodes of func(y) * w`` outer the segment vector.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = gauss_legendre_01(order)
    edges = np.linspace(0.0, 1.0, n_sub + 1)
    s = (edges[:-1, None] + np.diff(edges)[:, None] * x).ravel()
    ws = (np.diff(edges)[:, None] * w).ravel()
    y = a + s[:, None] * (b - a)
    vals = func(y)
    integral = np.tensordot(ws, vals, axes=(0, 0))
    return np.multiply.outer(integral, b - a)
