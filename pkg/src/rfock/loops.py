"""Closed polyline loops in R^3, the abelian hoop group and Euclidean motions.

Loops are piecewise linear. Two loops are the same hoop element when their
canonical vertex lists agree; retracings and overlapping segments are not
reduced beyond removal of collinear and duplicate vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateLoop

# vertex keys are rounded to this many decimals for ordering and hashing
KEY_DECIMALS = 9
_DUP_TOL = 1e-12
_COLLINEAR_TOL = 1e-10


def _key(v: np.ndarray) -> tuple:
    return tuple(float(c) + 0.0 for c in np.round(v, KEY_DECIMALS))


def _reduce(verts: list) -> list:
    changed = True
    while changed and len(verts) >= 3:
        changed = False
        n = len(verts)
        for i in range(n):
            a, b = verts[i - 1], verts[i]
            if np.linalg.norm(b - a) <= _DUP_TOL * (1.0 + np.linalg.norm(a)):
                del verts[i]
                changed = True
                break
            c = verts[(i + 1) % n]
            u, w = b - a, c - b
            nu, nw = np.linalg.norm(u), np.linalg.norm(w)
            if nw <= _DUP_TOL * (1.0 + np.linalg.norm(b)):
                continue
            if np.linalg.norm(np.cross(u, w)) <= _COLLINEAR_TOL * nu * nw:
                # straight continuation or a spike; both are hoop-trivial
                del verts[i]
                changed = True
                break
    return verts


@dataclass(frozen=True, eq=False)
class Loop:
    """A canonical closed polyline.

    ``vertices`` start at the lexicographically smallest vertex and run in
    the direction whose second vertex precedes the last one. ``orientation``
    is +1 if that matches the traversal that was passed to :func:`make_loop`
    and -1 if the input ran the other way.
    """

    vertices: np.ndarray
    orientation: int = 1
    key: tuple = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "key", tuple(_key(p) for p in v))

    def __eq__(self, other):
        if not isinstance(other, Loop):
            return NotImplemented
        return self.key == other.key and self.orientation == other.orientation

    def __hash__(self):
        return hash((self.key, self.orientation))

    @property
    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points, each ``(m, 3)``, traversed with orientation."""
        v = self.vertices
        if self.orientation < 0:
            v = np.concatenate([v[:1], v[:0:-1]])
        return v, np.roll(v, -1, axis=0)

    def traversal(self) -> np.ndarray:
        """Vertices in the order the loop is actually traversed."""
        return self.segments[0]

    def normalized(self) -> "Loop":
        if self.orientation == 1:
            return self
        return Loop(self.vertices, 1)


def make_loop(vertices: Iterable[Sequence[float]]) -> Loop:
    """Canonicalize a closed polyline.

    Duplicate and collinear vertices are dropped, the list is rotated to
    start at the smallest vertex and flipped if needed so the second vertex
    is larger than the last (so the axis-aligned unit square
    ``(0,0,0),(1,0,0),(1,1,0),(0,1,0)`` is already canonical).

    Raises
    ------
    DegenerateLoop
        If fewer than three non-collinear vertices remain.
    """
    pts = np.asarray(list(vertices), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DegenerateLoop("vertices must be a list of 3-vectors")
    verts = _reduce([p for p in pts])
    if len(verts) < 3:
        raise DegenerateLoop("fewer than 3 distinct non-collinear vertices")
    keys = [_key(p) for p in verts]
    start = min(range(len(verts)), key=keys.__getitem__)
    verts = verts[start:] + verts[:start]
    keys = keys[start:] + keys[:start]
    orientation = 1
    if keys[1] < keys[-1]:
        verts = [verts[0]] + verts[:0:-1]
        orientation = -1
    return Loop(np.array(verts), orientation)


class Hoop:
    """Element of the abelian hoop group: integer combination of loops.

    Stored as canonical (orientation +1) loops with nonzero integer weights;
    the reversed loop is represented by a negated weight.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Loop, int] | Iterable[tuple[Loop, int]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple, list] = {}
        for loop, w in items:
            w = int(w) * loop.orientation
            base = loop.normalized()
            if base.key in acc:
                acc[base.key][1] += w
            else:
                acc[base.key] = [base, w]
        self._terms = tuple(
            (lp, w) for k, (lp, w) in sorted(acc.items()) if w != 0
        )
        self._hash = hash(tuple((lp.key, w) for lp, w in self._terms))

    @classmethod
    def from_loop(cls, loop: Loop | Iterable[Sequence[float]], weight: int = 1) -> "Hoop":
        if not isinstance(loop, Loop):
            loop = make_loop(loop)
        return cls([(loop, weight)])

    @classmethod
    def identity(cls) -> "Hoop":
        return cls()

    @property
    def terms(self) -> tuple[tuple[Loop, int], ...]:
        return self._terms

    def is_identity(self) -> bool:
        return not self._terms

    def compose(self, other: "Hoop") -> "Hoop":
        return Hoop(self._terms + other._terms)

    def inverse(self) -> "Hoop":
        return Hoop((lp, -w) for lp, w in self._terms)

    def power(self, k: int) -> "Hoop":
        return Hoop((lp, k * w) for lp, w in self._terms)

    __mul__ = compose

    def __invert__(self):
        return self.inverse()

    def __eq__(self, other):
        if not isinstance(other, Hoop):
            return NotImplemented
        return tuple((lp.key, w) for lp, w in self._terms) == tuple(
            (lp.key, w) for lp, w in other._terms
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{w}x{len(lp.vertices)}-gon@{lp.key[0]}" for lp, w in self._terms)
        return f"Hoop({inner})"

    def weighted_segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All segments as ``(starts, ends, weights)`` arrays."""
        if not self._terms:
            z = np.zeros((0, 3))
            return z, z, np.zeros(0)
        a, b, w = [], [], []
        for lp, wt in self._terms:
            s, e = lp.segments
            a.append(s)
            b.append(e)
            w.append(np.full(len(s), float(wt)))
        return np.concatenate(a), np.concatenate(b), np.concatenate(w)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.concatenate([lp.vertices for lp, _ in self._terms])
        return pts.min(axis=0), pts.max(axis=0)


def hoop_compose(a: Hoop, b: Hoop) -> Hoop:
    return a.compose(b)


def hoop_inverse(a: Hoop) -> Hoop:
    return a.inverse()


@dataclass(frozen=True)
class EuclideanTransform:
    """Proper rigid motion ``x -> R x + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-12, rtol=0):
            raise ValueError("rotation is not orthogonal")
        if np.linalg.det(R) < 0:
            raise ValueError("rotation has determinant -1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_translation(cls, t) -> "EuclideanTransform":
        return cls(np.eye(3), t)

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 1.0) -> "EuclideanTransform":
        from scipy.spatial.transform import Rotation

        R = Rotation.random(random_state=rng).as_matrix()
        # re-orthonormalize to beat the 1e-12 check on rounding
        u, _, vt = np.linalg.svd(R)
        return cls(u @ vt, scale * rng.standard_normal(3))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.rotation.T + self.translation

    def compose(self, other: "EuclideanTransform") -> "EuclideanTransform":
        """``self`` after ``other``."""
        return EuclideanTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "EuclideanTransform":
        Rt = self.rotation.T
        return EuclideanTransform(Rt, -Rt @ self.translation)


def apply_euclidean(T: EuclideanTransform, h: Hoop) -> Hoop:
    """Move every loop of ``h`` by ``T``; weights are unchanged."""
    return Hoop((make_loop(T(lp.traversal())), w) for lp, w in h.terms)


def fourier_form_factor(h: Hoop, k) -> np.ndarray:
    """Line integral of ``exp(i k.y) dy`` around ``h``.

    ``k`` may be a single 3-vector or an ``(..., 3)`` array; the result has
    the same leading shape with a trailing complex 3-vector.
    """
    k = np.asarray(k, dtype=float)
    a, b, w = h.weighted_segments()
    out_shape = k.shape[:-1] + (3,)
    if len(w) == 0:
        return np.zeros(out_shape, dtype=complex)
    d = b - a
    kd = k @ d.T  # (..., m)
    ka = k @ a.T
    # (e^{ix}-1)/(ix) = e^{ix/2} sinc(x/2), finite at x = 0
    g = np.exp(1j * (ka + 0.5 * kd)) * np.sinc(kd / (2.0 * np.pi))
    return (g * w) @ d


def translate_hoop(h: Hoop, shift) -> Hoop:
    return apply_euclidean(EuclideanTransform.from_translation(shift), h)


def unit_square(origin=(0.0, 0.0, 0.0), side: float = 1.0) -> Hoop:
    o = np.asarray(origin, dtype=float)
    sq = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float) * side
    return Hoop.from_loop(sq + o)


def random_polygon(rng: np.random.Generator, n_vertices: int, radius: float = 0.6,
                   center=None) -> Loop:
    """Random star-shaped non-planar polygon, for tests and experiments."""
    center = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    ang = np.sort(rng.uniform(0, 2 * np.pi, n_vertices))
    rad = radius * rng.uniform(0.5, 1.0, n_vertices)
    z = 0.3 * radius * rng.standard_normal(n_vertices)
    pts = np.stack([rad * np.cos(ang), rad * np.sin(ang), z], axis=1)
    from scipy.spatial.transform import Rotation

    R = Rotation.random(random_state=rng).as_matrix()
    return make_loop(pts @ R.T + center)


def random_hoop(rng: np.random.Generator, max_segments: int = 12) -> Hoop:
    """One or two random polygons with small integer weights."""
    n_loops = int(rng.integers(1, 3))
    budget = max_segments
    terms = []
    for i in range(n_loops):
        hi = min(budget - 3 * (n_loops - i - 1), 7)
        nv = int(rng.integers(3, hi + 1))
        budget -= nv
        lp = random_polygon(rng, nv, center=0.3 * rng.standard_normal(3))
        terms.append((lp, int(rng.choice([-2, -1, 1, 2])) if i else int(rng.choice([-1, 1]))))
    return Hoop(terms)
