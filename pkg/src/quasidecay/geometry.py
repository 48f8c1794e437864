"""Points, balls, hyperplanes, separated nets and the 4r-covering selection.

Every scalar-carrying object is tagged ``exact`` (``Fraction`` entries) or
float.  Operations refuse to mix the two; use :meth:`Point.to_float` or
:meth:`Point.to_exact` to convert explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .exact import exact_sqrt, to_fraction

EUCLIDEAN = "euclidean"
SUP = "sup"


class TrackMismatchError(TypeError):
    """Raised when exact and floating values meet without a conversion."""


class DimensionMismatchError(ValueError):
    pass


def _check_track(*objs) -> bool:
    tracks = {o.exact for o in objs}
    if len(tracks) > 1:
        raise TrackMismatchError("exact and float operands mixed; convert explicitly")
    return tracks.pop()


def _scalar(x, exact: bool):
    return to_fraction(x) if exact else float(x)


@dataclass(frozen=True)
class Point:
    coords: tuple
    exact: bool = False

    def __post_init__(self):
        if len(self.coords) < 1:
            raise ValueError("points need dimension >= 1")
        conv = tuple(_scalar(c, self.exact) for c in self.coords)
        object.__setattr__(self, "coords", conv)

    @classmethod
    def of(cls, *coords, exact: bool | None = None) -> "Point":
        """Build a point; exact iff every coordinate is an int/Fraction/str."""
        if len(coords) == 1 and isinstance(coords[0], (tuple, list, np.ndarray)):
            coords = tuple(coords[0])
        if exact is None:
            exact = all(isinstance(c, (int, Fraction, str)) for c in coords)
        return cls(tuple(coords), exact)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def to_float(self) -> "Point":
        return Point(tuple(float(c) for c in self.coords), False)

    def to_exact(self) -> "Point":
        return Point(tuple(to_fraction(c) for c in self.coords), True)

    def as_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]


def _diff(a: Point, b: Point):
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimensions {a.dim} and {b.dim}")
    _check_track(a, b)
    return [x - y for x, y in zip(a.coords, b.coords)]


def dist_sq(a: Point, b: Point):
    return sum(d * d for d in _diff(a, b))


def sup_dist(a: Point, b: Point):
    return max(abs(d) for d in _diff(a, b))


@dataclass(frozen=True)
class Ball:
    center: Point
    radius: object
    norm: str = EUCLIDEAN

    def __post_init__(self):
        r = _scalar(self.radius, self.center.exact)
        if not r > 0:
            raise ValueError("ball radius must be positive")
        if self.norm not in (EUCLIDEAN, SUP):
            raise ValueError(f"unknown norm {self.norm!r}")
        object.__setattr__(self, "radius", r)

    @property
    def exact(self) -> bool:
        return self.center.exact

    @property
    def dim(self) -> int:
        return self.center.dim

    def contains(self, y: Point) -> bool:
        if self.norm == SUP:
            return sup_dist(self.center, y) <= self.radius
        return dist_sq(self.center, y) <= self.radius * self.radius

    def scaled(self, factor) -> "Ball":
        return Ball(self.center, self.radius * _scalar(factor, self.exact), self.norm)

    def bounding_box(self) -> tuple[list, list]:
        c = self.center.coords
        return [x - self.radius for x in c], [x + self.radius for x in c]

    def to_float(self) -> "Ball":
        return Ball(self.center.to_float(), float(self.radius), self.norm)

    def contains_array(self, pts: np.ndarray) -> np.ndarray:
        """Vectorised float membership for an ``(n, d)`` array."""
        c = self.center.as_array()
        r = float(self.radius)
        diff = np.abs(np.asarray(pts, dtype=float).reshape(len(pts), -1) - c)
        if self.norm == SUP:
            return diff.max(axis=1) <= r
        return (diff * diff).sum(axis=1) <= r * r


@dataclass(frozen=True)
class Hyperplane:
    """The affine hyperplane ``{y : normal . y = offset}`` in canonical sign."""

    normal: tuple
    offset: object
    exact: bool = False

    def __post_init__(self):
        n = tuple(_scalar(x, self.exact) for x in self.normal)
        c = _scalar(self.offset, self.exact)
        lead = next((x for x in n if x != 0), None)
        if lead is None:
            raise ValueError("hyperplane normal must be nonzero")
        if lead < 0:
            n = tuple(-x for x in n)
            c = -c
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", c)

    @classmethod
    def of(cls, normal: Sequence, offset, exact: bool | None = None) -> "Hyperplane":
        if exact is None:
            exact = all(isinstance(x, (int, Fraction, str)) for x in list(normal) + [offset])
        return cls(tuple(normal), offset, exact)

    @classmethod
    def through(cls, point: Point, normal: Sequence) -> "Hyperplane":
        n = [_scalar(x, point.exact) for x in normal]
        return cls(tuple(n), sum(a * b for a, b in zip(n, point.coords)), point.exact)

    @property
    def dim(self) -> int:
        return len(self.normal)

    def normal_sq(self):
        return sum(x * x for x in self.normal)

    def same_plane(self, other: "Hyperplane") -> bool:
        """Projective equality: proportional (normal, offset)."""
        a = list(self.normal) + [self.offset]
        b = list(other.normal) + [other.offset]
        if self.exact and other.exact:
            i = next(k for k, x in enumerate(a) if x != 0)
            if b[i] == 0:
                return False
            s = a[i] / b[i]
            return all(x == s * y for x, y in zip(a, b))
        va, vb = np.array(a, float), np.array(b, float)
        va /= np.linalg.norm(va)
        vb /= np.linalg.norm(vb)
        return bool(min(np.abs(va - vb).max(), np.abs(va + vb).max()) < 1e-12)

    def to_float(self) -> "Hyperplane":
        return Hyperplane(tuple(float(x) for x in self.normal), float(self.offset), False)

    def signed_values(self, pts: np.ndarray) -> np.ndarray:
        """``(normal . y - offset) / |normal|`` for each row of ``pts``."""
        n = np.array([float(x) for x in self.normal])
        scale = math.sqrt(float(self.normal_sq()))
        return (np.asarray(pts, float).reshape(len(pts), -1) @ n - float(self.offset)) / scale


def _residual(y: Point, plane: Hyperplane):
    if y.dim != plane.dim:
        raise DimensionMismatchError(f"point dim {y.dim} vs plane dim {plane.dim}")
    if y.exact != plane.exact:
        raise TrackMismatchError("exact and float operands mixed; convert explicitly")
    return sum(a * b for a, b in zip(plane.normal, y.coords)) - plane.offset


def dist_sq_to_hyperplane(y: Point, plane: Hyperplane):
    """Squared Euclidean distance; an exact ``Fraction`` on the exact track."""
    r = _residual(y, plane)
    return r * r / plane.normal_sq()


def dist_to_hyperplane(y: Point, plane: Hyperplane):
    """Euclidean distance from ``y`` to ``plane``.

    On the exact track the result is a ``Fraction`` when the square root is
    rational (e.g. normal (3, 4)); otherwise it is the nearest float.
    """
    d2 = dist_sq_to_hyperplane(y, plane)
    if plane.exact:
        root = exact_sqrt(d2)
        return root if root is not None else math.sqrt(d2)
    return math.sqrt(d2)


def in_thickening(y: Point, plane: Hyperplane, eps, open_flag: bool = False) -> bool:
    e = _scalar(eps, plane.exact)
    if e < 0:
        raise ValueError("thickening radius must be non-negative")
    d2 = dist_sq_to_hyperplane(y, plane)
    return d2 < e * e if open_flag else d2 <= e * e


@dataclass(frozen=True)
class SupportDistance:
    """Result of :func:`sup_dist_on_support`; ``value`` is None when empty."""

    value: float | None
    hits: int
    draws: int

    @property
    def empty(self) -> bool:
        return self.hits == 0


def sup_dist_on_support(mu, plane: Hyperplane, ball: Ball, n: int, rng,
                        budget_factor: int = 200, chunk: int = 4096) -> SupportDistance:
    """Largest distance to ``plane`` among the first ``n`` samples of ``mu`` in ``ball``.

    Draws come in fixed-size chunks from ``rng``, so a larger ``n`` with the
    same seed sees a superset of samples and the result can only grow.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    fplane = plane.to_float()
    fball = ball.to_float()
    best, hits, draws = None, 0, 0
    budget = budget_factor * n
    while hits < n and draws < budget:
        pts = mu.sample(rng, chunk)
        draws += chunk
        inside = pts[fball.contains_array(pts)][: n - hits]
        if len(inside):
            m = float(np.abs(fplane.signed_values(inside)).max())
            best = m if best is None else max(best, m)
            hits += len(inside)
    return SupportDistance(best, hits, draws)


@dataclass(frozen=True)
class Net:
    points: tuple
    separation: object
    norm: str = EUCLIDEAN

    def __len__(self):
        return len(self.points)

    def pairwise_ok(self) -> bool:
        pts = list(self.points)
        for i in range(len(pts)):
            for j in range(i):
                if _norm_dist(pts[i], pts[j], self.norm, squared=True) < _sq(self.separation, self.norm):
                    return False
        return True


def _sq(r, norm):
    return r * r if norm == EUCLIDEAN else r


def _norm_dist(a: Point, b: Point, norm: str, squared: bool = False):
    if norm == SUP:
        return sup_dist(a, b)
    d2 = dist_sq(a, b)
    return d2 if squared else math.sqrt(d2)


def greedy_maximal_net(candidates: Iterable[Point], rho, norm: str = EUCLIDEAN) -> Net:
    """Scan candidates in order, keeping those at distance >= rho from all kept.

    Every rejected candidate lies within ``rho`` of a kept point, so the
    result is maximal relative to the pool.  A spatial hash keeps the scan
    near-linear for large float pools.
    """
    pts = list(candidates)
    if not pts:
        return Net((), rho, norm)
    exact = pts[0].exact
    r = _scalar(rho, exact)
    if not r > 0:
        raise ValueError("net separation must be positive")
    keep: list[Point] = []
    grid: dict[tuple, list[Point]] = {}
    cell = float(r)
    lim = _sq(r, norm)
    for p in pts:
        key = tuple(math.floor(float(c) / cell) for c in p.coords)
        ok = True
        for off in _neighbour_offsets(p.dim):
            for q in grid.get(tuple(k + o for k, o in zip(key, off)), ()):
                if _norm_dist(p, q, norm, squared=True) < lim:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            keep.append(p)
            grid.setdefault(key, []).append(p)
    return Net(tuple(keep), r, norm)


_OFFSETS: dict[int, list[tuple]] = {}


def _neighbour_offsets(d: int) -> list[tuple]:
    if d not in _OFFSETS:
        _OFFSETS[d] = [tuple(o) for o in np.ndindex(*(3,) * d)]
        _OFFSETS[d] = [tuple(x - 1 for x in o) for o in _OFFSETS[d]]
    return _OFFSETS[d]


def greedy_net_array(points: np.ndarray, rho: float, norm: str = EUCLIDEAN) -> np.ndarray:
    """Float fast path of :func:`greedy_maximal_net`; returns kept row indices."""
    pts = np.asarray(points, float)
    if len(pts) == 0:
        return np.zeros(0, int)
    d = pts.shape[1]
    keys = np.floor(pts / rho).astype(np.int64)
    grid: dict[tuple, list[int]] = {}
    kept: list[int] = []
    offs = _neighbour_offsets(d)
    for i in range(len(pts)):
        key = tuple(keys[i])
        ok = True
        for off in offs:
            for j in grid.get(tuple(k + o for k, o in zip(key, off)), ()):
                diff = np.abs(pts[i] - pts[j])
                dd = diff.max() if norm == SUP else math.sqrt(float(diff @ diff))
                if dd < rho:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            kept.append(i)
            grid.setdefault(key, []).append(i)
    return np.array(kept, int)


def four_r_select(balls: Sequence[Ball]) -> list[Ball]:
    """Greedy Vitali selection by decreasing radius.

    A ball is kept unless its centre already lies in a kept ball.  Kept
    balls have pairwise disjoint quarter-radius shrinks and together
    contain every input centre.  Output keeps input order.
    """
    if not balls:
        return []
    dims = {b.dim for b in balls}
    if len(dims) > 1:
        raise DimensionMismatchError("balls of different dimensions")
    order = sorted(range(len(balls)), key=lambda i: -float(balls[i].radius))
    chosen: list[int] = []
    for i in order:
        if not any(balls[j].contains(balls[i].center) for j in chosen):
            chosen.append(i)
    return [balls[i] for i in sorted(chosen)]


def balls_disjoint(a: Ball, b: Ball) -> bool:
    """Closed balls of the same norm are disjoint iff centres are farther than r_a + r_b."""
    s = a.radius + b.radius
    if a.norm == SUP:
        return sup_dist(a.center, b.center) > s
    return dist_sq(a.center, b.center) > s * s
