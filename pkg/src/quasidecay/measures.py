"""Measure oracles: samplers plus ball masses returned as error brackets.

Most oracles here are *cell measures*: the support is covered by a tree of
boxes with known masses (dyadic cubes, IFS cylinders, products of those),
and the mass of a region is bracketed by refining cells that straddle its
boundary.  Pushforwards fall back to Monte Carlo with a binomial bound.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .exact import fraction_to_str, to_fraction
from .geometry import EUCLIDEAN, SUP, Ball, Hyperplane, Point
from .poly import Polynomial

DEFAULT_SEED = 20240601
MAX_DEPTH = 64


class BudgetError(RuntimeError):
    """A requested construction exceeds the configured size budget."""


@dataclass(frozen=True)
class MassBracket:
    lo: object
    hi: object
    converged: bool = True
    method: str = "cells"

    @property
    def estimate(self):
        return (self.lo + self.hi) / 2

    @property
    def width(self):
        return self.hi - self.lo

    def contains_zero(self) -> bool:
        return self.lo <= 0

    def to_json(self) -> dict:
        return {"lo": _num_json(self.lo), "hi": _num_json(self.hi),
                "converged": self.converged, "method": self.method}


def _num_json(x):
    return fraction_to_str(x) if isinstance(x, Fraction) else float(x)


# --- regions -------------------------------------------------------------------

INSIDE, OUTSIDE, PARTIAL = 1, 0, -1


def _box_interval_of_linear(normal, offset, lo, hi):
    """Range of ``normal . y - offset`` over the box ``[lo, hi]``."""
    a = b = -offset
    for n, l, h in zip(normal, lo, hi):
        if n >= 0:
            a, b = a + n * l, b + n * h
        else:
            a, b = a + n * h, b + n * l
    return a, b


class Region:
    """A closed set with a box classifier and vectorised membership."""

    exact = False

    def classify(self, lo, hi) -> int:
        raise NotImplementedError

    def contains_array(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class BallRegion(Region):
    def __init__(self, ball: Ball):
        self.ball = ball
        self.exact = ball.exact
        self._c = ball.center.coords
        self._r = ball.radius

    def _prep(self, lo, hi):
        if self.exact:
            return self._c, self._r, lo, hi, 0
        r = float(self._r)
        # float slack scaled to the ball, in the units classify compares (r or r^2)
        eps = 1e-12 * (r if self.ball.norm == SUP else r * r)
        return ([float(x) for x in self._c], r, [float(x) for x in lo], [float(x) for x in hi], eps)

    def classify(self, lo, hi) -> int:
        c, r, lo, hi, eps = self._prep(lo, hi)
        if self.ball.norm == SUP:
            if all(ci - r + eps <= l and h <= ci + r - eps for ci, l, h in zip(c, lo, hi)):
                return INSIDE
            if any(h < ci - r - eps or l > ci + r + eps for ci, l, h in zip(c, lo, hi)):
                return OUTSIDE
            return PARTIAL
        near = far = 0
        for ci, l, h in zip(c, lo, hi):
            dn = l - ci if ci < l else (ci - h if ci > h else 0)
            df = max(abs(ci - l), abs(ci - h))
            near += dn * dn
            far += df * df
        r2 = r * r
        if far <= r2 - eps:
            return INSIDE
        if near > r2 + eps:
            return OUTSIDE
        return PARTIAL

    def contains_array(self, pts):
        return self.ball.contains_array(pts)


class SlabRegion(Region):
    """``{y : |normal.y - offset| <= half_width * |normal|}`` intersected with a ball."""

    def __init__(self, plane: Hyperplane, half_width, ball: Ball | None = None):
        self.plane = plane
        self.ball_region = BallRegion(ball) if ball is not None else None
        self.exact = plane.exact and (ball is None or ball.exact) and isinstance(half_width, (int, Fraction))
        if self.exact:
            self._n = plane.normal
            self._c = plane.offset
            # compare squared quantities to avoid the norm's square root
            self._w2 = Fraction(half_width) ** 2 * plane.normal_sq()
            self._w = None
        else:
            scale = math.sqrt(float(plane.normal_sq()))
            self._n = [float(x) / scale for x in plane.normal]
            self._c = float(plane.offset) / scale
            self._w = float(half_width)

    def _slab_class(self, lo, hi) -> int:
        if self.exact:
            a, b = _box_interval_of_linear(self._n, self._c, lo, hi)
            if a * a <= self._w2 and b * b <= self._w2:
                return INSIDE
            if (a > 0 and a * a > self._w2) or (b < 0 and b * b > self._w2):
                return OUTSIDE
            return PARTIAL
        a, b = _box_interval_of_linear(self._n, self._c, [float(x) for x in lo], [float(x) for x in hi])
        w = self._w
        eps = 1e-12 * w
        if -w + eps <= a and b <= w - eps:
            return INSIDE
        if a > w + eps or b < -w - eps:
            return OUTSIDE
        return PARTIAL

    def classify(self, lo, hi) -> int:
        s = self._slab_class(lo, hi)
        if self.ball_region is None or s == OUTSIDE:
            return s
        b = self.ball_region.classify(lo, hi)
        if b == OUTSIDE:
            return OUTSIDE
        return INSIDE if (s == INSIDE and b == INSIDE) else PARTIAL

    def contains_array(self, pts):
        vals = np.abs(np.asarray(pts, float) @ np.array([float(x) for x in self._n]) - float(self._c))
        if self.exact:
            w = math.sqrt(float(self._w2))
        else:
            w = self._w
        ok = vals <= w * (1 + 1e-12)
        if self.ball_region is not None:
            ok &= self.ball_region.contains_array(pts)
        return ok


# --- oracle interface ----------------------------------------------------------

class MeasureOracle:
    """Base class.  ``exact`` means cell masses are exact rationals."""

    dim: int
    exact: bool = False
    support_descriptor: str = ""
    probability: bool = True

    def total_mass(self):
        return 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample_points(self, rng, n: int, exact: bool = False) -> list[Point]:
        arr = self.sample(rng, n)
        return [Point(tuple(Fraction(float(v)) if exact else float(v) for v in row), exact) for row in arr]

    def region_mass(self, region: Region, tol=1e-6, rng=None) -> MassBracket:
        return monte_carlo_mass(self, region, tol, rng)

    def ball_mass(self, ball: Ball, tol=1e-6, rng=None) -> MassBracket:
        return self.region_mass(BallRegion(ball), tol, rng)

    def slab_mass(self, plane: Hyperplane, half_width, ball: Ball | None = None,
                  tol=1e-6, rng=None) -> MassBracket:
        return self.region_mass(SlabRegion(plane, half_width, ball), tol, rng)

    def sample_in_region(self, region: Region, rng, n: int) -> np.ndarray:
        """Up to ``n`` samples of the measure conditioned on ``region`` (rejection)."""
        out, draws = [], 0
        got = 0
        while got < n and draws < 200 * n + 10000:
            pts = self.sample(rng, 4096)
            draws += 4096
            keep = pts[region.contains_array(pts)]
            out.append(keep)
            got += len(keep)
        if not out:
            return np.zeros((0, self.dim))
        return np.concatenate(out)[:n]

    def to_json(self) -> dict:
        raise NotImplementedError


def monte_carlo_mass(mu: MeasureOracle, region: Region, tol, rng=None,
                     max_samples: int = 400_000) -> MassBracket:
    """Binomial bracket ``p_hat -+ (3 sigma + 1/n)`` scaled by total mass."""
    rng = np.random.default_rng(DEFAULT_SEED) if rng is None else rng
    tol = float(tol)
    n = int(min(max_samples, max(1000, math.ceil((1.5 / max(tol, 1e-9)) ** 2))))
    hits = int(region.contains_array(mu.sample(rng, n)).sum())
    p = hits / n
    half = 3 * math.sqrt(max(p * (1 - p), 0.25 / n) / n) + 1 / n
    total = float(mu.total_mass())
    lo, hi = max(0.0, p - half) * total, min(1.0, p + half) * total
    return MassBracket(lo, hi, converged=(hi - lo) <= 2 * tol + 1e-15, method="monte-carlo")


@dataclass(order=True)
class Cell:
    sort_key: float
    serial: int
    lo: tuple = field(compare=False)
    hi: tuple = field(compare=False)
    mass: object = field(compare=False)
    depth: int = field(compare=False)
    payload: object = field(compare=False, default=None)


_serial = itertools.count()


def make_cell(lo, hi, mass, depth, payload=None) -> Cell:
    return Cell(-float(mass), next(_serial), tuple(lo), tuple(hi), mass, depth, payload)


class CellMeasure(MeasureOracle):
    """Oracle whose mass is organised as a refinable tree of boxes."""

    def root_cells(self) -> list[Cell]:
        raise NotImplementedError

    def split(self, cell: Cell) -> list[Cell]:
        raise NotImplementedError

    def sample_cell(self, cell: Cell, rng, n: int) -> np.ndarray:
        raise NotImplementedError

    def region_mass(self, region: Region, tol=1e-6, rng=None, max_cells: int = 400_000,
                    rel_tol: float = 0.0) -> MassBracket:
        """Bracket the mass of ``region`` by refining straddling cells.

        Refinement stops once the straddling mass is at most
        ``max(tol, rel_tol * inside)`` or the depth/cell budget is spent.
        """
        inside = 0
        partial: list[Cell] = []
        pmass = 0
        for c in self.root_cells():
            k = region.classify(c.lo, c.hi)
            if k == INSIDE:
                inside += c.mass
            elif k == PARTIAL:
                heapq.heappush(partial, c)
                pmass += c.mass
        processed = 0
        converged = True
        while partial:
            if pmass <= tol or (rel_tol and pmass <= rel_tol * inside):
                break
            if processed >= max_cells:
                converged = False
                break
            cell = heapq.heappop(partial)
            pmass -= cell.mass
            if cell.depth >= MAX_DEPTH:
                # cannot refine further; keep it straddling
                converged = False
                deep = cell
                rest = [deep]
                while partial:
                    rest.append(heapq.heappop(partial))
                pmass = sum((c.mass for c in rest), 0 * cell.mass)
                return MassBracket(inside, inside + pmass, False)
            processed += 1
            for child in self.split(cell):
                k = region.classify(child.lo, child.hi)
                if k == INSIDE:
                    inside += child.mass
                elif k == PARTIAL:
                    heapq.heappush(partial, child)
                    pmass += child.mass
        if partial and not (pmass <= tol or (rel_tol and pmass <= rel_tol * inside)):
            converged = False
        if not partial:
            pmass = 0 * inside
        return MassBracket(inside, inside + pmass, converged)

    def conditioned_cells(self, region: Region, depth: int, max_cells: int = 20000) -> list[Cell]:
        """Cells of depth ``depth`` (or leaves) meeting ``region``."""
        frontier = [c for c in self.root_cells() if region.classify(c.lo, c.hi) != OUTSIDE]
        out = []
        while frontier:
            c = frontier.pop()
            if c.depth >= depth or len(out) + len(frontier) >= max_cells:
                out.append(c)
                continue
            kids = self.split(c)
            if len(kids) == 1 and kids[0].depth == c.depth:
                out.append(c)
                continue
            frontier.extend(k for k in kids if region.classify(k.lo, k.hi) != OUTSIDE)
        return out

    def sample_in_region(self, region: Region, rng, n: int, depth: int | None = None) -> np.ndarray:
        """Samples conditioned on ``region``, drawn cell by cell then filtered."""
        if depth is None:
            depth = 12
        cells = self.conditioned_cells(region, depth)
        if not cells:
            return np.zeros((0, self.dim))
        w = np.array([float(c.mass) for c in cells])
        if w.sum() <= 0:
            return np.zeros((0, self.dim))
        w /= w.sum()
        out, got, rounds = [], 0, 0
        while got < n and rounds < 200:
            counts = rng.multinomial(max(64, 2 * (n - got)), w)
            batch = [self.sample_cell(c, rng, int(k)) for c, k in zip(cells, counts) if k]
            pts = np.concatenate(batch)
            keep = pts[region.contains_array(pts)]
            out.append(keep)
            got += len(keep)
            rounds += 1
        return np.concatenate(out)[:n] if out else np.zeros((0, self.dim))


# --- Lebesgue ---------------------------------------------------------------------

class LebesgueCube(CellMeasure):
    def __init__(self, d: int):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = d
        self.exact = True
        self.support_descriptor = f"[0,1]^{d}"

    def root_cells(self):
        return [make_cell((Fraction(0),) * self.dim, (Fraction(1),) * self.dim, Fraction(1), 0)]

    def split(self, cell):
        mid = [(l + h) / 2 for l, h in zip(cell.lo, cell.hi)]
        kids = []
        for corner in itertools.product((0, 1), repeat=self.dim):
            lo = tuple(l if b == 0 else m for l, m, b in zip(cell.lo, mid, corner))
            hi = tuple(m if b == 0 else h for m, h, b in zip(mid, cell.hi, corner))
            kids.append(make_cell(lo, hi, cell.mass / 2 ** self.dim, cell.depth + 1))
        return kids

    def sample(self, rng, n):
        return rng.random((n, self.dim))

    def sample_cell(self, cell, rng, n):
        lo = np.array([float(x) for x in cell.lo])
        hi = np.array([float(x) for x in cell.hi])
        return lo + (hi - lo) * rng.random((n, self.dim))

    def ball_mass(self, ball: Ball, tol=1e-6, rng=None) -> MassBracket:
        if ball.norm != SUP:
            return super().ball_mass(ball, tol, rng)
        vol = Fraction(1) if ball.exact else 1.0
        for c in ball.center.coords:
            lo, hi = max(c - ball.radius, 0), min(c + ball.radius, 1)
            vol *= max(hi - lo, 0)
        return MassBracket(vol, vol, True, "exact")

    def to_json(self):
        return {"kind": "lebesgue", "dim": self.dim}


# --- self-similar measures -------------------------------------------------------

@dataclass(frozen=True)
class IFSSpec:
    ratios: tuple
    translations: tuple
    weights: tuple
    orthogonal: tuple | None = None

    def __post_init__(self):
        if not (len(self.ratios) == len(self.translations) == len(self.weights) >= 1):
            raise ValueError("ratios, translations and weights must have equal positive length")
        if any(not (0 < float(r) < 1) for r in self.ratios):
            raise ValueError("contraction ratios must lie in (0, 1)")
        total = sum(to_fraction(w) for w in self.weights)
        if total != 1:
            raise ValueError(f"weights sum to {total}, not 1")
        if any(to_fraction(w) <= 0 for w in self.weights):
            raise ValueError("weights must be positive")

    @property
    def dim(self) -> int:
        return len(self.translations[0])

    @classmethod
    def middle_thirds(cls) -> "IFSSpec":
        third = Fraction(1, 3)
        return cls((third, third), ((Fraction(0),), (Fraction(2, 3),)), (Fraction(1, 2), Fraction(1, 2)))

    def to_json(self) -> dict:
        return {
            "ratios": [fraction_to_str(to_fraction(r)) for r in self.ratios],
            "translations": [[fraction_to_str(to_fraction(x)) for x in t] for t in self.translations],
            "weights": [fraction_to_str(to_fraction(w)) for w in self.weights],
        }


class SelfSimilar(CellMeasure):
    """Self-similar measure; cells are cylinders ``f_w(K)`` with mass ``p_w``."""

    def __init__(self, spec: IFSSpec):
        self.spec = spec
        self.dim = spec.dim
        self.ratios = [to_fraction(r) for r in spec.ratios]
        self.trans = [tuple(to_fraction(x) for x in t) for t in spec.translations]
        self.weights = [to_fraction(w) for w in spec.weights]
        self.orth = None if spec.orthogonal is None else [np.array(o, float) for o in spec.orthogonal]
        self.exact = self.orth is None
        if self.orth is None:
            fixed = [[t[j] / (1 - r) for r, t in zip(self.ratios, self.trans)] for j in range(self.dim)]
            self.base_lo = tuple(min(f) for f in fixed)
            self.base_hi = tuple(max(f) for f in fixed)
        else:
            radius = max(math.sqrt(sum(float(x) ** 2 for x in t)) / (1 - float(r))
                         for r, t in zip(self.ratios, self.trans))
            self.base_lo = tuple(Fraction(-radius) for _ in range(self.dim))
            self.base_hi = tuple(Fraction(radius) for _ in range(self.dim))
        self.strong_separation = self._check_separation()
        self.support_descriptor = f"self-similar, {len(self.ratios)} maps"
        self._rf = np.array([float(r) for r in self.ratios])
        self._tf = np.array([[float(x) for x in t] for t in self.trans])
        self._wf = np.array([float(w) for w in self.weights])
        rmax = float(max(self.ratios))
        span = max(float(h - l) for l, h in zip(self.base_lo, self.base_hi)) or 1.0
        self._depth = max(1, math.ceil(math.log(1e-17 / span) / math.log(rmax)))

    def _check_separation(self) -> bool:
        """First-level boxes pairwise disjoint (sufficient for strong separation)."""
        if self.orth is not None:
            return False
        boxes = [self._image_box(i, self.base_lo, self.base_hi) for i in range(len(self.ratios))]
        for (l1, h1), (l2, h2) in itertools.combinations(boxes, 2):
            if all(a <= d and c <= b for a, b, c, d in zip(l1, h1, l2, h2)):
                return False
        return True

    def _image_box(self, i, lo, hi):
        r, t = self.ratios[i], self.trans[i]
        return tuple(r * l + x for l, x in zip(lo, t)), tuple(r * h + x for h, x in zip(hi, t))

    def root_cells(self):
        return [make_cell(self.base_lo, self.base_hi, Fraction(1), 0, ())]

    def split(self, cell):
        word = cell.payload
        kids = []
        for i in range(len(self.ratios)):
            child = word + (i,)
            if self.orth is None:
                lo, hi = self._cylinder_box(child)
            else:
                lo, hi = self._rotated_box(child)
            kids.append(make_cell(lo, hi, cell.mass * self.weights[i], cell.depth + 1, child))
        return kids

    def _cylinder_box(self, word):
        """Exact box ``f_w(K)`` for ``f_w = f_{w_1} o ... o f_{w_k}`` without rotations."""
        scale = Fraction(1)
        shift = [Fraction(0)] * self.dim
        for i in word:
            shift = [s + scale * t for s, t in zip(shift, self.trans[i])]
            scale *= self.ratios[i]
        return (tuple(scale * l + s for l, s in zip(self.base_lo, shift)),
                tuple(scale * h + s for h, s in zip(self.base_hi, shift)))

    def _word_map(self, word):
        """Composite similarity ``x -> scale * O x + shift`` for a word (float)."""
        scale, O, shift = 1.0, np.eye(self.dim), np.zeros(self.dim)
        for i in word:
            oi = self.orth[i] if self.orth is not None else np.eye(self.dim)
            shift = shift + scale * O @ self._tf[i]
            O = O @ oi
            scale *= self._rf[i]
        return scale, O, shift

    def _rotated_box(self, word):
        scale, _, shift = self._word_map(word)
        rad = float(self.base_hi[0]) * scale
        return (tuple(Fraction(s - rad) for s in shift), tuple(Fraction(s + rad) for s in shift))

    def cylinder_mass(self, word: Sequence[int]) -> Fraction:
        m = Fraction(1)
        for i in word:
            m *= self.weights[i]
        return m

    def _words(self, rng, n, depth):
        return rng.choice(len(self._wf), size=(n, depth), p=self._wf)

    def _apply_words(self, words, x):
        for k in range(words.shape[1] - 1, -1, -1):
            w = words[:, k]
            if self.orth is None:
                x = self._rf[w, None] * x + self._tf[w]
            else:
                rot = np.stack([self.orth[i] for i in w])
                x = self._rf[w, None] * np.einsum("nij,nj->ni", rot, x) + self._tf[w]
        return x

    def sample(self, rng, n):
        x = np.zeros((n, self.dim)) + self._tf[0] / (1 - self._rf[0])
        return self._apply_words(self._words(rng, n, self._depth), x)

    def sample_cell(self, cell, rng, n):
        inner = self.sample(rng, n)
        word = np.array(cell.payload, dtype=int)
        if len(word) == 0:
            return inner
        return self._apply_words(np.broadcast_to(word, (n, len(word))), inner)

    def to_json(self):
        return {"kind": "ifs", **self.spec.to_json()}


def cantor_measure() -> SelfSimilar:
    return SelfSimilar(IFSSpec.middle_thirds())


# --- products ------------------------------------------------------------------

class ProductMeasure(CellMeasure):
    def __init__(self, mu1: MeasureOracle, mu2: MeasureOracle):
        for m in (mu1, mu2):
            if not m.probability or m.total_mass() != 1:
                raise ValueError("product factors must be probability measures")
        self.mu1, self.mu2 = mu1, mu2
        self.dim = mu1.dim + mu2.dim
        self.cellular = isinstance(mu1, CellMeasure) and isinstance(mu2, CellMeasure)
        self.exact = mu1.exact and mu2.exact and self.cellular
        self.support_descriptor = f"({mu1.support_descriptor}) x ({mu2.support_descriptor})"

    def _join(self, c1: Cell, c2: Cell) -> Cell:
        return make_cell(c1.lo + c2.lo, c1.hi + c2.hi, c1.mass * c2.mass,
                         c1.depth + c2.depth, (c1, c2))

    def root_cells(self):
        return [self._join(a, b) for a in self.mu1.root_cells() for b in self.mu2.root_cells()]

    def split(self, cell):
        c1, c2 = cell.payload
        s1 = max((h - l for l, h in zip(c1.lo, c1.hi)), default=0)
        s2 = max((h - l for l, h in zip(c2.lo, c2.hi)), default=0)
        if s1 >= s2:
            return [self._join(k, c2) for k in self.mu1.split(c1)]
        return [self._join(c1, k) for k in self.mu2.split(c2)]

    def sample(self, rng, n):
        return np.hstack([self.mu1.sample(rng, n), self.mu2.sample(rng, n)])

    def sample_cell(self, cell, rng, n):
        c1, c2 = cell.payload
        return np.hstack([self.mu1.sample_cell(c1, rng, n), self.mu2.sample_cell(c2, rng, n)])

    def region_mass(self, region, tol=1e-6, rng=None, **kw):
        if not self.cellular:
            return monte_carlo_mass(self, region, tol, rng)
        return super().region_mass(region, tol, rng, **kw)

    def ball_mass(self, ball: Ball, tol=1e-6, rng=None):
        if ball.norm == SUP:
            d1 = self.mu1.dim
            c = ball.center.coords
            b1 = Ball(Point(c[:d1], ball.exact), ball.radius, SUP)
            b2 = Ball(Point(c[d1:], ball.exact), ball.radius, SUP)
            m1 = self.mu1.ball_mass(b1, tol, rng)
            m2 = self.mu2.ball_mass(b2, tol, rng)
            return MassBracket(m1.lo * m2.lo, m1.hi * m2.hi, m1.converged and m2.converged, "product")
        return super().ball_mass(ball, tol, rng)

    def to_json(self):
        return {"kind": "product", "factors": [self.mu1.to_json(), self.mu2.to_json()]}


# --- point masses and pushforwards ---------------------------------------------

class PointMass(CellMeasure):
    def __init__(self, point: Sequence):
        self.point = tuple(to_fraction(x) for x in point)
        self.dim = len(self.point)
        self.exact = True
        self.support_descriptor = "atom at (" + ", ".join(fraction_to_str(x) for x in self.point) + ")"

    def root_cells(self):
        return [make_cell(self.point, self.point, Fraction(1), 0)]

    def split(self, cell):
        return [make_cell(cell.lo, cell.hi, cell.mass, MAX_DEPTH)]

    def sample(self, rng, n):
        return np.tile(np.array([float(x) for x in self.point]), (n, 1))

    def sample_cell(self, cell, rng, n):
        return self.sample(rng, n)

    def to_json(self):
        return {"kind": "point_mass", "point": [fraction_to_str(x) for x in self.point]}


class Pushforward(MeasureOracle):
    """Image of ``mu`` under a polynomial map; masses by Monte Carlo."""

    def __init__(self, mu: MeasureOracle, components: Sequence[Polynomial]):
        if not components:
            raise ValueError("need at least one component")
        for p in components:
            if p.nvars != mu.dim:
                raise ValueError("map domain dimension must equal the measure's dimension")
        self.mu = mu
        self.components = list(components)
        self.dim = len(components)
        self.exact = False
        self.support_descriptor = f"polynomial image of {mu.support_descriptor}"

    def sample(self, rng, n):
        base = self.mu.sample(rng, n)
        return np.column_stack([p.evaluate_array(base) for p in self.components])

    def sample_points(self, rng, n, exact=False):
        base = self.mu.sample(rng, n)
        if not exact:
            return [Point(tuple(float(v) for v in row), False) for row in self.sample_from(base)]
        pts = []
        for row in base:
            x = [Fraction(float(v)) for v in row]
            pts.append(Point(tuple(p(x) for p in self.components), True))
        return pts

    def sample_from(self, base):
        return np.column_stack([p.evaluate_array(base) for p in self.components])

    def sample_in_region(self, region, rng, n):
        return super().sample_in_region(region, rng, n)

    def to_json(self):
        return {"kind": "pushforward", "base": self.mu.to_json(),
                "components": [p.to_json() for p in self.components]}


def segment_in_plane() -> Pushforward:
    """Lebesgue on ``[0,1] x {0}``: the canonical planar degenerate control."""
    x = Polynomial.variable(1, 0)
    return Pushforward(LebesgueCube(1), [x, Polynomial.constant(1, 0)])


# --- the counterexample measure ------------------------------------------------

def stern_brocot_unit(count: int) -> list[Fraction]:
    """First ``count`` rationals of [0,1] in Stern-Brocot breadth-first order.

    Order: 0, 1, then each tree level left to right (1/2; 1/3, 2/3;
    1/4, 2/5, 3/5, 3/4; ...).
    """
    out = [Fraction(0), Fraction(1)]
    level = [(Fraction(0), Fraction(1))]
    while len(out) < count:
        nxt = []
        for a, b in level:
            m = Fraction(a.numerator + b.numerator, a.denominator + b.denominator)
            out.append(m)
            nxt.extend([(a, m), (m, b)])
        level = nxt
    return out[:count]


@dataclass(frozen=True)
class CounterexampleSpec:
    n_max: int
    max_exponent_bits: int = 1 << 16

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.n_max >= 1 and 2 ** self.n_max > self.max_exponent_bits:
            raise BudgetError(f"b_n = 2^(2^{self.n_max}) exceeds the rational budget "
                              f"of 2^{self.max_exponent_bits}")


@dataclass(frozen=True)
class Spike:
    index: int
    center: Fraction
    half_width: Fraction
    height: Fraction


class CounterexampleMeasure(CellMeasure):
    """Density ``1 + sum a_n b_n 1_{B(q_n, 1/b_n)}`` on [0,1] with ``a_n = 2^-n, b_n = 2^(2^n)``."""

    def __init__(self, spec: CounterexampleSpec):
        self.spec = spec
        self.dim = 1
        self.exact = True
        self.probability = False
        qs = stern_brocot_unit(spec.n_max)
        self.spikes = [Spike(n, qs[n - 1], Fraction(1, 2 ** (2 ** n)), Fraction(2 ** (2 ** n), 2 ** n))
                       for n in range(1, spec.n_max + 1)]
        self.support_descriptor = f"[0,1] with {spec.n_max} spikes"
        self._total = self.interval_mass(Fraction(0), Fraction(1))

    def interval_mass(self, u: Fraction, v: Fraction) -> Fraction:
        u, v = max(Fraction(u), Fraction(0)), min(Fraction(v), Fraction(1))
        if v <= u:
            return Fraction(0)
        total = v - u
        for s in self.spikes:
            a = max(u, s.center - s.half_width)
            b = min(v, s.center + s.half_width)
            if b > a:
                total += s.height * (b - a)
        return total

    def total_mass(self):
        return self._total

    def ball_mass(self, ball: Ball, tol=0, rng=None) -> MassBracket:
        c, r = to_fraction(ball.center.coords[0]), to_fraction(ball.radius)
        m = self.interval_mass(c - r, c + r)
        return MassBracket(m, m, True, "exact")

    def region_mass(self, region, tol=1e-6, rng=None, **kw):
        if isinstance(region, BallRegion):
            return self.ball_mass(region.ball)
        return super().region_mass(region, tol, rng, **kw)

    # cells: the breakpoints of the density split [0,1] into constant pieces
    def root_cells(self):
        pts = {Fraction(0), Fraction(1)}
        for s in self.spikes:
            for p in (s.center - s.half_width, s.center + s.half_width):
                if 0 < p < 1:
                    pts.add(p)
        pts = sorted(pts)
        return [make_cell((a,), (b,), self.interval_mass(a, b), 0) for a, b in zip(pts, pts[1:])]

    def split(self, cell):
        a, b = cell.lo[0], cell.hi[0]
        m = (a + b) / 2
        return [make_cell((a,), (m,), cell.mass / 2, cell.depth + 1),
                make_cell((m,), (b,), cell.mass / 2, cell.depth + 1)]

    def sample_cell(self, cell, rng, n):
        a, b = float(cell.lo[0]), float(cell.hi[0])
        return (a + (b - a) * rng.random(n)).reshape(n, 1)

    def sample(self, rng, n):
        cells = self.root_cells()
        w = np.array([float(c.mass) for c in cells])
        idx = rng.choice(len(cells), size=n, p=w / w.sum())
        lo = np.array([float(c.lo[0]) for c in cells])[idx]
        hi = np.array([float(c.hi[0]) for c in cells])[idx]
        return (lo + (hi - lo) * rng.random(n)).reshape(n, 1)

    def spike_list(self) -> list[dict]:
        return [{"n": s.index, "q": fraction_to_str(s.center), "radius": fraction_to_str(s.half_width),
                 "height": fraction_to_str(s.height)} for s in self.spikes]

    def to_json(self):
        return {"kind": "counterexample", "n_max": self.spec.n_max}


# --- constructors and JSON specs -----------------------------------------------

def lebesgue_cube(d: int) -> LebesgueCube:
    return LebesgueCube(d)


def self_similar_oracle(spec: IFSSpec) -> SelfSimilar:
    return SelfSimilar(spec)


def product_oracle(mu1: MeasureOracle, mu2: MeasureOracle) -> ProductMeasure:
    return ProductMeasure(mu1, mu2)


def pushforward_oracle(mu: MeasureOracle, components: Sequence[Polynomial]) -> Pushforward:
    return Pushforward(mu, components)


def counterexample_oracle(spec: CounterexampleSpec) -> CounterexampleMeasure:
    return CounterexampleMeasure(spec)


def measure_from_json(doc: dict) -> MeasureOracle:
    kind = doc.get("kind")
    if kind == "lebesgue":
        return LebesgueCube(int(doc["dim"]))
    if kind == "cantor":
        return cantor_measure()
    if kind == "ifs":
        spec = IFSSpec(tuple(to_fraction(r) for r in doc["ratios"]),
                       tuple(tuple(to_fraction(x) for x in t) for t in doc["translations"]),
                       tuple(to_fraction(w) for w in doc["weights"]))
        return SelfSimilar(spec)
    if kind == "product":
        a, b = doc["factors"]
        return ProductMeasure(measure_from_json(a), measure_from_json(b))
    if kind == "pushforward":
        base = measure_from_json(doc["base"])
        return Pushforward(base, [Polynomial.from_json(base.dim, c) for c in doc["components"]])
    if kind == "point_mass":
        return PointMass([to_fraction(x) for x in doc["point"]])
    if kind == "counterexample":
        return CounterexampleMeasure(CounterexampleSpec(int(doc["n_max"])))
    if kind == "segment":
        return segment_in_plane()
    raise ValueError(f"unknown measure kind {kind!r}")
