"""Exponents of irrationality by direct enumeration, plus the rational simplex check.

Inputs carry a precision model.  An exact ``Fraction`` point *is* that
rational and yields the ``+inf`` sentinel.  A float is a real known to half
an ulp; a decimal string is known to half a unit in its last digit.
Approximations are only trusted up to the height where the input's
uncertainty would start to dominate the approximation error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import (
    floor_rational_root, log_rational, nullspace, rank, to_fraction, decimal_precision,
)
from .geometry import Hyperplane, Point

INF = math.inf


@dataclass(frozen=True)
class ApproximationRecord:
    height: int
    q: tuple
    p: tuple
    error: float
    exponent: float
    naive_exponent: float | None = None

    def to_json(self) -> dict:
        out = {"height": self.height, "q": list(self.q), "p": list(self.p),
               "error": self.error, "exponent": self.exponent}
        if self.naive_exponent is not None:
            out["naive_exponent"] = self.naive_exponent
        return out


@dataclass
class ExponentEstimate:
    """``value`` is the max exponent over the final third of the records."""

    value: float
    height_reached: int
    records: list = field(default_factory=list)
    lower_bound_flag: bool = True
    overall_max: float = -INF
    rational: bool = False
    witness: object = None
    warnings: list = field(default_factory=list)

    @property
    def is_sentinel(self) -> bool:
        return self.rational

    def to_json(self) -> dict:
        return {
            "value": _json_float(self.value),
            "overall_max": _json_float(self.overall_max),
            "height": self.height_reached,
            "rational": self.rational,
            "witness": self.witness,
            "lower_bound": self.lower_bound_flag,
            "records": [r.to_json() for r in self.records],
            "warnings": list(self.warnings),
        }


def _json_float(x):
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return float(x)


def final_third_max(values: Sequence[float]) -> float:
    if not values:
        return -INF
    k = max(1, math.ceil(len(values) / 3))
    return max(values[-k:])


def estimate_from_records(records: list[ApproximationRecord], height: int,
                          warnings: list | None = None) -> ExponentEstimate:
    exps = [r.exponent for r in records]
    return ExponentEstimate(
        value=final_third_max(exps), height_reached=height, records=records,
        overall_max=max(exps, default=-INF), warnings=list(warnings or []),
    )


def rational_sentinel(q, p, height=0) -> ExponentEstimate:
    return ExponentEstimate(INF, height, [], False, INF, True,
                            {"q": list(q) if isinstance(q, tuple) else q, "p": [str(x) for x in p]})


# --- input precision ---------------------------------------------------------

@dataclass(frozen=True)
class RealInput:
    """Coordinates as exact rationals plus a uniform uncertainty ``precision``.

    ``precision == 0`` means the coordinates are exactly these rationals.
    """

    coords: tuple
    precision: Fraction

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def exact(self) -> bool:
        return self.precision == 0

    def reliable_height(self) -> float:
        """Largest height whose approximation errors dominate the uncertainty."""
        if self.precision == 0:
            return INF
        return math.floor((4 * float(self.precision)) ** -0.5)

    def floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])


def read_real(x) -> RealInput:
    """Accept a Point, a scalar, a decimal string or a sequence of those."""
    if isinstance(x, RealInput):
        return x
    if isinstance(x, Point):
        items = list(x.coords)
        if x.exact:
            return RealInput(tuple(items), Fraction(0))
    elif isinstance(x, (list, tuple, np.ndarray)):
        items = list(x)
    else:
        items = [x]
    coords, prec = [], Fraction(0)
    for v in items:
        if isinstance(v, str):
            coords.append(to_fraction(v))
            prec = max(prec, decimal_precision(v))
        elif isinstance(v, (float, np.floating)):
            v = float(v)
            coords.append(Fraction(v))
            prec = max(prec, Fraction(math.ulp(v)) / 2 if v else Fraction(1, 2 ** 1075))
        else:
            coords.append(to_fraction(v))
    return RealInput(tuple(coords), prec)


# --- continued fractions -------------------------------------------------------

def continued_fraction(x: Fraction, max_terms: int = 10_000) -> list[int]:
    x = Fraction(x)
    terms = []
    while len(terms) < max_terms:
        a = x.numerator // x.denominator
        terms.append(a)
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
    return terms


def convergents(terms: Sequence[int]):
    """Yield ``(p_k, q_k)`` for the given partial quotients."""
    p0, q0, p1, q1 = 1, 0, terms[0], 1
    yield p1, q1
    for a in terms[1:]:
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        yield p1, q1


def _omega_cf(x: RealInput, q_max: int) -> ExponentEstimate:
    """Continued-fraction records; score ``2 + log a_{k+1} / log q_k``.

    The score has the same limsup as the naive exponent at convergents but
    no ``log(constant)/log q`` bias, so it converges at desk-scale heights.
    """
    xv = x.coords[0]
    terms = continued_fraction(xv, 400)
    convs = list(convergents(terms))
    cap = x.reliable_height()
    limit = INF if x.precision == 0 else 1 / (4 * float(x.precision))
    records, height, warnings = [], 1, []
    for k, (p, q) in enumerate(convs):
        if q > q_max:
            break
        err = abs(xv - Fraction(p, q))
        if err == 0 or (x.precision and err <= x.precision and q <= cap):
            return rational_sentinel(q, (p,), q)
        if k + 1 >= len(convs):
            break
        q_next = convs[k + 1][1]
        if q * q_next > limit:
            warnings.append(f"input precision limits the convergents to q <= {height}")
            break
        height = q
        if q < 2:
            continue
        naive = -log_rational(err) / math.log(q)
        score = 2 + math.log(terms[k + 1]) / math.log(q)
        records.append(ApproximationRecord(q, (q,), (p,), float(err), score, naive))
    est = estimate_from_records(records, height, warnings)
    return est


def naive_cf_exponents(x, q_max: int) -> list[tuple[int, float]]:
    """``(q_k, -log|x - p_k/q_k| / log q_k)`` at convergents, for reporting."""
    xr = read_real(x)
    xv = xr.coords[0]
    out = []
    for p, q in convergents(continued_fraction(xv, 400)):
        if q > q_max:
            break
        err = abs(xv - Fraction(p, q))
        if q >= 2 and err:
            out.append((q, -log_rational(err) / math.log(q)))
    return out


# --- brute force ---------------------------------------------------------------

def _best_records(qs: np.ndarray, errs: np.ndarray) -> np.ndarray:
    """Indices where ``errs`` reaches a new strict minimum (scan in ``qs`` order)."""
    prev = np.minimum.accumulate(np.concatenate([[np.inf], errs[:-1]]))
    return np.nonzero(errs < prev)[0]


def _rational_check_vector(x: RealInput, q_cap: int):
    """Witness ``(q, p)`` if some ``p/q`` with ``q <= q_cap`` is within precision of ``x``."""
    if x.precision == 0:
        den = 1
        for c in x.coords:
            den = den * c.denominator // math.gcd(den, c.denominator)
        return den, tuple(int(c * den) for c in x.coords)
    cap = int(min(q_cap, 10 ** 6))
    qs = np.arange(1, cap + 1, dtype=np.float64)
    # float prefilter with a generous margin, then an exact check of survivors
    dev = np.abs(np.outer(qs, x.floats()) - np.rint(np.outer(qs, x.floats()))).max(axis=1)
    slack = float(x.precision) * qs + 1e-9 * qs
    for i in np.nonzero(dev <= slack)[0]:
        q = int(qs[i])
        p = tuple(round(c * q) for c in x.coords)
        if all(abs(c - Fraction(pi, q)) <= x.precision for c, pi in zip(x.coords, p)):
            return q, p
    return None


def _scan_vector(x: RealInput, q_max: int, multiplicative: bool):
    """Vectorised scan ``q = 1..q_max`` returning records by new minima.

    Simple records minimise ``max_i |q x_i - p_i|``; multiplicative ones
    minimise ``prod_i |q x_i - p_i|``.
    """
    xf = x.floats()
    qs = np.arange(1, q_max + 1, dtype=np.float64)
    prod = np.outer(qs, xf)
    near = np.rint(prod)
    dev = np.abs(prod - near)
    score = dev.prod(axis=1) if multiplicative else dev.max(axis=1)
    idx = _best_records(qs, score)
    out = []
    for i in idx:
        q = int(qs[i])
        p = tuple(int(v) for v in near[i])
        # recompute the deviations exactly for the recorded witnesses
        devs = [abs(c * q - pi) for c, pi in zip(x.coords, p)]
        out.append((q, p, devs))
    return out


def _vector_record(q, p, devs, d, multiplicative):
    if q < 2:
        return None
    if multiplicative:
        if any(v == 0 for v in devs):
            return None
        num = sum(log_rational(v) for v in devs) - d * math.log(q)
        err = math.exp(num) if num > -700 else 0.0
    else:
        m = max(devs)
        if m == 0:
            return None
        num = log_rational(m) - math.log(q)
        err = math.exp(num)
    return ApproximationRecord(q, (q,), p, err, -num / math.log(q))


def omega_vector(x, q_max: int, method: str = "brute") -> ExponentEstimate:
    """Simple exponent of a vector (sup norm on ``x - p/q``)."""
    xr = read_real(x)
    d = xr.dim
    q_max = int(q_max)
    if xr.exact:
        q, p = _rational_check_vector(xr, INF)
        return rational_sentinel(q, p, q)
    if method == "cf":
        if d != 1:
            raise ValueError("the continued-fraction method needs d = 1")
        return _omega_cf(xr, q_max)
    cap = xr.reliable_height()
    warnings = []
    height = q_max
    if cap < q_max:
        height = int(cap)
        warnings.append(f"input precision caps the search height at {height}")
    hit = _rational_check_vector(xr, min(height, 10 ** 5))
    if hit is not None:
        return rational_sentinel(hit[0], hit[1], hit[0])
    if method == "brute":
        if d > 3 or height > 10 ** 7:
            raise ValueError("brute force is limited to d <= 3 and moderate heights")
        raw = _scan_vector(xr, height, multiplicative=False)
    elif method == "lattice":
        raw = _lattice_candidates(xr, height)
    else:
        raise ValueError(f"unknown method {method!r}")
    records = [r for r in (_vector_record(q, p, devs, d, False) for q, p, devs in raw) if r]
    return estimate_from_records(records, height, warnings)


def omega_mult_vector(x, q_max: int) -> ExponentEstimate:
    """Multiplicative exponent ``-log prod|x_i - p_i/q| / log q`` by a q-scan."""
    xr = read_real(x)
    d = xr.dim
    q_max = int(q_max)
    for i, c in enumerate(xr.coords):
        single = RealInput((c,), xr.precision)
        if xr.exact:
            return rational_sentinel(c.denominator, (c.numerator,), c.denominator)
        hit = _rational_check_vector(single, min(single.reliable_height(), 10 ** 5))
        if hit is not None:
            return rational_sentinel(hit[0], hit[1], hit[0])
    cap = xr.reliable_height()
    height = int(min(q_max, cap))
    warnings = [f"input precision caps the search height at {height}"] if height < q_max else []
    raw = _scan_vector(xr, height, multiplicative=True)
    records = [r for r in (_vector_record(q, p, devs, d, True) for q, p, devs in raw) if r]
    return estimate_from_records(records, height, warnings)


def mult_dominates_simple(x, simple: ExponentEstimate) -> bool:
    """At every simple-run witness the multiplicative exponent is at least as large."""
    xr = read_real(x)
    for r in simple.records:
        devs = [abs(c * r.height - pi) for c, pi in zip(xr.coords, r.p)]
        m = _vector_record(r.height, r.p, devs, xr.dim, True)
        if m is not None and m.exponent < r.exponent - 1e-12:
            return False
    return True


# --- lattice-assisted search -------------------------------------------------

def _lattice_candidates(x: RealInput, q_max: int):
    """Candidates from reduced bases of the approximation lattice at scales ``2^j``."""
    from .lattice import lll_reduce

    d = x.dim
    seen = {}
    scale = 2
    while scale <= 2 * q_max:
        q_scale = min(scale, q_max)
        # rows (w, x) and (0, -e_i); w balances q against the errors
        weight = Fraction(1, max(1, int(round(q_scale ** (1 + 1 / d)))))
        basis = [[weight] + list(x.coords)] + [[Fraction(0)] + [Fraction(-int(i == j)) for j in range(d)]
                                                for i in range(d)]
        reduced = lll_reduce(basis)
        for row in reduced:
            q = int(round(row[0] / weight))
            if q < 0:
                q = -q
            if 1 <= q <= q_max and q not in seen:
                p = tuple(round(c_ * q) for c_ in x.coords)
                seen[q] = p
        scale *= 2
    out = []
    best = None
    for q in sorted(seen):
        p = seen[q]
        devs = [abs(c_ * q - pi) for c_, pi in zip(x.coords, p)]
        m = max(devs)
        if best is None or m < best:
            best = m
            out.append((q, p, devs))
    return out


# --- matrices ------------------------------------------------------------------

def read_matrix(a) -> tuple[list[list[Fraction]], Fraction]:
    """Rows of exact entries and the uniform input precision."""
    rows, prec = [], Fraction(0)
    for row in a:
        r = read_real(list(row))
        rows.append(list(r.coords))
        prec = max(prec, r.precision)
    return rows, prec


def _matrix_rational_witness(rows, prec, q_cap: int = 50):
    """Small nonzero ``q`` with ``A q`` (nearly) integral, else None."""
    n = len(rows[0])
    for h in range(1, q_cap + 1):
        for q in itertools.product(range(-h, h + 1), repeat=n):
            if max(abs(v) for v in q) != h or next(v for v in q if v) < 0:
                continue
            img = [sum(a * v for a, v in zip(row, q)) for row in rows]
            if all(abs(y - round(y)) <= prec * h * n for y in img):
                return q, [round(y) for y in img]
    return None


def _matrix_scan(rows, q_max: int, multiplicative: bool):
    m, n = len(rows), len(rows[0])
    af = np.array([[float(v) for v in row] for row in rows])
    if multiplicative:
        qs = _hyperbolic_vectors(n, q_max)
        heights = np.prod(np.maximum(np.abs(qs), 1), axis=1)
    else:
        qs = _box_vectors(n, q_max)
        heights = np.abs(qs).max(axis=1)
    order = np.argsort(heights, kind="stable")
    qs, heights = qs[order], heights[order]
    img = qs @ af.T
    near = np.rint(img)
    dev = np.abs(img - near)
    score = dev.prod(axis=1) if multiplicative else dev.max(axis=1)
    idx = _best_records(heights.astype(float), score)
    return [(tuple(int(v) for v in qs[i]), tuple(int(v) for v in near[i]), int(heights[i])) for i in idx]


def _box_vectors(n: int, q_max: int) -> np.ndarray:
    """Nonzero ``q`` with ``|q|_inf <= q_max``, one per sign pair."""
    if n == 1:
        return np.arange(1, q_max + 1).reshape(-1, 1)
    grids = np.meshgrid(*[np.arange(-q_max, q_max + 1)] * n, indexing="ij")
    qs = np.stack([g.ravel() for g in grids], axis=1)
    nz = qs[np.any(qs != 0, axis=1)]
    lead = nz[np.arange(len(nz)), np.argmax(nz != 0, axis=1)]
    return nz[lead > 0]


def _hyperbolic_vectors(n: int, q_max: int) -> np.ndarray:
    """Nonzero ``q`` with ``prod(|q_j| v 1) <= q_max``, one per sign pair."""
    vecs = [()]
    budgets = [q_max]
    for _ in range(n):
        nv, nb = [], []
        for v, b in zip(vecs, budgets):
            for x in range(-b, b + 1):
                nv.append(v + (x,))
                nb.append(b // max(abs(x), 1))
        vecs, budgets = nv, nb
    qs = np.array(vecs, dtype=np.int64)
    nz = qs[np.any(qs != 0, axis=1)]
    lead = nz[np.arange(len(nz)), np.argmax(nz != 0, axis=1)]
    return nz[lead > 0]


def _matrix_record(rows, q, p, height, multiplicative):
    if height < 2:
        return None
    devs = [abs(sum(a * v for a, v in zip(row, q)) - pi) for row, pi in zip(rows, p)]
    if multiplicative:
        if any(v == 0 for v in devs):
            return None
        num = sum(log_rational(v) for v in devs)
    else:
        m = max(devs)
        if m == 0:
            return None
        num = log_rational(m)
    return ApproximationRecord(height, q, p, math.exp(num) if num > -700 else 0.0, -num / math.log(height))


def _matrix_estimate(a, q_max: int, multiplicative: bool) -> ExponentEstimate:
    rows, prec = read_matrix(a)
    witness = _matrix_rational_witness(rows, prec, 12 if len(rows[0]) > 1 else 200)
    if witness is not None:
        return rational_sentinel(witness[0], witness[1], max(abs(v) for v in witness[0]))
    q_max = int(q_max)
    warnings = []
    if prec:
        cap = math.floor((4 * float(prec) * len(rows[0])) ** -0.5)
        if cap < q_max:
            warnings.append(f"input precision caps the search height at {cap}")
            q_max = cap
    raw = _matrix_scan(rows, q_max, multiplicative)
    recs = [r for r in (_matrix_record(rows, q, p, h, multiplicative) for q, p, h in raw) if r]
    return estimate_from_records(recs, q_max, warnings)


def omega_matrix(a, q_max: int) -> ExponentEstimate:
    """``-log|Aq - p| / log|q|`` over ``0 < |q|_inf <= q_max``."""
    return _matrix_estimate(a, q_max, multiplicative=False)


def omega_mult_matrix(a, q_max: int) -> ExponentEstimate:
    """Multiplicative matrix exponent over the hyperbolic region ``prod(|q_j| v 1) <= q_max``."""
    return _matrix_estimate(a, q_max, multiplicative=True)


def mult_matrix_dominates(a, simple: ExponentEstimate) -> bool:
    """Termwise ``omega_x >= (M/N) omega`` at the simple run's witnesses."""
    rows, _ = read_matrix(a)
    m, n = len(rows), len(rows[0])
    for r in simple.records:
        if r.exponent < 0:
            continue
        h = 1
        for v in r.q:
            h *= max(abs(v), 1)
        if h < 2:
            continue
        rec = _matrix_record(rows, r.q, r.p, h, True)
        if rec is not None and rec.exponent < Fraction(m, n) * r.exponent - 1e-12:
            return False
    return True


# --- rational simplex check --------------------------------------------------

def default_eps_power(d: int) -> Fraction:
    """``eps_d^(d+1) = 2^-(d+1) / (2^d (d+1)!)``, kept exact."""
    return Fraction(1, 2 ** (d + 1) * 2 ** d * math.factorial(d + 1))


@dataclass
class SimplexResult:
    height: int
    points: list
    kind: str  # "none", "point" or "hyperplane"
    plane: Hyperplane | None
    affine_rank: int

    def to_json(self) -> dict:
        return {
            "Q": self.height, "kind": self.kind, "affine_rank": self.affine_rank,
            "points": [[str(c) for c in p] for p in self.points],
            "plane": None if self.plane is None else {
                "normal": [str(c) for c in self.plane.normal], "offset": str(self.plane.offset)},
        }


class RationalSimplexViolation(ArithmeticError):
    """The rationals found span R^d, so the configured constant is too large."""

    def __init__(self, points):
        super().__init__(f"{len(points)} rationals span the whole space; eps_d too large")
        self.points = points


def simplex_height(rho, d: int, eps_power: Fraction | None = None) -> int:
    """Largest ``q`` with ``q^(d+1) <= eps_d^(d+1) rho^-d``."""
    eps_power = default_eps_power(d) if eps_power is None else Fraction(eps_power)
    return floor_rational_root(eps_power / to_fraction(rho) ** d, d + 1)


def simplex_hyperplane(y, rho, d: int | None = None, eps_power: Fraction | None = None,
                       max_points: int = 200_000) -> SimplexResult:
    """All reduced rationals ``p/q`` with ``q <= Q`` in the closed ball ``B(y, rho)``.

    Their affine hull is computed by exact rank.  A full-rank hull means
    the constant is wrong and raises :class:`RationalSimplexViolation`.
    """
    yv = [to_fraction(c) for c in (y.coords if isinstance(y, Point) else (y if isinstance(y, (list, tuple)) else [y]))]
    d = len(yv) if d is None else d
    if d != len(yv):
        raise ValueError("dimension mismatch")
    rho = to_fraction(rho)
    Q = simplex_height(rho, d, eps_power)
    points = []
    r2 = rho * rho
    for q in range(1, Q + 1):
        ranges = [range(math.ceil(q * (c - rho)), math.floor(q * (c + rho)) + 1) for c in yv]
        for p in itertools.product(*ranges):
            g = q
            for v in p:
                g = math.gcd(g, v)
            if g != 1:
                continue
            pt = tuple(Fraction(v, q) for v in p)
            if sum((a - b) ** 2 for a, b in zip(pt, yv)) <= r2:
                points.append(pt)
                if len(points) > max_points:
                    raise RuntimeError("too many rationals in the ball")
    if not points:
        return SimplexResult(Q, [], "none", None, -1)
    diffs = [[a - b for a, b in zip(p, points[0])] for p in points[1:]]
    rk = rank(diffs) if diffs else 0
    if rk >= d:
        raise RationalSimplexViolation(points)
    if diffs and rk > 0:
        normal = nullspace(diffs)[0]
    else:
        normal = [Fraction(int(i == 0)) for i in range(d)]
    plane = Hyperplane(tuple(normal), sum(a * b for a, b in zip(normal, points[0])), True)
    kind = "point" if len(points) == 1 else "hyperplane"
    return SimplexResult(Q, points, kind, plane, rk)


@dataclass
class SimplexSuiteReport:
    trials: int
    passed: int
    kinds: dict
    violations: list

    def to_json(self) -> dict:
        return {"trials": self.trials, "passed": self.passed, "kinds": dict(sorted(self.kinds.items())),
                "violations": self.violations}


def simplex_suite(trials: int, seed: int, dims: Sequence[int] = (1, 2), min_k: int = 2,
                  max_k: int = 16) -> SimplexSuiteReport:
    """Random ``(y, rho)`` with ``rho = 2^-k``; half the centres sit near a low-height rational."""
    import random

    rng = random.Random(seed)
    passed, kinds, bad = 0, {}, []
    for i in range(trials):
        d = dims[i % len(dims)]
        rho = Fraction(1, 2 ** rng.randint(min_k, max_k))
        if i % 2:
            y = tuple(Fraction(rng.randint(0, 10 ** 4), 10 ** 4) for _ in range(d))
        else:
            # start at a low-height rational so the ball is not trivially empty
            q = rng.randint(1, max(1, simplex_height(rho, d)))
            y = tuple(Fraction(rng.randint(0, q), q) + rho * Fraction(rng.randint(-500, 500), 1000) for _ in range(d))
        try:
            res = simplex_hyperplane(y, rho, d)
        except RationalSimplexViolation as exc:
            bad.append({"y": [str(c) for c in y], "rho": str(rho),
                        "points": [[str(c) for c in p] for p in exc.points]})
            continue
        passed += 1
        kinds[res.kind] = kinds.get(res.kind, 0) + 1
    return SimplexSuiteReport(trials, passed, kinds, bad)
