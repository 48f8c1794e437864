"""Flags of rational subspaces, eta-profiles and permissible balls.

Everything that decides an inclusion or a classification is exact.  Covolumes
are handled through their squares (rationals), and eta values are positive
surds ``base ** (1/root)`` so that the piecewise log-linear extension between
flag dimensions stays exact.

Balls live in the space of ``M x N`` matrices with the sup norm, intersected
with the support of the measure.  When the support is a coordinate box and
``min(M, N) == 1`` the Plucker point is affine in ``A``, so the covolume is a
convex function of ``A`` and the supremum over a ball is attained at a corner
of ``ball n box``.  Corners are therefore always part of the sample set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    FlowPoint, RationalFlowPoint, as_flow_point, in_W_kappa_t, orbit_shortest, s0_ray_point,
    s0_ray_rational,
)
from .exact import Surd, dot, integer_kernel, log_rational, mat_vec, solve, to_fraction
from .geometry import SUP, Ball, Point, balls_disjoint, four_r_select
from .lattice import shortest_vector_rows
from .plucker import RationalSubspace, f_tV_sq, transformed_basis

LOG2 = math.log(2)


class FlagError(ValueError):
    """A chain of subspaces that is not a flag, or an operation that needs a different flag."""


def exp_neg_norm(t, gamma=1) -> Surd:
    """``e^{-gamma |t|_inf}`` exactly for rational multipliers and rational ``gamma``."""
    t = as_flow_point(t)
    if not isinstance(t, RationalFlowPoint):
        raise TypeError("exact e-powers need rational flow multipliers")
    g = to_fraction(gamma)
    if g < 0:
        raise ValueError("gamma must be non-negative")
    smallest = min(min(r, 1 / r) for r in t.multipliers())
    return Surd(smallest ** g.numerator, g.denominator)


# --- constants -----------------------------------------------------------------------

def constants_C_lambda(m: int, n: int, base: int = 4) -> tuple[list[int], list[int]]:
    """``C_i = base^{i(M+N-i)}`` and ``lambda_i = 2 * 8^i`` for ``i = 0..M+N``."""
    d = m + n
    return [base ** (i * (d - i)) for i in range(d + 1)], [2 * 8 ** i for i in range(d + 1)]


# --- flags ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Flag:
    chain: tuple

    def __post_init__(self):
        chain = tuple(self.chain)
        if not chain:
            raise FlagError("a flag needs at least {0} and the whole space")
        amb = chain[0].ambient
        if chain[0].dim != 0 or chain[-1].dim != amb:
            raise FlagError("a flag must start at {0} and end at the whole space")
        for lo, hi in zip(chain, chain[1:]):
            if hi.ambient != amb or not hi.strictly_contains(lo):
                raise FlagError(f"{lo!r} is not strictly inside {hi!r}")
        object.__setattr__(self, "chain", chain)

    @classmethod
    def trivial(cls, ambient: int) -> "Flag":
        return cls((RationalSubspace.zero(ambient), RationalSubspace.whole(ambient)))

    @property
    def ambient(self) -> int:
        return self.chain[0].ambient

    @property
    def length(self) -> int:
        return len(self.chain) - 1

    @property
    def dims(self) -> list[int]:
        return [v.dim for v in self.chain]

    def is_maximal(self) -> bool:
        return self.length == self.ambient

    def __contains__(self, v: RationalSubspace) -> bool:
        return any(v == w for w in self.chain)

    def slot(self, v: RationalSubspace) -> int | None:
        """Index ``i`` with ``V_i < v < V_{i+1}`` strictly, if any."""
        for i, (lo, hi) in enumerate(zip(self.chain, self.chain[1:])):
            if lo.dim < v.dim < hi.dim and v.contains(lo) and hi.contains(v):
                return i
        return None

    def with_vertex(self, v: RationalSubspace) -> "Flag":
        i = self.slot(v)
        if i is None:
            raise FlagError(f"{v!r} is not addable")
        return Flag(self.chain[:i + 1] + (v,) + self.chain[i + 1:])

    def to_json(self) -> dict:
        return {"dims": self.dims, "chain": [v.to_json() for v in self.chain]}


def is_addable(flag: Flag, v: RationalSubspace) -> bool:
    return v not in flag and flag.slot(v) is not None


def addable_vertices(flag: Flag, pool: Sequence[RationalSubspace]) -> list[RationalSubspace]:
    return [v for v in pool if is_addable(flag, v)]


# --- eta profiles --------------------------------------------------------------

@dataclass
class EtaProfile:
    values: list  # Surd per dimension 0..M+N
    flag: Flag | None = None

    def __call__(self, j: int) -> Surd:
        return self.values[j]

    def scaled(self, c) -> "EtaProfile":
        return EtaProfile([v * to_fraction(c) for v in self.values], self.flag)

    def concavity_margins(self, factor: int = 8) -> dict:
        """For ``j`` off the flag dimensions: ``eta(j)^2 / (factor^2 eta(j-1) eta(j+1))``.

        A margin ``>= 1`` means the concavity inequality holds at ``j``.
        """
        skip = set(self.flag.dims) if self.flag is not None else set()
        out = {}
        for j in range(1, len(self.values) - 1):
            if j in skip:
                continue
            out[j] = self.values[j].power(2) / (self.values[j - 1] * self.values[j + 1] * (factor * factor))
        return out

    def is_concave(self, factor: int = 8) -> bool:
        return all(m >= 1 for m in self.concavity_margins(factor).values())

    def floats(self) -> list[float]:
        return [float(v) for v in self.values]

    def to_json(self) -> dict:
        return {"values": [v.to_json() for v in self.values]}


# --- balls with support samples ---------------------------------------------

def _corners(lo: Sequence[Fraction], hi: Sequence[Fraction]) -> list[tuple]:
    return list(itertools.product(*[sorted({a, b}) for a, b in zip(lo, hi)]))


@dataclass
class SupportBallSample:
    """Ball ``B_X(center, radius)`` in ``M x N`` matrices (sup norm, row-major).

    ``support_box`` is ``(lo, hi)`` when the support is that coordinate box;
    ``samples`` are extra support points (exact) used for every dilate.
    """

    m: int
    n: int
    center: tuple
    radius: Fraction
    support_box: tuple | None = None
    samples: tuple = ()

    def __post_init__(self):
        self.center = tuple(to_fraction(x) for x in self.center)
        self.radius = to_fraction(self.radius)
        if len(self.center) != self.m * self.n:
            raise ValueError("center has the wrong number of entries")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        if self.support_box is not None:
            lo, hi = self.support_box
            self.support_box = (tuple(map(to_fraction, lo)), tuple(map(to_fraction, hi)))
        self.samples = tuple(tuple(map(to_fraction, s)) for s in self.samples)

    @property
    def exact_sup(self) -> bool:
        return self.support_box is not None and min(self.m, self.n) == 1

    def with_ball(self, center, radius) -> "SupportBallSample":
        return SupportBallSample(self.m, self.n, center, radius, self.support_box, self.samples)

    def in_dilate(self, point, dilate=1) -> bool:
        r = self.radius * to_fraction(dilate)
        return max(abs(a - b) for a, b in zip(point, self.center)) <= r

    def points(self, dilate=1) -> list[tuple]:
        r = self.radius * to_fraction(dilate)
        pts = []
        if self.support_box is not None:
            blo, bhi = self.support_box
            lo = [max(c - r, b) for c, b in zip(self.center, blo)]
            hi = [min(c + r, b) for c, b in zip(self.center, bhi)]
            if all(a <= b for a, b in zip(lo, hi)):
                pts.extend(_corners(lo, hi))
        pts.extend(s for s in self.samples if self.in_dilate(s, dilate))
        if not pts:
            pts.append(self.center)
        return pts

    def matrix(self, point) -> list[list[Fraction]]:
        return [list(point[i * self.n:(i + 1) * self.n]) for i in range(self.m)]

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n, "center": [str(x) for x in self.center], "radius": str(self.radius),
                "support_box": None if self.support_box is None else [[str(x) for x in b] for b in self.support_box],
                "samples": len(self.samples), "exact_sup": self.exact_sup}


class _CovolumeCache:
    def __init__(self, t, m: int, n: int):
        self.t, self.m, self.n = t, m, n
        self._memo: dict = {}

    def f_sq(self, point: tuple, v: RationalSubspace) -> Fraction:
        key = (point, v.rows)
        hit = self._memo.get(key)
        if hit is None:
            a = [list(point[i * self.n:(i + 1) * self.n]) for i in range(self.m)]
            hit = f_tV_sq(a, self.t, v)
            self._memo[key] = hit
        return hit


def f_t_set_sq(sample: SupportBallSample, v: RationalSubspace, t, dilate=1, cache: _CovolumeCache | None = None) -> Fraction:
    """Largest squared covolume over the sample points of ``dilate * B``."""
    if cache is None:
        cache = _CovolumeCache(t, sample.m, sample.n)
    if v.dim == v.ambient:
        return Fraction(1)
    pts = sample.points(dilate)
    if not pts:
        raise ValueError("no sample points in the requested dilate")
    return max(cache.f_sq(p, v) for p in pts)


def f_t_set(sample: SupportBallSample, v: RationalSubspace, t, dilate=1) -> float:
    return math.sqrt(float(f_t_set_sq(sample, v, t, dilate)))


def approximable(f_sq: Fraction, eta_value: Surd) -> bool:
    """``f <= eta`` from ``f^2``."""
    return Surd.sqrt(f_sq) <= eta_value if f_sq > 0 else True


def classify_vertices(eta: EtaProfile, sample: SupportBallSample, pool: Sequence[RationalSubspace], t,
                      dilate=1, cache: _CovolumeCache | None = None) -> tuple[list, list]:
    """Split ``pool`` into approximable (``W``) and bad (``B``) vertices for ``dilate * B``."""
    cache = cache or _CovolumeCache(t, sample.m, sample.n)
    good, bad = [], []
    for v in pool:
        f_sq = f_t_set_sq(sample, v, t, dilate, cache)
        (good if approximable(f_sq, eta(v.dim)) else bad).append(v)
    return good, bad


# --- permissibility --------------------------------------------------------------

@dataclass
class PermissibleCertificate:
    flag: Flag
    eta: EtaProfile
    lam: int
    sample: SupportBallSample
    pool_height: int | None
    flag_margins: list  # 2 eta(dim) / f over 2B, one per flag member; >= 1 required
    addable_margins: list  # f over lam B / eta(dim), one per addable vertex; > 1 required

    @property
    def holds(self) -> bool:
        return all(m >= 1 for m in self.flag_margins) and all(m > 1 for m in self.addable_margins)

    def to_json(self) -> dict:
        return {"lambda": self.lam, "holds": self.holds, "pool_height": self.pool_height,
                "flag": self.flag.to_json(), "ball": self.sample.to_json(),
                "flag_margins": [float(m) for m in self.flag_margins],
                "addable_margins": [float(m) for m in self.addable_margins]}


def permissible_certificate(sample: SupportBallSample, flag: Flag, eta: EtaProfile, lam, pool, t,
                            pool_height: int | None = None, cache=None) -> PermissibleCertificate:
    cache = cache or _CovolumeCache(t, sample.m, sample.n)
    flag_m = []
    for v in flag.chain:
        f_sq = f_t_set_sq(sample, v, t, 2, cache)
        flag_m.append(eta(v.dim) * 2 / Surd.sqrt(f_sq))
    add_m = []
    for v in addable_vertices(flag, pool):
        f_sq = f_t_set_sq(sample, v, t, lam, cache)
        add_m.append(Surd.sqrt(f_sq) / eta(v.dim))
    return PermissibleCertificate(flag, eta, int(lam), sample, pool_height, flag_m, add_m)


# --- base case ----------------------------------------------------------------------

@dataclass
class BaseCaseResult:
    flag: Flag
    eta: EtaProfile
    certificate: PermissibleCertificate
    f_sq: dict  # rows -> squared sup covolume over 2 B0
    checks: dict
    c_reported: Fraction
    min_ratio_over_kappa: float | None
    klw_failures: list
    constants: list
    counterexamples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {"passed": self.passed, "checks": dict(self.checks), "flag": self.flag.to_json(),
                "eta": self.eta.to_json(), "certificate": self.certificate.to_json(),
                "c_reported": str(self.c_reported), "min_ratio_over_kappa": self.min_ratio_over_kappa,
                "klw_failures": [v.to_json() for v in self.klw_failures],
                "concavity_margins_8": {str(j): float(m) for j, m in self.eta.concavity_margins(8).items()},
                "counterexamples": self.counterexamples}


def _g_key(f_sq: Fraction, c: int, dim: int) -> tuple[Fraction, int]:
    """``g = log(f / C) / dim`` encoded as ``(f^2 / C^2, 2 dim)`` so that ``g = log(x) / e``."""
    return f_sq / (c * c), 2 * dim


def _g_cmp(a: tuple, b: tuple) -> int:
    # x_a^(1/e_a) vs x_b^(1/e_b)
    lhs, rhs = a[0] ** b[1], b[0] ** a[1]
    return (lhs > rhs) - (lhs < rhs)


def _theta_linear_eta(flag: Flag, f_sq: dict, consts: list[int]) -> EtaProfile:
    """Minimal extension with ``log(2 eta(j) / C_j)`` linear between flag dimensions."""
    amb = flag.ambient
    # X_j = (2 eta(j) / C_j)^2 is rational at flag dimensions
    anchor = {}
    for v in flag.chain:
        fs = Fraction(1) if v.dim in (0, amb) else f_sq[v.rows]
        anchor[v.dim] = fs / (consts[v.dim] ** 2)
    values: list = [None] * (amb + 1)
    dims = flag.dims
    for a, b in zip(dims, dims[1:]):
        k = b - a
        for j in range(a, b + 1):
            # (eta(j))^(2k) = (C_j^2/4)^k X_a^(b-j) X_b^(j-a)
            base = (Fraction(consts[j] ** 2, 4) ** k) * anchor[a] ** (b - j) * anchor[b] ** (j - a)
            values[j] = Surd(base, 2 * k)
    return EtaProfile(values, flag)


def base_case(sample: SupportBallSample, t, pool: Sequence[RationalSubspace], kappa=None,
              c_base: int = 4, pool_height: int | None = None) -> BaseCaseResult:
    """Greedy flag of minimal normalised covolume slopes over ``2 B0`` and its eta-profile."""
    m, n = sample.m, sample.n
    amb = m + n
    consts, _ = constants_C_lambda(m, n, c_base)
    cache = _CovolumeCache(t, m, n)
    whole = RationalSubspace.whole(amb)
    pool = [v for v in pool if 0 < v.dim < amb]
    f_sq = {v.rows: f_t_set_sq(sample, v, t, 2, cache) for v in pool}
    counterexamples = []
    if any(x == 0 for x in f_sq.values()):
        raise ValueError("degenerate covolume in the pool")

    klw_failures = []
    if kappa is not None:
        kap = to_fraction(kappa)
        klw_failures = [v for v in pool if f_sq[v.rows] < kap ** (2 * v.dim)]
        for v in klw_failures:
            counterexamples.append({"check": "klw_assumption", "vertex": v.to_json()})

    def key(v):
        return (Fraction(1), 2 * amb) if v.dim == amb else _g_key(f_sq[v.rows], consts[v.dim], v.dim)

    chain = [RationalSubspace.zero(amb)]
    while chain[-1].dim < amb:
        cur = chain[-1]
        cands = [v for v in pool if v.strictly_contains(cur)] + [whole]
        best = cands[0]
        for v in cands[1:]:
            if _g_cmp(key(v), key(best)) < 0:
                best = v
        chain.append(best)
    flag = Flag(tuple(chain))
    eta = _theta_linear_eta(flag, f_sq, consts)
    cert = permissible_certificate(sample, flag, eta, 2, pool, t, pool_height, cache)

    checks = {"i_permissible": cert.holds}
    # (ii) every flag member is bad at 2 B0
    bad_ok = True
    for v in flag.chain:
        fs = Fraction(1) if v.dim in (0, amb) else f_sq[v.rows]
        if not Surd.sqrt(fs) > eta(v.dim):
            bad_ok = False
            counterexamples.append({"check": "ii_flag_bad", "vertex": v.to_json()})
    checks["ii_flag_bad"] = bad_ok
    # (iii) eta(j) <= C_j / 2
    cap_ok = True
    for j in range(amb + 1):
        if not eta(j) <= Fraction(consts[j], 2):
            cap_ok = False
            counterexamples.append({"check": "iii_eta_cap", "j": j})
    checks["iii_eta_cap"] = cap_ok
    # (iv) slope of theta on each segment is at least g(V_{i+1}); with the KLW bound this gives
    # eta(j+1)/eta(j) >= c kappa with c = c_base^(-2(M+N-1))
    slope_ok = True
    dims = flag.dims
    for idx, (a, b) in enumerate(zip(dims, dims[1:])):
        top = flag.chain[idx + 1]
        fs = Fraction(1) if b == amb else f_sq[top.rows]
        g_surd = Surd(fs / consts[b] ** 2, 2 * b)  # e^{g(V_{i+1})}
        for j in range(a, b):
            step = (eta(j + 1) / consts[j + 1]) / (eta(j) / consts[j])
            if not step >= g_surd:
                slope_ok = False
                counterexamples.append({"check": "iv_theta_slope", "j": j})
    checks["iv_theta_slope"] = slope_ok
    # g(V) >= log(kappa) - (M+N-1) log(c_base) under the covolume floor, hence this c
    c_rep = Fraction(1, c_base ** (2 * (amb - 1)))
    if kappa is not None:
        kap = Surd(min(to_fraction(kappa), Fraction(1)))
    else:
        # the largest kappa for which the floor holds on the pool
        kap = min([Surd(f_sq[v.rows], 2 * v.dim) for v in pool] + [Surd(1)])
    ratios = [eta(j + 1) / eta(j) for j in range(amb)]
    min_ratio = min(float(r) for r in ratios) / float(kap)
    ratio_ok = True
    for j, r in enumerate(ratios):
        if not r >= kap * c_rep:
            ratio_ok = False
            counterexamples.append({"check": "iv_ratio", "j": j})
    checks["iv_ratio"] = ratio_ok or bool(klw_failures)
    for ce in counterexamples:
        ce.setdefault("ball", sample.to_json())
    return BaseCaseResult(flag, eta, cert, f_sq, checks, c_rep, min_ratio, klw_failures, consts, counterexamples)


# --- inductive step ---------------------------------------------------------------

def _dyadic(k: int) -> Fraction:
    return Fraction(2) ** k


@dataclass
class InductiveStepResult:
    vertex: RationalSubspace
    radius: Fraction
    radii: dict  # rows -> rho_{A,V}
    flag: Flag
    certificate: PermissibleCertificate
    checks: dict
    rx3t_bound: Surd
    counterexamples: list = field(default_factory=list)
    witness: RationalSubspace | None = None

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {"passed": self.passed, "checks": dict(self.checks), "vertex": self.vertex.to_json(),
                "radius": str(self.radius), "radii": {str([list(r) for r in k]): str(v) for k, v in self.radii.items()},
                "flag": self.flag.to_json(), "certificate": self.certificate.to_json(),
                "rx3t_bound": self.rx3t_bound.to_json(), "counterexamples": self.counterexamples,
                "witness": None if self.witness is None else self.witness.to_json()}


def rho_for_vertex(sample: SupportBallSample, point: tuple, v: RationalSubspace, eta: EtaProfile, lam, t,
                   cache: _CovolumeCache, max_halvings: int = 256) -> Fraction:
    """Smallest dyadic ``rho`` with ``V`` bad on ``B_X(point, 8 lam rho)``; zero if it never fails."""
    lam = to_fraction(lam)
    level = eta(v.dim)

    def bad(rho) -> bool:
        s = sample.with_ball(point, 8 * lam * rho)
        return not approximable(f_t_set_sq(s, v, t, 1, cache), level)

    if bad(Fraction(0)):
        return Fraction(0)
    # the support is bounded, so a large enough ball is as bad as it ever gets
    k = max(0, math.ceil(math.log2(float(sample.radius) + 1)) + 1)
    while not bad(_dyadic(k)):
        k += 1
        if k > 64:
            raise ValueError(f"{v!r} is approximable on every ball around the point")
    # badness is monotone in rho, so scan down to the first good level
    for _ in range(max_halvings):
        if not bad(_dyadic(k - 1)):
            return _dyadic(k)
        k -= 1
    return Fraction(0)


def minkowski_vertex(flag: Flag, point: tuple, t, m: int, n: int) -> RationalSubspace:
    """``V_i + R v`` for ``v`` in ``Z^{M+N} n V_{i+1}`` whose image is closest to ``g_t u_A V_i``.

    ``i`` is the first gap of the flag of size at least two.  This is the
    addable vertex whose covolume the Minkowski bound controls.
    """
    gaps = [i for i, (lo, hi) in enumerate(zip(flag.chain, flag.chain[1:])) if hi.dim - lo.dim >= 2]
    if not gaps:
        raise FlagError("every gap of the flag has size one")
    lo, hi = flag.chain[gaps[0]], flag.chain[gaps[0] + 1]
    big = [list(map(Fraction, r)) for r in hi.rows]
    gram = [[dot(u, v) for v in big] for u in big]
    coeffs = []
    for x in lo.rows:
        c = solve(gram, [dot(b, x) for b in big])
        if any(ci.denominator != 1 for ci in c):
            raise AssertionError("flag members are not saturated")
        coeffs.append([int(ci) for ci in c])
    # columns of the unimodular transform beyond the echelon block complete a basis of the quotient
    comp = integer_kernel(coeffs, len(big)) if coeffs else [[int(i == j) for j in range(len(big))] for i in range(len(big))]
    comp_vecs = [[sum(k[j] * big[j][c] for j in range(len(big))) for c in range(flag.ambient)] for k in comp]
    a = [list(point[i * n:(i + 1) * n]) for i in range(m)]
    from .dynamics import lattice_basis
    g = lattice_basis(a, t)
    low_img = [mat_vec(g, list(map(Fraction, r))) for r in lo.rows]
    ortho = []
    for w in low_img:
        for e in ortho:
            w = [x - dot(w, e) / dot(e, e) * y for x, y in zip(w, e)]
        ortho.append(w)

    def project(w):
        for e in ortho:
            w = [x - dot(w, e) / dot(e, e) * y for x, y in zip(w, e)]
        return w

    proj = [project(mat_vec(g, v)) for v in comp_vecs]
    sv = shortest_vector_rows(proj)
    v = [sum(z * cv[c] for z, cv in zip(sv.coefficients, comp_vecs)) for c in range(flag.ambient)]
    return RationalSubspace.span([list(r) for r in lo.rows] + [v], flag.ambient)


def inductive_step(sample: SupportBallSample, flag: Flag, eta: EtaProfile, lam, point, pool, t,
                   pool_height: int | None = None, check_permissible: bool = True,
                   minkowski_witness: bool = True) -> InductiveStepResult:
    """Add the vertex that goes bad on the largest dyadic scale around ``point``."""
    if flag.is_maximal():
        raise FlagError("the flag is already maximal")
    point = tuple(to_fraction(x) for x in point)
    if not sample.in_dilate(point, 1):
        raise ValueError("the point is not in the ball")
    lam = to_fraction(lam)
    cache = _CovolumeCache(t, sample.m, sample.n)
    amb = flag.ambient
    counterexamples = []
    if check_permissible:
        pre = permissible_certificate(sample, flag, eta, lam, pool, t, pool_height, cache)
        if not pre.holds:
            counterexamples.append({"check": "input_permissible", "certificate": pre.to_json()})
    cands = addable_vertices(flag, pool)
    witness = None
    if minkowski_witness:
        # the truncated pool may miss the vertex the radius floor relies on
        witness = minkowski_vertex(flag, point, t, sample.m, sample.n)
        if all(witness != v for v in cands):
            cands.append(witness)
    if not cands:
        raise FlagError("no addable vertex in the pool; raise the pool height")
    radii = {v.rows: rho_for_vertex(sample, point, v, eta, lam, t, cache) for v in cands}
    best = cands[0]
    for v in cands[1:]:
        if radii[v.rows] > radii[best.rows]:
            best = v
    rho_a = radii[best.rows]
    new_flag = flag.with_vertex(best)
    new_ball = sample.with_ball(point, rho_a)

    checks = {}
    f_big = f_t_set_sq(new_ball, best, t, 8 * lam, cache)
    checks["vertex_bad"] = not approximable(f_big, eta(best.dim))
    dist = max(abs(a - b) for a, b in zip(point, sample.center))
    checks["containment"] = dist + 2 * rho_a <= 2 * sample.radius
    bound = exp_neg_norm(t, 2) * Fraction(1, 2 ** amb)
    checks["radius_floor"] = rho_a > 0 and Surd(8 * lam * rho_a) >= bound
    cert = permissible_certificate(new_ball, new_flag, eta, 8 * lam, pool, t, pool_height, cache)
    checks["new_permissible"] = cert.holds
    for name, ok in checks.items():
        if not ok:
            counterexamples.append({"check": name, "point": [str(x) for x in point], "ball": sample.to_json(),
                                    "radius": str(rho_a), "vertex": best.to_json()})
    return InductiveStepResult(best, rho_a, radii, new_flag, cert, checks, bound, counterexamples, witness)


# --- vertex extraction -----------------------------------------------------------

@dataclass
class ExtractionResult:
    vertex: RationalSubspace
    index: int
    shortest: tuple
    lhs_sq: Fraction
    rhs: Surd
    sub_invariant: bool
    holds: bool
    counterexamples: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"holds": self.holds, "sub_invariant": self.sub_invariant, "index": self.index,
                "vertex": self.vertex.to_json(), "shortest": [int(x) for x in self.shortest],
                "lhs": math.sqrt(float(self.lhs_sq)), "rhs": float(self.rhs), "counterexamples": self.counterexamples}


def extract_small_vertex(flag: Flag, eta: EtaProfile, sample: SupportBallSample, point, t, gamma, kappa) -> ExtractionResult:
    """A flag member ``V`` with ``f_{t,V}(A) <= e^{-gamma|t|} kappa eta(dim V - 1)``."""
    if not flag.is_maximal():
        raise FlagError("extraction needs a maximal flag")
    point = tuple(to_fraction(x) for x in point)
    if not sample.in_dilate(point, 1):
        raise ValueError("the point is not in the sample ball")
    cache = _CovolumeCache(t, sample.m, sample.n)
    for v in flag.chain:
        if not approximable(f_t_set_sq(sample, v, t, 1, cache), eta(v.dim)):
            raise FlagError(f"{v!r} is not approximable on the sample set")
    a = sample.matrix(point)
    if not in_W_kappa_t(a, kappa, t, gamma):
        raise ValueError("the point is not in W_{kappa,t}")
    sv = orbit_shortest(a, t)
    v = list(sv.coefficients)
    idx = max(i for i, w in enumerate(flag.chain) if not w.contains_vector(v))
    lo, hi = flag.chain[idx], flag.chain[idx + 1]
    lhs_sq = cache.f_sq(point, hi)
    low_sq = cache.f_sq(point, lo)
    sub = lhs_sq <= sv.length_sq * low_sq
    rhs = exp_neg_norm(t, gamma) * to_fraction(kappa) * eta(hi.dim - 1)
    holds = Surd.sqrt(lhs_sq) <= rhs
    ces = []
    if not (holds and sub):
        ces.append({"point": [str(x) for x in point], "vertex": hi.to_json(), "sub_invariant": sub, "holds": holds})
    return ExtractionResult(hi, idx + 1, tuple(v), lhs_sq, rhs, sub, holds and sub, ces)


# --- randomized exact suite ------------------------------------------------------

def random_instance(rng, m: int = 1, n: int = 1, max_den: int = 16, max_k: int = 6):
    """Random ball in ``[0,1]^{MN}`` with a power-of-two flow."""
    center = tuple(Fraction(rng.randint(0, max_den), max_den) for _ in range(m * n))
    radius = Fraction(1, 2 ** rng.randint(1, 4))
    k = rng.randint(1, max_k)
    t, _ = s0_ray_rational(k, m, n)
    box = ((Fraction(0),) * (m * n), (Fraction(1),) * (m * n))
    return SupportBallSample(m, n, center, radius, box), t


def descend_to_maximal(sample: SupportBallSample, t, pool, point, c_base: int = 4, pool_height=None):
    """Base case at ``sample`` then inductive steps around ``point`` until the flag is maximal."""
    base = base_case(sample, t, pool, c_base=c_base, pool_height=pool_height)
    _, lambdas = constants_C_lambda(sample.m, sample.n)
    flag, ball, steps = base.flag, sample, []
    while not flag.is_maximal():
        lam = lambdas[flag.length]
        step = inductive_step(ball, flag, base.eta, lam, point, pool, t, pool_height)
        steps.append(step)
        flag, ball = step.flag, ball.with_ball(point, step.radius)
        if step.radius == 0:
            break
    return base, steps, flag, ball


# --- Monte Carlo decay of W_{kappa, t} --------------------------------------------

def _gauss_shortest_sq(b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """Vectorised Lagrange-Gauss reduction of 2-dimensional lattices; returns ``lambda_1^2``."""
    b1, b2 = b1.copy(), b2.copy()
    n1 = (b1 * b1).sum(1)
    n2 = (b2 * b2).sum(1)
    swap = n2 < n1
    b1[swap], b2[swap] = b2[swap].copy(), b1[swap].copy()
    for _ in range(200):
        n1 = (b1 * b1).sum(1)
        mu = np.rint((b1 * b2).sum(1) / n1)
        b2 = b2 - mu[:, None] * b1
        n2 = (b2 * b2).sum(1)
        swap = n2 < n1
        if not swap.any():
            break
        b1[swap], b2[swap] = b2[swap].copy(), b1[swap].copy()
    return np.minimum((b1 * b1).sum(1), (b2 * b2).sum(1))


def w_membership_float(points: np.ndarray, m: int, n: int, t: FlowPoint, gamma: float, kappa: float) -> np.ndarray:
    """Float membership in ``W_{kappa,t}`` for many matrices (rows of ``points``)."""
    thresh_sq = (math.exp(-gamma * t.sup_norm()) * kappa) ** 2
    if m == 1 and n == 1:
        e1, e2 = math.exp(t.t[0]), math.exp(t.t[1])
        a = points[:, 0]
        b1 = np.stack([np.full_like(a, e1), np.zeros_like(a)], 1)
        b2 = np.stack([e1 * a, np.full_like(a, e2)], 1)
        return _gauss_shortest_sq(b1, b2) <= thresh_sq
    out = np.zeros(len(points), bool)
    for i, p in enumerate(points):
        a = [[Fraction(float(p[r * n + c])) for c in range(n)] for r in range(m)]
        sv = orbit_shortest(a, t)
        out[i] = float(sv.length_sq) <= thresh_sq
    return out


@dataclass
class DecayExperiment:
    taus: list
    hits: list
    n_samples: int
    fractions: list
    epsilon_hat: float | None
    epsilon_band: tuple | None
    decays: bool
    resolution_only: bool
    klw_checks: dict
    covering_demo: dict | None = None
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"taus": self.taus, "hits": self.hits, "n_samples": self.n_samples, "fractions": self.fractions,
                "epsilon_hat": self.epsilon_hat, "epsilon_band": list(self.epsilon_band) if self.epsilon_band else None,
                "decays": self.decays, "resolution_only": self.resolution_only,
                "klw_checks": self.klw_checks, "covering_demo": self.covering_demo, "warnings": self.warnings}

    def csv_rows(self) -> list[dict]:
        return [{"tau": t, "hits": h, "fraction": f} for t, h, f in zip(self.taus, self.hits, self.fractions)]


def _fit_decay(taus, hits, n):
    """Least squares of ``log(fraction)`` on ``tau`` over taus with hits; returns (eps, band)."""
    xs = [t for t, h in zip(taus, hits) if h > 0]
    ys = [math.log(h / n) for h, t in zip(hits, taus) if h > 0]
    if len(xs) < 2:
        return None, None
    x, y = np.array(xs, float), np.array(ys, float)
    slope, icpt = np.polyfit(x, y, 1)
    if len(xs) > 2:
        resid = y - (slope * x + icpt)
        se = math.sqrt(float((resid ** 2).sum()) / (len(xs) - 2) / float(((x - x.mean()) ** 2).sum()))
    else:
        se = 0.0
    return -float(slope), (-float(slope) - 2 * se, -float(slope) + 2 * se)


def klw_check(box_sample: SupportBallSample, t, pool, kappa) -> bool:
    """``sup_{2 B0} f_{t,V} >= kappa^{dim V}`` on the pool."""
    kap = to_fraction(kappa)
    cache = _CovolumeCache(t, box_sample.m, box_sample.n)
    return all(f_t_set_sq(box_sample, v, t, 2, cache) >= kap ** (2 * v.dim) for v in pool)


def covering_demo(sample: SupportBallSample, t, pool, points, pool_height=None) -> dict:
    """One level of the tree: balls ``B_A`` around ``points``, then a disjoint-quarter selection."""
    base = base_case(sample, t, pool, pool_height=pool_height)
    if base.flag.is_maximal():
        return {"flag_maximal": True, "children": 0}
    _, lambdas = constants_C_lambda(sample.m, sample.n)
    lam = lambdas[base.flag.length]
    balls, passes = [], 0
    for p in points:
        step = inductive_step(sample, base.flag, base.eta, lam, p, pool, t, pool_height, check_permissible=False)
        passes += step.passed
        if step.radius > 0:
            balls.append(Ball(Point.of(*p, exact=True), step.radius, SUP))
    kept = four_r_select(balls)
    quarter = [Ball(b.center, b.radius / 4, SUP) for b in kept]
    disjoint = all(balls_disjoint(x, y) for x, y in itertools.combinations(quarter, 2))
    covered = all(any(k.contains(b.center) for k in kept) for b in balls)
    return {"flag_maximal": False, "points": len(points), "step_passes": passes, "children": len(kept),
            "quarters_disjoint": disjoint, "centres_covered": covered}


def measure_decay_experiment(mu, box_lo, box_hi, gamma: float, taus: Sequence[float],
                             kappa_rule: Callable[[float], float] | None = None, n_samples: int = 10_000,
                             seed: int = 20240601, m: int = 1, n: int = 1, pool=None,
                             demo_points: int = 0) -> DecayExperiment:
    """Fraction of ``mu``-samples in ``B0 = box`` lying in ``W_{kappa,t}`` along the ray ``t(tau)``.

    ``mu`` needs ``sample(rng, k)`` returning an ``(k, M*N)`` array.  Samples
    outside the box are rejected.
    """
    rng = np.random.default_rng(seed)
    kappa_rule = kappa_rule or (lambda tau: 1.0)
    lo, hi = np.asarray(box_lo, float), np.asarray(box_hi, float)
    pts = np.zeros((0, m * n))
    draws = 0
    while len(pts) < n_samples:
        batch = np.asarray(mu.sample(rng, max(1024, n_samples)), float).reshape(-1, m * n)
        draws += len(batch)
        keep = np.all((batch >= lo) & (batch <= hi), axis=1)
        pts = np.concatenate([pts, batch[keep]])
        if draws > 100 * n_samples and len(pts) == 0:
            raise ValueError("the measure gives no mass to the box")
    pts = pts[:n_samples]
    warnings = []
    hits, fracs, klw = [], [], {}
    box_sample = SupportBallSample(m, n, tuple(Fraction((a + b) / 2) for a, b in zip(lo, hi)),
                                   Fraction(float(max(hi - lo)) / 2), (tuple(map(Fraction, lo)), tuple(map(Fraction, hi))))
    for tau in taus:
        t = s0_ray_point(float(tau), m, n)
        kap = float(kappa_rule(tau))
        inside = w_membership_float(pts, m, n, t, gamma, kap)
        h = int(inside.sum())
        hits.append(h)
        fracs.append(h / n_samples)
        if pool is not None:
            ok = klw_check(box_sample, t, pool, Fraction(kap))
            klw[str(tau)] = ok
            if not ok:
                warnings.append(f"covolume floor kappa^dim fails on the pool at tau={tau}")
    eps, band = _fit_decay(list(taus), hits, n_samples)
    resolution_only = all(h == 0 for h in hits)
    if resolution_only:
        warnings.append(f"no hits at any tau; the fraction is below 1/{n_samples}")
    decays = eps is not None and band is not None and band[0] > 0
    demo = None
    if demo_points and pool is not None:
        k = max(1, int(round(float(taus[len(taus) // 2]) / (m * n * LOG2))))
        t_exact, _ = s0_ray_rational(k, m, n)
        picks = [tuple(Fraction(float(x)).limit_denominator(1 << 20) for x in p) for p in pts[:demo_points]]
        demo = covering_demo(box_sample, t_exact, pool, picks)
    return DecayExperiment([float(x) for x in taus], hits, n_samples, fracs, eps, band, decays, resolution_only,
                           klw, demo, warnings)


# --- exact suites -----------------------------------------------------------------

def _kappa_for(a, t, gammas=(Fraction(1), Fraction(1, 2), Fraction(1, 4), Fraction(1, 8), Fraction(1, 16))):
    """Largest ``gamma`` in the list and tightest dyadic ``kappa <= 1`` with ``A`` in ``W_{kappa,t}``."""
    length_sq = orbit_shortest(a, t).length_sq
    for g in gammas:
        floor = exp_neg_norm(t, g)
        if not Surd.sqrt(length_sq) <= floor:
            continue
        j = 0
        while Surd.sqrt(length_sq) <= floor * Fraction(1, 2 ** (j + 1)):
            j += 1
        return g, Fraction(1, 2 ** j)
    return None


@dataclass
class FlagSuiteReport:
    runs: int
    base_passed: int
    inductive_applicable: int
    inductive_passed: int
    extraction_runs: int
    extraction_passed: int
    concave_base_flags: int
    counterexamples: list

    @property
    def passed(self) -> bool:
        return (self.base_passed == self.runs and self.inductive_passed == self.inductive_applicable
                and self.extraction_passed == self.extraction_runs)

    def to_json(self) -> dict:
        return {"runs": self.runs, "base_passed": self.base_passed,
                "inductive_applicable": self.inductive_applicable, "inductive_passed": self.inductive_passed,
                "extraction_runs": self.extraction_runs, "extraction_passed": self.extraction_passed,
                "concave_base_flags": self.concave_base_flags, "passed": self.passed,
                "counterexamples": self.counterexamples}


def flag_suite(runs: int, seed: int, m: int = 1, n: int = 1, height: int = 2, max_k: int = 8,
               c_base: int = 4) -> FlagSuiteReport:
    """Base case, one inductive step and extraction on random exact instances."""
    import random

    from .plucker import enumerate_vertices

    rng = random.Random(seed)
    pool = enumerate_vertices(m, n, height)
    _, lambdas = constants_C_lambda(m, n)
    base_ok = ind_app = ind_ok = ext_runs = ext_ok = concave = 0
    ces = []
    while ext_runs < runs:
        sample, t = random_instance(rng, m, n, max_k=max_k)
        offs = [Fraction(rng.randint(-8, 8), 8) * sample.radius for _ in sample.center]
        point = tuple(min(max(c + o, Fraction(0)), Fraction(1)) for c, o in zip(sample.center, offs))
        a = sample.matrix(point)
        picked = _kappa_for(a, t)
        if picked is None:
            continue  # extraction needs A in W_{kappa,t} for some kappa <= 1
        gamma, kappa = picked
        base = base_case(sample, t, pool, c_base=c_base, pool_height=height)
        base_ok += base.passed
        concave += base.eta.is_concave(8)
        ces.extend(base.counterexamples)
        flag, ball = base.flag, sample
        if not flag.is_maximal():
            ind_app += 1
            good = True
            while not flag.is_maximal():
                step = inductive_step(ball, flag, base.eta, lambdas[flag.length], point, pool, t, height)
                good = good and step.passed
                ces.extend(step.counterexamples)
                flag, ball = step.flag, ball.with_ball(point, step.radius)
            ind_ok += good
        # permissibility gives F inside W(2 eta, 2 B) for the final ball
        ext = extract_small_vertex(flag, base.eta.scaled(2), ball.with_ball(ball.center, 2 * ball.radius),
                                   point, t, gamma, kappa)
        ext_runs += 1
        ext_ok += ext.holds
        ces.extend(ext.counterexamples)
    return FlagSuiteReport(ext_runs, base_ok, ind_app, ind_ok, ext_runs, ext_ok, concave, ces)
