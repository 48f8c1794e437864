"""Exterior algebra over the rationals: Plücker points, covolumes, ``F_{t,V}``.

Index sets are sorted tuples of 1-based coordinates.  ``E`` is the span of
all ``e_I`` with ``#I = N`` except the "upper block" ``I = (M+1, ..., M+N)``;
points of ``E`` are dicts keyed by such ``I``.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .diophantine import ExponentEstimate, INF, estimate_from_records, final_third_max, read_matrix
from .dynamics import SChain, as_flow_point, delta_of_length_sq, orbit_shortest
from .exact import (
    dot, gram_det, hnf_rows, log_rational, mat_mul, mat_vec, primitive, rank, saturate, solve,
    to_fraction, transpose,
)


# --- wedge vectors -------------------------------------------------------------

@dataclass(frozen=True)
class WedgeVector:
    degree: int
    coords: tuple  # sorted ((I, value), ...) with nonzero values

    @classmethod
    def from_dict(cls, degree: int, d: dict) -> "WedgeVector":
        items = []
        for k, v in d.items():
            if len(k) != degree:
                raise ValueError(f"index set {k} has the wrong size for degree {degree}")
            if v != 0:
                items.append((tuple(k), v))
        return cls(degree, tuple(sorted(items)))

    def as_dict(self) -> dict:
        return dict(self.coords)

    def __getitem__(self, index) -> Fraction:
        return self.as_dict().get(tuple(index), Fraction(0))

    def norm_sq(self):
        return sum((v * v for _, v in self.coords), Fraction(0))

    def norm(self) -> float:
        return math.sqrt(float(self.norm_sq()))

    def is_zero(self) -> bool:
        return not self.coords

    def __add__(self, other):
        d = self.as_dict()
        for k, v in other.coords:
            d[k] = d.get(k, 0) + v
        return WedgeVector.from_dict(self.degree, d)

    def __sub__(self, other):
        return self + WedgeVector(other.degree, tuple((k, -v) for k, v in other.coords))

    def to_json(self) -> dict:
        return {"degree": self.degree,
                "coords": [{"index": list(k), "value": str(v)} for k, v in self.coords]}


def _det(rows):
    from .exact import det
    return det(rows)


def wedge(vectors: Sequence[Sequence]) -> WedgeVector:
    """``v_1 ^ ... ^ v_k``: coordinate ``I`` is the minor on rows ``I``."""
    vs = [[to_fraction(x) for x in v] for v in vectors]
    k = len(vs)
    n = len(vs[0])
    if not 1 <= k <= n:
        raise ValueError("need between 1 and n vectors")
    d = {}
    for idx in itertools.combinations(range(n), k):
        m = [[vs[j][i] for j in range(k)] for i in idx]
        val = _det(m)
        if val:
            d[tuple(i + 1 for i in idx)] = val
    return WedgeVector.from_dict(k, d)


def e_coordinates(m: int, n: int) -> list[tuple]:
    """Index sets of ``E``: all ``N``-subsets except the upper block."""
    upper = tuple(range(m + 1, m + n + 1))
    return [I for I in itertools.combinations(range(1, m + n + 1), n) if I != upper]


def plucker_embed(a) -> dict:
    """``psi(A) = wedge_j (A e_j + e_{M+j}) - wedge_j e_{M+j}`` as a dict over ``E``."""
    rows, _ = read_matrix(a)
    m, n = len(rows), len(rows[0])
    cols = [[rows[i][j] for i in range(m)] + [Fraction(int(k == j)) for k in range(n)] for j in range(n)]
    w = wedge(cols).as_dict()
    upper = tuple(range(m + 1, m + n + 1))
    w[upper] = w.get(upper, Fraction(0)) - 1
    if w[upper] != 0:
        raise AssertionError("psi(A) left E; the upper-block coefficient must vanish")
    del w[upper]
    return {I: w.get(I, Fraction(0)) for I in e_coordinates(m, n)}


def covolume_sq(vectors: Sequence[Sequence]) -> Fraction:
    """Gram determinant; zero for dependent vectors."""
    return gram_det([[to_fraction(x) for x in v] for v in vectors])


# --- rational subspaces ----------------------------------------------------------

@dataclass(frozen=True)
class RationalSubspace:
    """Integral basis (rows) in Hermite normal form; equal subspaces compare equal."""

    rows: tuple
    ambient: int

    @classmethod
    def span(cls, vectors: Iterable[Sequence], ambient: int | None = None) -> "RationalSubspace":
        vecs = [list(map(to_fraction, v)) for v in vectors]
        if ambient is None:
            ambient = len(vecs[0])
        ints = []
        for v in vecs:
            den = 1
            for x in v:
                den = den * x.denominator // math.gcd(den, x.denominator)
            ints.append([int(x * den) for x in v])
        basis = saturate(ints, ambient)
        return cls(tuple(tuple(r) for r in basis), ambient)

    @classmethod
    def zero(cls, ambient: int) -> "RationalSubspace":
        return cls((), ambient)

    @classmethod
    def whole(cls, ambient: int) -> "RationalSubspace":
        return cls(tuple(tuple(int(i == j) for j in range(ambient)) for i in range(ambient)), ambient)

    @classmethod
    def coordinate(cls, indices: Iterable[int], ambient: int) -> "RationalSubspace":
        """Span of ``e_i`` for the given 1-based indices."""
        idx = sorted(set(indices))
        if not idx:
            return cls.zero(ambient)
        return cls.span([[int(j == i - 1) for j in range(ambient)] for i in idx], ambient)

    @property
    def dim(self) -> int:
        return len(self.rows)

    def contains_vector(self, v: Sequence) -> bool:
        if not self.rows:
            return not any(v)
        return rank([list(r) for r in self.rows] + [list(v)]) == self.dim

    def contains(self, other: "RationalSubspace") -> bool:
        return all(self.contains_vector(r) for r in other.rows)

    def strictly_contains(self, other: "RationalSubspace") -> bool:
        return self.dim > other.dim and self.contains(other)

    def comparable(self, other: "RationalSubspace") -> bool:
        return self.contains(other) or other.contains(self)

    def tau(self) -> WedgeVector:
        """Wedge of the integral basis (the subspace's Plücker vector)."""
        if not self.rows:
            return WedgeVector.from_dict(0, {(): Fraction(1)})
        return wedge(self.rows)

    def to_json(self) -> dict:
        return {"dim": self.dim, "basis": [list(r) for r in self.rows]}

    def __repr__(self):
        return f"V{[list(r) for r in self.rows]}"


def primitive_vectors(ambient: int, height: int) -> list[tuple]:
    """Primitive integer vectors with entries in ``[-H, H]``, one per sign pair."""
    out = []
    for v in itertools.product(range(-height, height + 1), repeat=ambient):
        if any(v) and primitive(v) == tuple(v):
            out.append(tuple(v))
    return out


class VertexBudgetError(RuntimeError):
    pass


def enumerate_vertices(m: int, n: int, height: int, budget: int = 300_000) -> list[RationalSubspace]:
    """Proper nonzero subspaces spanned by primitive vectors of height ``<= H``."""
    if height < 1:
        raise ValueError("H must be >= 1")
    amb = m + n
    prims = primitive_vectors(amb, height)
    seen: dict = {}
    for v in range(1, amb):
        count = math.comb(len(prims), v)
        if count > budget:
            raise VertexBudgetError(f"{count} spanning sets of size {v} exceed the budget {budget}")
        for combo in itertools.combinations(prims, v):
            if rank([list(c) for c in combo]) < v:
                continue
            sub = RationalSubspace.span(combo, amb)
            seen.setdefault(sub.rows, sub)
    for v in range(1, amb):
        for idx in itertools.combinations(range(1, amb + 1), v):
            sub = RationalSubspace.coordinate(idx, amb)
            seen.setdefault(sub.rows, sub)
    return sorted(seen.values(), key=lambda s: (s.dim, s.rows))


def random_vertex(ambient: int, dim: int, height: int, rng: random.Random) -> RationalSubspace:
    """Span of ``dim`` random independent primitive vectors of height ``<= H``."""
    while True:
        vecs = []
        for _ in range(dim):
            while True:
                v = [rng.randint(-height, height) for _ in range(ambient)]
                if any(v):
                    vecs.append(v)
                    break
        if rank(vecs) == dim:
            return RationalSubspace.span(vecs, ambient)


# --- F_{t,V} -------------------------------------------------------------------

def _sort_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (0 if it has repeats)."""
    s = list(seq)
    if len(set(s)) < len(s):
        return 0
    sign = 1
    for i in range(len(s)):
        for j in range(i + 1, len(s)):
            if s[i] > s[j]:
                sign = -sign
    return sign


def epsilon_sign(I: tuple, J: tuple, m: int, n: int) -> int:
    """The sign ``eps_{IJ}`` linking ``u_A e_I`` to ``psi(A)_{K(I,J)}``.

    ``R = I \\ J`` (upper indices being replaced) and ``S = J \\ I`` (lower
    indices replacing them).  The first factor sorts ``I`` after putting
    ``S`` into the slots of ``R`` in order; the second is the sign of
    ``(R, upper \\ R)`` as a permutation of the upper block, which is the
    Laplace sign of the minor ``psi(A)_K``.
    """
    R = sorted(set(I) - set(J))
    S = sorted(set(J) - set(I))
    replace = dict(zip(R, S))
    first = _sort_sign([replace.get(i, i) for i in I])
    upper = list(range(m + 1, m + n + 1))
    rest = [u for u in upper if u not in R]
    second = _sort_sign(R + rest)
    return first * second


def k_index(I: tuple, J: tuple, m: int, n: int) -> tuple:
    """``K(I,J) = ({1..M} n (J \\ I)) u ({M+1..M+N} \\ (I \\ J))``."""
    lower = set(range(1, m + 1))
    upper = set(range(m + 1, m + n + 1))
    return tuple(sorted((lower & (set(J) - set(I))) | (upper - (set(I) - set(J)))))


@dataclass
class AffineMapOnE:
    """``sigma -> constant + linear(sigma)`` from ``E`` into ``wedge^v``."""

    degree: int
    m: int
    n: int
    constant: dict
    linear: dict  # J -> {K: coefficient}

    def __call__(self, sigma: dict) -> WedgeVector:
        out = dict(self.constant)
        for J, row in self.linear.items():
            out[J] = out.get(J, Fraction(0)) + sum((c * sigma.get(K, 0) for K, c in row.items()), Fraction(0))
        return WedgeVector.from_dict(self.degree, out)

    def output_indices(self) -> list:
        return sorted(set(self.constant) | set(self.linear))

    def to_json(self) -> dict:
        return {"degree": self.degree,
                "constant": [{"index": list(k), "value": str(v)} for k, v in sorted(self.constant.items())],
                "linear": [{"index": list(J), "terms": [{"K": list(K), "c": str(c)} for K, c in sorted(row.items())]}
                           for J, row in sorted(self.linear.items())]}


def build_F_tau(tau: WedgeVector, m: int, n: int, multipliers: Sequence | None = None) -> AffineMapOnE:
    """Sparse affine map with ``F(psi(A)) = g_t u_A tau`` via the ``K(I,J)`` expansion."""
    lower = set(range(1, m + 1))
    upper_t = tuple(range(m + 1, m + n + 1))
    amb = m + n
    r = [Fraction(1)] * amb if multipliers is None else [to_fraction(x) for x in multipliers]
    const: dict = {}
    lin: dict = {}
    k = tau.degree
    for I, tI in tau.coords:
        up = [i for i in I if i > m]
        free_lower = sorted(lower - set(I))
        for size in range(0, min(len(up), len(free_lower)) + 1):
            for R in itertools.combinations(up, size):
                for S in itertools.combinations(free_lower, size):
                    J = tuple(sorted((set(I) - set(R)) | set(S)))
                    K = k_index(I, J, m, n)
                    scale = Fraction(1)
                    for j in J:
                        scale *= r[j - 1]
                    coef = epsilon_sign(I, J, m, n) * tI * scale
                    if K == upper_t:
                        const[J] = const.get(J, Fraction(0)) + coef
                    else:
                        row = lin.setdefault(J, {})
                        row[K] = row.get(K, Fraction(0)) + coef
    const = {J: v for J, v in const.items() if v}
    lin = {J: {K: c for K, c in row.items() if c} for J, row in lin.items()}
    lin = {J: row for J, row in lin.items() if row}
    return AffineMapOnE(k, m, n, const, lin)


def build_F_tV(t, V: RationalSubspace, m: int, n: int) -> AffineMapOnE:
    if V.ambient != m + n:
        raise ValueError("subspace lives in the wrong ambient space")
    mult = None if t is None else as_flow_point(t).multipliers()
    return build_F_tau(V.tau(), m, n, mult)


def transformed_basis(a, t, V: RationalSubspace) -> list[list[Fraction]]:
    from .dynamics import lattice_basis
    g = lattice_basis(a, t)
    return [mat_vec(g, list(map(Fraction, b))) for b in V.rows]


def f_tV_sq(a, t, V: RationalSubspace) -> Fraction:
    """Exact squared covolume of ``g_t u_A (Z^{M+N} n V)``."""
    if V.dim == 0:
        return Fraction(1)
    return covolume_sq(transformed_basis(a, t, V))


def f_tV(a, t, V: RationalSubspace) -> float:
    return math.sqrt(float(f_tV_sq(a, t, V)))


def verify_FtV_identity(a, t, V: RationalSubspace) -> bool:
    """``Covol^2 == |F_{t,V}(psi(A))|^2`` as exact rationals."""
    rows, _ = read_matrix(a)
    m, n = len(rows), len(rows[0])
    F = build_F_tV(t, V, m, n)
    return f_tV_sq(a, t, V) == F(plucker_embed(a)).norm_sq()


# --- affine subspaces of E and omega(A; S, s) -----------------------------------

@dataclass
class AffineSubspaceOfE:
    m: int
    n: int
    base: dict
    directions: list  # exact spanning vectors, each a dict over E
    origin: dict = field(init=False)
    orthonormal: np.ndarray = field(init=False)

    def __post_init__(self):
        coords = e_coordinates(self.m, self.n)
        self._coords = coords
        base = [to_fraction(self.base.get(I, 0)) for I in coords]
        dirs = [[to_fraction(d.get(I, 0)) for I in coords] for d in self.directions]
        indep = []
        for v in dirs:
            if rank(indep + [v]) > len(indep):
                indep.append(v)
        self._dirs = indep
        if indep:
            gram = [[dot(u, v) for v in indep] for u in indep]
            coef = solve(gram, [dot(u, base) for u in indep])
            origin = [b - sum((c * u[i] for c, u in zip(coef, indep)), Fraction(0)) for i, b in enumerate(base)]
        else:
            origin = base
        self.origin = dict(zip(coords, origin))
        if indep:
            q, _ = np.linalg.qr(np.array([[float(x) for x in v] for v in indep]).T)
            self.orthonormal = q.T
        else:
            self.orthonormal = np.zeros((0, len(coords)))

    @classmethod
    def whole(cls, m: int, n: int) -> "AffineSubspaceOfE":
        coords = e_coordinates(m, n)
        return cls(m, n, {}, [{I: Fraction(1)} for I in coords])

    @classmethod
    def point(cls, sigma: dict, m: int, n: int) -> "AffineSubspaceOfE":
        return cls(m, n, dict(sigma), [])

    @property
    def dim(self) -> int:
        return len(self._dirs)

    def contains(self, sigma: dict) -> bool:
        v = [to_fraction(sigma.get(I, 0)) - self.origin[I] for I in self._coords]
        if not any(v):
            return True
        if not self._dirs:
            return False
        return rank(self._dirs + [v]) == len(self._dirs)

    def offset_norm(self, sigma: dict) -> float:
        return math.sqrt(float(sum((to_fraction(sigma.get(I, 0)) - self.origin[I]) ** 2 for I in self._coords)))


def norm_F_restricted(F: AffineMapOnE, asub: AffineSubspaceOfE) -> float:
    """``|F(0_A)|`` (Euclidean) versus the largest output row norm on the direction space."""
    val = F(asub.origin).norm()
    if asub.dim == 0 or not F.linear:
        return val
    coords = asub._coords
    pos = {I: i for i, I in enumerate(coords)}
    best = 0.0
    for J, row in F.linear.items():
        vec = np.zeros(len(coords))
        for K, c in row.items():
            vec[pos[K]] = float(c)
        best = max(best, float(np.linalg.norm(asub.orthonormal @ vec)))
    return max(val, best)


@dataclass
class AffineOmega:
    value: float
    overall_max: float
    per_t: list
    height: int
    pool_size: int

    def to_json(self) -> dict:
        return {"value": self.value, "overall_max": self.overall_max, "H": self.height,
                "pool_size": self.pool_size, "per_t": self.per_t}


def omega_affine(asub: AffineSubspaceOfE, chain: SChain, pool: list[RationalSubspace],
                 height: int | None = None) -> AffineOmega:
    """Finite-height ``limsup sup_V -log |F_{t,V}|A| / (s(t) dim V)`` over a vertex pool."""
    per_t = []
    vals = []
    for t, s in zip(chain.points, chain.s_values):
        best, arg = -INF, None
        for V in pool:
            F = build_F_tV(t, V, asub.m, asub.n)
            nrm = norm_F_restricted(F, asub)
            v = INF if nrm == 0 else -math.log(nrm) / (s * V.dim)
            if v > best:
                best, arg = v, V
        vals.append(best)
        per_t.append({"s": s, "value": best, "witness": None if arg is None else arg.to_json()})
    return AffineOmega(final_third_max(vals), max(vals, default=-INF), per_t, height or 0, len(pool))


@dataclass
class SubspaceBoundReport:
    holds: bool
    lhs: float
    rhs: float
    tolerance: float
    pointwise_failures: list
    witnesses: list

    def to_json(self) -> dict:
        return {"holds": self.holds, "lhs": self.lhs, "rhs": self.rhs, "tolerance": self.tolerance,
                "pointwise_failures": self.pointwise_failures, "witnesses": self.witnesses}


def check_subspace_exponent_bound(a, asub: AffineSubspaceOfE, chain: SChain, pool: list[RationalSubspace]) -> SubspaceBoundReport:
    """Finite-height check that ``omega(A; S, s) >= omega(A-sub; S, s)``.

    Pointwise: ``f_{t,V}(A) <= |F|A| (1 + sqrt(m) |psi(A) - 0_A|)`` and a
    Minkowski vector of length ``<= 2 f^{1/v}`` give
    ``Delta_t >= sup_V -log|F|A|/v - log 2 - log(1 + sqrt(m)|psi(A) - 0_A|)/v``.
    """
    psi = plucker_embed(a)
    if not asub.contains(psi):
        raise ValueError("psi(A) is not in the affine subspace")
    offset = asub.offset_norm(psi)
    failures, witnesses, lhs_vals, rhs_vals, tols = [], [], [], [], []
    for idx, (t, s) in enumerate(zip(chain.points, chain.s_values)):
        d = delta_of_length_sq(orbit_shortest(a, t).length_sq)
        best, bound, wit = -INF, -INF, None
        for V in pool:
            F = build_F_tV(t, V, asub.m, asub.n)
            nrm = norm_F_restricted(F, asub)
            outs = max(1, len(F.output_indices()))
            c = 1 + math.sqrt(outs) * offset
            val = -math.log(nrm) / V.dim
            if val > best:
                best, wit = val, V
            bound = max(bound, val - math.log(2) - math.log(c) / V.dim)
        if d < bound - 1e-9:
            failures.append({"index": idx, "delta": d, "bound": bound})
        lhs_vals.append(d / s)
        rhs_vals.append(best / s)
        tols.append((math.log(2) + math.log(1 + math.sqrt(math.comb(asub.m + asub.n, asub.n)) * offset)) / s)
        witnesses.append(None if wit is None else wit.to_json())
    k = max(1, math.ceil(len(lhs_vals) / 3))
    lhs = max(lhs_vals[-k:])
    rhs = max(rhs_vals[-k:])
    tol = max(tols[-k:])
    return SubspaceBoundReport(not failures and lhs >= rhs - tol, lhs, rhs, tol, failures, witnesses)


# --- randomized identity suite ----------------------------------------------

@dataclass
class IdentitySuiteReport:
    trials: int
    passed: int
    failures: list

    def to_json(self) -> dict:
        return {"trials": self.trials, "passed": self.passed, "failures": self.failures}


def identity_suite(trials: int, seed: int, shapes: Sequence[tuple] = ((1, 1), (1, 2), (2, 1), (2, 2)),
                   height: int = 2, max_den: int = 16, max_k: int = 6) -> IdentitySuiteReport:
    """``Covol^2 == |F_{t,V}(psi(A))|^2`` on random exact instances.

    Entries of ``A`` are rationals with denominators ``<= max_den``; flows
    use multipliers ``2^k`` with ``|k| <= max_k``; vertices are spans of
    random primitive vectors of height ``<= H``.
    """
    from .dynamics import RationalFlowPoint

    rng = random.Random(seed)
    passed, failures = 0, []
    for i in range(trials):
        m, n = shapes[i % len(shapes)]
        a = [[Fraction(rng.randint(-2 * max_den, 2 * max_den), rng.randint(1, max_den)) for _ in range(n)]
             for _ in range(m)]
        ks = [rng.randint(-max_k, max_k) for _ in range(m + n - 1)]
        t = RationalFlowPoint.powers_of_two(ks + [-sum(ks)])
        v = random_vertex(m + n, rng.randint(1, m + n - 1), height, rng)
        lhs = f_tV_sq(a, t, v)
        rhs = build_F_tV(t, v, m, n)(plucker_embed(a)).norm_sq()
        if lhs == rhs:
            passed += 1
        else:
            failures.append({"A": [[str(x) for x in r] for r in a], "t": [str(x) for x in t.r],
                             "V": v.to_json(), "covol_sq": str(lhs), "F_sq": str(rhs)})
    return IdentitySuiteReport(trials, passed, failures)
