"""Diagonal flows on unimodular lattices and the Dani correspondence.

Flow points come in two tracks.  :class:`RationalFlowPoint` stores
multipliers ``r_i`` with product exactly one (``t_i = log r_i``); every
lattice it produces is exact.  :class:`FlowPoint` stores real ``t`` and
rounds ``e^{t_i}`` to binary rationals, so its lattices are unimodular only
up to float error.

Ray convention: the ray used for the simple exponent is
``t(tau) = (tau/M, ..., tau/M, -tau/N, ..., -tau/N)``.  It expands the
``p + Aq`` block and contracts ``q``, so good approximations become short
vectors; ``s0`` along it is ``tau``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .diophantine import (
    ExponentEstimate, INF, final_third_max, omega_matrix, read_matrix,
)
from .exact import det, identity, log_rational, mat_mul, to_fraction
from .lattice import EnumerationBudgetError, ShortestVector, shortest_vector

LOG2 = math.log(2)


class NotInCartanError(ValueError):
    """The flow parameter does not sum to zero."""


@dataclass(frozen=True)
class FlowPoint:
    t: tuple

    def __post_init__(self):
        t = tuple(float(x) for x in self.t)
        if abs(sum(t)) > 1e-9 * (1 + max(abs(x) for x in t)):
            raise NotInCartanError(f"sum of t is {sum(t)}, not 0")
        object.__setattr__(self, "t", t)

    @property
    def dim(self) -> int:
        return len(self.t)

    def log_multipliers(self) -> tuple:
        return self.t

    def multipliers(self) -> list[Fraction]:
        return [Fraction(math.exp(x)) for x in self.t]

    def sup_norm(self) -> float:
        return max(abs(x) for x in self.t)

    exact = False


@dataclass(frozen=True)
class RationalFlowPoint:
    """Positive rational multipliers with product exactly one."""

    r: tuple

    def __post_init__(self):
        r = tuple(to_fraction(x) for x in self.r)
        if any(x <= 0 for x in r):
            raise ValueError("multipliers must be positive")
        prod = Fraction(1)
        for x in r:
            prod *= x
        if prod != 1:
            raise NotInCartanError(f"multipliers multiply to {prod}, not 1")
        object.__setattr__(self, "r", r)

    @classmethod
    def powers_of_two(cls, exponents: Sequence[int]) -> "RationalFlowPoint":
        return cls(tuple(Fraction(2) ** int(k) for k in exponents))

    @property
    def dim(self) -> int:
        return len(self.r)

    def multipliers(self) -> list[Fraction]:
        return list(self.r)

    def log_multipliers(self) -> tuple:
        return tuple(log_rational(x) for x in self.r)

    def two_exponents(self) -> tuple | None:
        """``k_i`` with ``r_i = 2^k_i`` when every multiplier is a power of two."""
        out = []
        for x in self.r:
            n, d = x.numerator, x.denominator
            if n & (n - 1) or d & (d - 1):
                return None
            out.append(n.bit_length() - d.bit_length())
        return tuple(out)

    def sup_norm(self) -> float:
        return max(abs(x) for x in self.log_multipliers())

    exact = True


def as_flow_point(t) -> FlowPoint | RationalFlowPoint:
    if isinstance(t, (FlowPoint, RationalFlowPoint)):
        return t
    return FlowPoint(tuple(t))


# --- matrices and lattices -------------------------------------------------------

def unipotent(a) -> list[list[Fraction]]:
    """``[[I_M, A], [0, I_N]]`` with exact entries."""
    rows, _ = read_matrix(a)
    m, n = len(rows), len(rows[0])
    u = identity(m + n)
    for i in range(m):
        for j in range(n):
            u[i][m + j] = rows[i][j]
    return u


def flow_matrix(t) -> list[list[Fraction]]:
    t = as_flow_point(t)
    r = t.multipliers()
    k = len(r)
    return [[r[i] if i == j else Fraction(0) for j in range(k)] for i in range(k)]


def lattice_basis(a, t) -> list[list[Fraction]]:
    """Matrix ``g_t u_A``; its columns generate ``g_t u_A Z^{M+N}``."""
    return mat_mul(flow_matrix(t), unipotent(a))


def delta_of_length_sq(length_sq: Fraction) -> float:
    return -0.5 * log_rational(length_sq)


def delta(basis_columns) -> float:
    """``-log`` of the shortest nonzero vector length (Euclidean)."""
    return delta_of_length_sq(shortest_vector(basis_columns).length_sq)


def orbit_shortest(a, t, node_budget: int = 2_000_000) -> ShortestVector:
    return shortest_vector(lattice_basis(a, t), node_budget)


# --- rays and chains ----------------------------------------------------------------

def s0_ray_point(tau: float, m: int, n: int) -> FlowPoint:
    return FlowPoint(tuple([tau / m] * m + [-tau / n] * n))


def s0_ray_rational(k: int, m: int, n: int) -> tuple[RationalFlowPoint, float]:
    """Exact ray point with ``tau = k M N log 2``; returns it with ``tau``."""
    r = RationalFlowPoint.powers_of_two([k * n] * m + [-k * m] * n)
    return r, k * m * n * LOG2


@dataclass
class SChain:
    """Ordered flow points with the scale function ``s`` evaluated at each."""

    points: list
    s_values: list

    def __post_init__(self):
        if len(self.points) != len(self.s_values):
            raise ValueError("points and s values differ in length")
        if any(s <= 0 for s in self.s_values):
            raise ValueError("s must be positive")

    def __len__(self):
        return len(self.points)

    def norm_ratios(self) -> tuple[float, float]:
        """Observed bounds of ``s(t) / |t|_inf`` along the chain."""
        rat = [s / p.sup_norm() for p, s in zip(self.points, self.s_values) if p.sup_norm() > 0]
        return (min(rat), max(rat)) if rat else (1.0, 1.0)

    def prefix(self, k: int) -> "SChain":
        return SChain(self.points[:k], self.s_values[:k])


def s0_chain(m: int, n: int, tau_max: float, step: float = 1.0, exact: bool = False) -> SChain:
    """Discretised ``s0`` ray.  The exact track uses powers-of-two multipliers."""
    pts, ss = [], []
    if exact:
        k = 1
        while k * m * n * LOG2 <= tau_max + 1e-12:
            p, tau = s0_ray_rational(k, m, n)
            pts.append(p)
            ss.append(tau)
            k += 1
    else:
        tau = step
        while tau <= tau_max + 1e-12:
            pts.append(s0_ray_point(tau, m, n))
            ss.append(tau)
            tau += step
    return SChain(pts, ss)


def positive_cone_directions(m: int, n: int, count: int | None = None) -> list[np.ndarray]:
    """Sup-normalised directions in the cone ``t_i >= 0 (i <= M), t_i <= 0 (i > M)``.

    Each direction is ``(a, -b)`` with ``a``, ``b`` on barycentric grids of
    the ``M``- and ``N``-simplices.
    """
    count = 10 * (m + n) if count is None else count
    res = 1
    while True:
        ga = _simplex_grid(m, res)
        gb = _simplex_grid(n, res)
        if len(ga) * len(gb) >= count or res > 64:
            break
        res += 1
    dirs = []
    for a in ga:
        for b in gb:
            v = np.concatenate([a, -b])
            dirs.append(v / np.abs(v).max())
    return dirs


def _simplex_grid(k: int, res: int) -> list[np.ndarray]:
    if k == 1:
        return [np.array([1.0])]
    out = []
    for c in itertools.product(range(res + 1), repeat=k):
        if sum(c) == res:
            out.append(np.array(c, float) / res)
    return out


# --- exponents from trajectories ---------------------------------------------------

@dataclass
class Trajectory:
    taus: list
    deltas: list
    ratios: list
    coefficients: list
    skipped: list = field(default_factory=list)

    def to_rows(self) -> list[dict]:
        return [{"tau": t, "delta": d, "ratio": r, "coefficients": list(c)}
                for t, d, r, c in zip(self.taus, self.deltas, self.ratios, self.coefficients)]


@dataclass
class DynamicalEstimate:
    value: float
    overall_max: float
    divergent: bool
    trend_slope: float
    trajectory: Trajectory

    def to_json(self) -> dict:
        return {"value": self.value, "overall_max": self.overall_max, "divergent": self.divergent,
                "trend_slope": self.trend_slope, "trajectory": self.trajectory.to_rows(),
                "skipped": list(self.trajectory.skipped)}


def trajectory(a, chain: SChain, node_budget: int = 2_000_000) -> Trajectory:
    taus, deltas, ratios, coeffs, skipped = [], [], [], [], []
    for i, (t, s) in enumerate(zip(chain.points, chain.s_values)):
        try:
            sv = orbit_shortest(a, t, node_budget)
        except EnumerationBudgetError as exc:
            skipped.append({"index": i, "reason": str(exc)})
            continue
        d = delta_of_length_sq(sv.length_sq)
        taus.append(s)
        deltas.append(d)
        ratios.append(d / s)
        coeffs.append(tuple(int(c) for c in sv.coefficients))
    return Trajectory(taus, deltas, ratios, coeffs, skipped)


def trend_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope over the final half of the series."""
    k = len(xs)
    if k < 2:
        return 0.0
    h = max(2, k // 2)
    x = np.array(xs[-h:], float)
    y = np.array(ys[-h:], float)
    if np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def omega_dynamical(a, chain: SChain, node_budget: int = 2_000_000) -> DynamicalEstimate:
    """``Delta(g_t u_A Z^{M+N}) / s(t)`` along the chain; max over its final third.

    The divergence flag comes from a linear-trend test: along the ray the
    slope of ``Delta`` against ``s`` tends to ``1/N`` exactly when ``A`` is
    singular-like (e.g. rational), and to 0 for badly approximable ``A``.
    """
    if len(chain) == 0:
        raise ValueError("empty chain")
    rows, _ = read_matrix(a)
    n = len(rows[0])
    traj = trajectory(a, chain, node_budget)
    slope = trend_slope(traj.taus, traj.deltas)
    return DynamicalEstimate(
        value=final_third_max(traj.ratios),
        overall_max=max(traj.ratios, default=-INF),
        divergent=slope >= 0.75 / n,
        trend_slope=slope,
        trajectory=traj,
    )


def xi(c, m: int, n: int):
    """``(N/M) (1 + Mc) / (1 - Nc)``; exact for rational ``c``."""
    if isinstance(c, (int, Fraction)):
        c = Fraction(c)
        if c >= Fraction(1, n):
            raise ZeroDivisionError(f"xi has a pole at c = 1/N; got c = {c}")
        return Fraction(n, m) * (1 + m * c) / (1 - n * c)
    if c >= 1 / n:
        raise ZeroDivisionError(f"xi has a pole at c = 1/N; got c = {c}")
    return (n / m) * (1 + m * c) / (1 - n * c)


@dataclass
class CorrespondenceReport:
    omega_direct: float
    omega_dynamical: float
    xi_of_dynamical: float
    discrepancy: float
    direct_rational: bool
    dynamical_divergent: bool

    @property
    def consistent_sentinels(self) -> bool:
        return self.direct_rational == self.dynamical_divergent

    def to_json(self) -> dict:
        def f(x):
            return "inf" if x == INF else float(x)
        return {"omega_direct": f(self.omega_direct), "omega_dynamical": f(self.omega_dynamical),
                "xi_of_dynamical": f(self.xi_of_dynamical), "discrepancy": f(self.discrepancy),
                "direct_rational": self.direct_rational, "dynamical_divergent": self.dynamical_divergent}


def correspondence_check(a, q_max: int, chain: SChain, direct_method: str = "auto") -> CorrespondenceReport:
    """Both sides of ``omega(A) = xi(omega(A; s0-ray))`` at finite height."""
    rows, _ = read_matrix(a)
    m, n = len(rows), len(rows[0])
    if direct_method == "cf" or (direct_method == "auto" and m == n == 1):
        from .diophantine import omega_vector
        est = omega_vector([a[0][0]], q_max, method="cf")
        direct = est.value - 1 if not est.rational else INF
        rational = est.rational
    else:
        est = omega_matrix(a, q_max)
        direct, rational = est.value, est.rational
    dyn = omega_dynamical(a, chain)
    if dyn.divergent:
        xv = INF
    else:
        c = max(dyn.value, 0.0)
        xv = xi(c, m, n) if c < 1 / n else INF
    if direct == INF and xv == INF:
        disc = 0.0
    elif direct == INF or xv == INF:
        disc = INF
    else:
        disc = abs(direct - xv)
    return CorrespondenceReport(direct, dyn.value, xv, disc, rational, dyn.divergent)


def vwma_score(a, t_max: float, directions: list | None = None, step: float = 1.0) -> DynamicalEstimate:
    """``Delta / |t|_inf`` over a direction net of the positive cone times magnitudes ``<= t_max``.

    Points are ordered by magnitude; the estimate is the max over the
    final third of magnitudes.
    """
    rows, _ = read_matrix(a)
    m, n = len(rows), len(rows[0])
    directions = positive_cone_directions(m, n) if directions is None else directions
    taus, deltas, ratios, coeffs = [], [], [], []
    mag = step
    per_mag = []
    while mag <= t_max + 1e-12:
        best = -INF
        for dvec in directions:
            t = FlowPoint(tuple(mag * dvec))
            sv = orbit_shortest(a, t)
            d = delta_of_length_sq(sv.length_sq)
            taus.append(mag)
            deltas.append(d)
            ratios.append(d / mag)
            coeffs.append(tuple(int(c) for c in sv.coefficients))
            best = max(best, d / mag)
        per_mag.append((mag, best))
        mag += step
    traj = Trajectory(taus, deltas, ratios, coeffs)
    best_by_mag = [b for _, b in per_mag]
    slope = trend_slope([m_ for m_, _ in per_mag], [b * m_ for m_, b in per_mag])
    return DynamicalEstimate(final_third_max(best_by_mag), max(best_by_mag, default=-INF),
                             slope >= 0.5 / max(m, n), slope, traj)


# --- W_{kappa, t} membership ----------------------------------------------------

def in_W_kappa_t(a, kappa, t, gamma) -> bool:
    """Does ``g_t u_A Z^{M+N}`` have a nonzero vector of length ``<= e^{-gamma |t|} kappa``?

    ``|t|`` is the sup norm.  For power-of-two multipliers with rational
    ``gamma`` and ``kappa`` the comparison is exact.
    """
    kappa = to_fraction(kappa)
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")
    t = as_flow_point(t)
    sv = orbit_shortest(a, t)
    return length_within_threshold(sv.length_sq, kappa, t, gamma)


def length_within_threshold(length_sq: Fraction, kappa: Fraction, t, gamma) -> bool:
    """Exact test of ``length^2 <= e^{-2 gamma |t|} kappa^2`` when possible."""
    exps = t.two_exponents() if isinstance(t, RationalFlowPoint) else None
    if exps is not None and isinstance(gamma, (int, Fraction, str)):
        g = to_fraction(gamma)
        big_k = max(abs(k) for k in exps)
        # length^2 / kappa^2 <= 2^(-2 g K)  <=>  (ratio)^q <= 2^(-2 p K) with g = p/q
        ratio = Fraction(length_sq) / (kappa * kappa)
        p, q = g.numerator, g.denominator
        return ratio ** q <= Fraction(2) ** (-2 * p * big_k)
    lhs = log_rational(Fraction(length_sq))
    rhs = -2 * float(gamma) * t.sup_norm() + 2 * log_rational(kappa)
    return lhs <= rhs + 1e-12 * (1 + abs(rhs))


def minkowski_floor_holds(basis_columns) -> bool:
    """Unimodular lattices have ``lambda_1 <= 2``, i.e. ``Delta >= -log 2``."""
    sv = shortest_vector(basis_columns)
    return sv.length_sq <= 4
