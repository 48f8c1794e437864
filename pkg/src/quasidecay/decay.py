"""Empirical testers for decay and doubling conditions on concrete measures.

Every verdict here is a consistency statement backed by a finite set of
probes.  The supremum over hyperplanes is replaced by an adversarial search
that returns a witness, so a reported exponent is an upper bound on what the
measure can satisfy, never a certificate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .diophantine import RationalSimplexViolation, default_eps_power, simplex_hyperplane
from .exact import Surd, exact_sqrt, to_fraction
from .geometry import (
    EUCLIDEAN, SUP, Ball, Hyperplane, Point, greedy_net_array, sup_dist_on_support,
)
from .measures import (
    DEFAULT_SEED, BallRegion, CellMeasure, CounterexampleMeasure, CounterexampleSpec, MassBracket, MeasureOracle,
    SlabRegion,
)
from .poly import Polynomial

MODES = ("absolute", "quasi", "decaying", "weak-quasi")


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(DEFAULT_SEED if seed_or_rng is None else seed_or_rng)


def _fit_line(xs, ys) -> tuple[float, float, float]:
    """Least squares ``y = a x + b``; returns ``(a, b, r^2)``."""
    x, y = np.asarray(xs, float), np.asarray(ys, float)
    a, b = np.polyfit(x, y, 1)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(((y - (a * x + b)) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1 - ss_res / ss_tot
    return float(a), float(b), r2


def _as_point(x) -> Point:
    if isinstance(x, Point):
        return x
    arr = np.atleast_1d(np.asarray(x, dtype=object))
    exact = all(isinstance(v, (int, Fraction)) for v in arr)
    return Point(tuple(Fraction(v) if exact else float(v) for v in arr), exact)


def _ball(x: Point, rho, norm: str) -> Ball:
    r = to_fraction(rho) if x.exact else float(rho)
    return Ball(x, r, norm)


# --- local dimension ---------------------------------------------------------------

@dataclass
class LocalDimension:
    slope: float
    interval: tuple
    rhos: list
    masses: list  # (lo, hi) per kept scale
    dropped: list
    r_squared: float

    def to_json(self) -> dict:
        return {"slope": self.slope, "interval": list(self.interval), "rhos": [float(r) for r in self.rhos],
                "masses": [[float(a), float(b)] for a, b in self.masses],
                "dropped": [float(r) for r in self.dropped], "r_squared": self.r_squared}


def local_dimension(mu: MeasureOracle, x, rho_grid: Sequence, norm: str = SUP, tol=1e-9) -> LocalDimension:
    """Slope of ``log mu(B(x, rho))`` against ``log rho``."""
    rhos = sorted(rho_grid, key=float, reverse=True)
    if len(rhos) < 4:
        raise ValueError("need at least four scales")
    if any(not 0 < float(r) <= 1 for r in rhos):
        raise ValueError("scales must lie in (0, 1]")
    x = _as_point(x)
    kept, masses, dropped = [], [], []
    for r in rhos:
        br = _ball_mass(mu, _ball(x, r, norm), tol, None, 0.002)
        if br.lo <= 0:
            dropped.append(r)
            continue
        kept.append(r)
        masses.append((br.lo, br.hi))
    if len(kept) < 2:
        raise ValueError("fewer than two scales with positive mass")
    lx = [math.log(float(r)) for r in kept]
    lo_y = [math.log(float(a)) for a, _ in masses]
    hi_y = [math.log(float(b)) for _, b in masses]
    mid_y = [(a + b) / 2 for a, b in zip(lo_y, hi_y)]
    slope, _, r2 = _fit_line(lx, mid_y)
    s_lo, _, _ = _fit_line(lx, lo_y)
    s_hi, _, _ = _fit_line(lx, hi_y)
    spread = max(b - a for a, b in zip(lo_y, hi_y)) / max(1e-300, max(lx) - min(lx))
    interval = (min(slope, s_lo, s_hi) - spread, max(slope, s_lo, s_hi) + spread)
    return LocalDimension(slope, interval, kept, masses, dropped, r2)


def mean_local_dimension(mu: MeasureOracle, rho_grid: Sequence, n_points: int = 16, seed=None,
                         norm: str = SUP) -> tuple[float, list[float]]:
    """Average slope over ``mu``-random centres; returns ``(mean, per-centre slopes)``."""
    rng = _rng(seed)
    pts = mu.sample(rng, n_points)
    slopes = [local_dimension(mu, tuple(float(v) for v in p), rho_grid, norm).slope for p in pts]
    return float(np.mean(slopes)), slopes


def local_dimension_filter(mu: MeasureOracle, lo: float, hi: float, rho_grid: Sequence,
                           norm: str = SUP) -> Callable[[np.ndarray], bool]:
    """Egoroff-style set ``E``: centres whose empirical local dimension lies in ``[lo, hi]``."""
    def keep(x) -> bool:
        try:
            s = local_dimension(mu, tuple(float(v) for v in np.atleast_1d(x)), rho_grid, norm).slope
        except ValueError:
            return False
        return lo <= s <= hi

    return keep


# --- doubling --------------------------------------------------------------------

@dataclass
class FedererResult:
    worst: float
    ratios: list
    skipped: int

    def to_json(self) -> dict:
        return {"worst": self.worst, "probes": len(self.ratios), "skipped": self.skipped}


def federer_ratio(mu: MeasureOracle, K, probes: Sequence[tuple], norm: str = SUP, tol=1e-9) -> FedererResult:
    """Worst ``mu(B(x, K rho)) / mu(B(x, rho))`` over probes, outer bracket over inner."""
    if not float(K) > 1:
        raise ValueError("K must exceed 1")
    ratios, skipped = [], 0
    for x, rho in probes:
        x = _as_point(x)
        inner = _ball_mass(mu, _ball(x, rho, norm), tol, None, 0.002)
        if inner.lo <= 0:
            skipped += 1
            continue
        outer = _ball_mass(mu, _ball(x, to_fraction(rho) * to_fraction(K) if x.exact else float(rho) * float(K), norm),
                           tol, None, 0.002)
        ratios.append(float(outer.hi) / float(inner.lo))
    return FedererResult(max(ratios) if ratios else float("nan"), ratios, skipped)


@dataclass
class QuasiFedererResult:
    holds: bool
    c2_hat: float
    delta: float
    by_decade: dict
    skipped: int

    def to_json(self) -> dict:
        return {"holds": self.holds, "c2_hat": self.c2_hat, "delta": self.delta,
                "by_decade": {str(k): v for k, v in self.by_decade.items()}, "skipped": self.skipped}


def default_quasi_delta(eps: float, d: int) -> float:
    """``eps / (2 log2 N_X)`` with the doubling constant ``N_X = 2^d 3^d`` of sup-norm balls."""
    return eps / (2 * math.log2((2 ** d) * (3 ** d)))


def quasi_federer_check(mu: MeasureOracle, eps: float, probes: Sequence[tuple], delta: float | None = None,
                        norm: str = SUP, growth_tol: float = 0.25, tol=1e-9) -> QuasiFedererResult:
    """``sup mu(B(x, rho^(1-delta))) rho^eps / mu(B(x, rho))`` and whether it stops growing."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    delta = default_quasi_delta(eps, mu.dim) if delta is None else float(delta)
    by_decade: dict = {}
    skipped = 0
    for x, rho in probes:
        x = _as_point(x)
        r = float(rho)
        inner = _ball_mass(mu, _ball(x.to_float(), r, norm), tol, None, 0.002)
        if inner.lo <= 0:
            skipped += 1
            continue
        outer = _ball_mass(mu, _ball(x.to_float(), r ** (1 - delta), norm), tol, None, 0.002)
        ratio = float(outer.hi) * r ** eps / float(inner.lo)
        dec = math.floor(-math.log10(r) + 1e-9)
        by_decade[dec] = max(by_decade.get(dec, 0.0), ratio)
    if not by_decade:
        raise ValueError("every probe had an empty inner ball")
    c2 = max(by_decade.values())
    decs = sorted(by_decade)
    if len(decs) >= 2:
        holds = by_decade[decs[-1]] <= max(1.0, by_decade[decs[-2]]) * (1 + growth_tol)
    else:
        holds = True
    return QuasiFedererResult(holds, c2, delta, by_decade, skipped)


def support_probes(mu: MeasureOracle, n: int, rho_grid: Sequence, seed=None,
                   box: tuple | None = None, margin_factor: float = 1.0) -> list[tuple]:
    """``mu``-random centres paired with every scale; ``box`` keeps ``B(x, margin_factor rho)`` inside it."""
    rng = _rng(seed)
    pts = mu.sample(rng, n)
    out = []
    for p in pts:
        for r in rho_grid:
            rr = float(r) * margin_factor
            if box is not None and not all(lo + rr <= v <= hi - rr for v, lo, hi in zip(p, box[0], box[1])):
                continue
            out.append((tuple(float(v) for v in p), r))
    return out


# --- adversarial hyperplanes ----------------------------------------------------

@dataclass
class HyperplaneWitness:
    plane: Hyperplane
    thickness: float
    sample_fraction: float
    slab: MassBracket | None
    degenerate: bool
    samples: int


def _normals(d: int, count: int, rng) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        ang = np.arange(count) * math.pi / count
        return np.stack([np.cos(ang), np.sin(ang)], 1)
    v = rng.normal(size=(count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _score(pts: np.ndarray, normal: np.ndarray, offset: float, width: float) -> float:
    nrm = float(np.linalg.norm(normal))
    return float((np.abs(pts @ normal - offset) / nrm <= width).mean())


def worst_hyperplane(mu: MeasureOracle, ball: Ball, beta: float, rng=None, n_samples: int = 1024,
                     scale: float | None = None, evaluate: int = 3, tol: float = 1e-6,
                     rel_tol: float = 0.05) -> HyperplaneWitness:
    """Plane with the largest slab mass found among PCA, a normal net and local refinement."""
    rng = _rng(rng)
    d = ball.dim
    scale = float(ball.radius) if scale is None else float(scale)
    width = float(beta) * scale
    fball = ball.to_float()
    pts = mu.sample_in_region(BallRegion(fball), rng, n_samples)
    pts = np.asarray(pts, float).reshape(-1, d)
    degenerate = len(pts) < d + 1
    centre = fball.center.as_array()
    if len(pts) == 0:
        plane = Hyperplane(tuple([1.0] + [0.0] * (d - 1)), float(centre[0]), False)
        return HyperplaneWitness(plane, width, 0.0, None, True, 0)
    mean = pts.mean(0)
    cands = []
    if len(pts) >= 2:
        _, _, vt = np.linalg.svd(pts - mean, full_matrices=True)
        pca_normal = vt[-1]
    else:
        pca_normal = np.eye(d)[0]
    cands.append((pca_normal, float(pca_normal @ mean)))
    if not degenerate:
        # densest sample: most neighbours inside the slab width
        sub = pts[: min(len(pts), 256)]
        diff = sub[:, None, :] - sub[None, :, :]
        counts = (np.sqrt((diff ** 2).sum(-1)) <= 2 * width).sum(1)
        anchor = sub[int(np.argmax(counts))]
        for nv in _normals(d, 64 * d, rng):
            cands.append((nv, float(nv @ anchor)))
    scored = sorted(((_score(pts, nv, off, width), i) for i, (nv, off) in enumerate(cands)), reverse=True)
    best_s, best_i = scored[0]
    nv, off = cands[best_i]
    nv = nv.copy()
    # coordinate perturbation of the normal and the offset
    step = 0.1
    for _ in range(20):
        improved = False
        for k in range(d + 1):
            for sgn in (1, -1):
                trial_n, trial_o = nv.copy(), off
                if k < d:
                    trial_n[k] += sgn * step
                    if not np.any(trial_n):
                        continue
                    trial_n /= np.linalg.norm(trial_n)
                    trial_o = float(trial_n @ (nv * off / float(nv @ nv)))
                else:
                    trial_o += sgn * step * width
                s = _score(pts, trial_n, trial_o, width)
                if s > best_s:
                    best_s, nv, off, improved = s, trial_n, trial_o, True
        if not improved:
            step /= 2
    finalists = [(nv, off)] + [cands[i] for _, i in scored[:max(0, evaluate - 1)]]
    best = None
    for cand_n, cand_o in finalists:
        plane = Hyperplane(tuple(float(v) for v in cand_n), float(cand_o), False)
        slab = _mass(mu, SlabRegion(plane, width, fball), tol, rng, rel_tol)
        if best is None or float(slab.estimate) > float(best[1].estimate):
            best = (plane, slab)
    return HyperplaneWitness(best[0], width, best_s, best[1], degenerate, len(pts))


def _ball_mass(mu: MeasureOracle, ball: Ball, tol, rng=None, rel_tol: float = 0.0) -> MassBracket:
    """Use an oracle's own closed form for balls when it has one."""
    if ball.norm == SUP or not isinstance(mu, CellMeasure):
        return mu.ball_mass(ball, tol=tol, rng=rng)
    return _mass(mu, BallRegion(ball), tol, rng, rel_tol)


def _mass(mu: MeasureOracle, region, tol, rng=None, rel_tol: float = 0.0) -> MassBracket:
    """Region mass, asking cell-based oracles for a relative bracket too."""
    if isinstance(mu, CellMeasure) and rel_tol:
        return mu.region_mass(region, tol=tol, rng=rng, rel_tol=rel_tol)
    return mu.region_mass(region, tol=tol, rng=rng)


# --- decay profile ---------------------------------------------------------------

@dataclass
class ProbePlan:
    n_centers: int = 14
    rho_grid: tuple = (1 / 3, 1 / 9, 1 / 27)
    beta_grid: tuple = tuple(3.0 ** -k for k in range(1, 7))
    n_samples: int = 1024
    norm: str = EUCLIDEAN
    seed: int = DEFAULT_SEED
    support_draws: int = 256


@dataclass
class DecayFit:
    alpha_hat: float
    C1_hat: float
    probes: list  # (beta, ratio)
    r_squared: float
    log: list = field(default_factory=list)
    dropped: int = 0
    warnings: list = field(default_factory=list)
    verdict: str = ""

    def to_json(self) -> dict:
        return {"alpha_hat": self.alpha_hat, "C1_hat": self.C1_hat, "r_squared": self.r_squared,
                "n_probes": len(self.probes), "dropped": self.dropped, "warnings": self.warnings,
                "verdict": self.verdict}

    def csv_rows(self) -> list[dict]:
        return [{"log_beta": math.log(b), "log_ratio": math.log(r) if r > 0 else float("-inf")} for b, r in self.probes]


def fit_decay(probes: Sequence[tuple]) -> tuple[float, float, float]:
    """Envelope fit over the smaller half of the beta grid.

    For each distinct ``beta`` the largest ratio is kept (the condition is a
    supremum); ``log`` envelope is regressed on ``log beta``.  Returns
    ``(alpha_hat, C1_hat, r_squared)``.
    """
    env: dict = {}
    for b, r in probes:
        if r > 0:
            env[b] = max(env.get(b, 0.0), r)
    betas = sorted(env)
    if len(betas) < 2:
        raise ValueError("need positive ratios at two or more beta values")
    half = betas[: max(2, math.ceil(len(betas) / 2))]
    xs = [math.log(b) for b in half]
    ys = [math.log(env[b]) for b in half]
    a, icpt, r2 = _fit_line(xs, ys)
    c1 = max(env[b] / b ** a for b in half)
    return a, c1, r2


def decay_profile(mu: MeasureOracle, mode: str = "quasi", gamma: float = 1.0,
                  E_filter: Callable | None = None, plan: ProbePlan | None = None) -> DecayFit:
    """Slab-to-ball mass ratios at adversarial hyperplanes, fitted to ``C1 beta^alpha``."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode in ("quasi", "weak-quasi") and not gamma > 0:
        raise ValueError("gamma must be positive in the quasi modes")
    plan = plan or ProbePlan()
    rng = np.random.default_rng(plan.seed)
    centres = []
    draws = 0
    while len(centres) < plan.n_centers and draws < 200 * plan.n_centers:
        batch = mu.sample(rng, plan.n_centers)
        draws += len(batch)
        for p in batch:
            if E_filter is None or E_filter(p):
                centres.append(p)
    centres = centres[: plan.n_centers]
    warnings = []
    if len(centres) < plan.n_centers:
        warnings.append(f"only {len(centres)} centres passed the filter")
    probes, log, dropped = [], [], 0
    for x in centres:
        xp = Point(tuple(float(v) for v in np.atleast_1d(x)), False)
        for rho in plan.rho_grid:
            ball = Ball(xp, float(rho), plan.norm)
            bm = _ball_mass(mu, ball, 1e-12, rng, 0.01)
            if bm.lo <= 0:
                dropped += 1
                continue
            for beta in plan.beta_grid:
                if mode in ("quasi", "weak-quasi") and beta > float(rho) ** gamma:
                    continue
                wit = worst_hyperplane(mu, ball, beta, rng, plan.n_samples, tol=0.02 * beta * float(bm.lo))
                if mode in ("decaying", "weak-quasi"):
                    sd = sup_dist_on_support(mu, wit.plane, ball, plan.support_draws, rng)
                    if sd.empty or not sd.value:
                        dropped += 1
                        continue
                    width = beta * sd.value
                    slab = _mass(mu, SlabRegion(wit.plane, width, ball), 0.02 * beta * float(bm.lo), rng, 0.05)
                else:
                    width, slab = wit.thickness, wit.slab
                if slab is None:
                    dropped += 1
                    continue
                est = min(1.0, float(slab.estimate) / float(bm.estimate))
                lo = float(slab.lo) / float(bm.hi)
                hi = min(1.0, float(slab.hi) / float(bm.lo))
                probes.append((float(beta), est))
                log.append({"x": [float(v) for v in xp.coords], "rho": float(rho), "beta": float(beta),
                            "L": {"normal": list(wit.plane.normal), "offset": wit.plane.offset},
                            "thickness": width, "ratio": est, "bracket": [lo, hi]})
    if not probes:
        raise ValueError("every probe was degenerate")
    alpha, c1, r2 = fit_decay(probes)
    verdict = f"consistent with exponent {alpha:.3f} (lower-bound witness, not a certificate)"
    return DecayFit(alpha, c1, probes, r2, log, dropped, warnings, verdict)


# --- sublevel covers --------------------------------------------------------------

@dataclass
class CoverPiece:
    plane: Hyperplane
    centre: tuple
    radius: float
    thickness: object
    level: int

    def to_json(self) -> dict:
        return {"level": self.level, "normal": [str(v) for v in self.plane.normal], "offset": str(self.plane.offset),
                "centre": [float(c) for c in self.centre], "radius": float(self.radius), "thickness": str(self.thickness)}


@dataclass
class SublevelCover:
    collections: list  # list of lists of CoverPiece, index k-1 for C_k
    z_points: int
    uncovered: list
    hypothesis_ratio: float
    warnings: list

    @property
    def verified(self) -> bool:
        return not self.uncovered

    def to_json(self) -> dict:
        return {"sizes": [len(c) for c in self.collections], "z_points": self.z_points,
                "uncovered": len(self.uncovered), "hypothesis_ratio": self.hypothesis_ratio,
                "verified": self.verified, "warnings": self.warnings}


def _disc_grid(d: int, resolution: float, max_points: int = 4_000_000) -> np.ndarray:
    steps = int(math.floor(1 / resolution))
    if (2 * steps + 1) ** d > max_points:
        steps = int(((max_points ** (1 / d)) - 1) // 2)
    axis = np.arange(-steps, steps + 1) / steps
    if d == 1:
        return axis.reshape(-1, 1)
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), -1).reshape(-1, d)
    return mesh[(mesh ** 2).sum(1) <= 1 + 1e-12]


def _derivatives(f: Polynomial, order: int) -> list[Polynomial]:
    out = [f]
    for _ in range(order):
        out = [g.derivative(i) for g in out for i in range(f.nvars)]
    return out


def _holder_ratio(f: Polynomial, ell: int, eps: float, grid: np.ndarray, norm_f: float, rng) -> float:
    ders = _derivatives(f, ell)
    if all(g.degree == 0 for g in ders):
        return 0.0
    idx = rng.integers(0, len(grid), size=(2000, 2))
    a, b = grid[idx[:, 0]], grid[idx[:, 1]]
    dist = np.sqrt(((a - b) ** 2).sum(1))
    ok = dist > 0
    worst = 0.0
    for g in ders:
        dv = np.abs(g.evaluate_array(a[ok]) - g.evaluate_array(b[ok])) / dist[ok] ** eps
        worst = max(worst, float(dv.max()) if len(dv) else 0.0)
    return worst / norm_f if norm_f else float("inf")


def _affine_piece(f: Polynomial, beta, norm_f, level: int) -> CoverPiece:
    grad = [f.derivative(i) for i in range(f.nvars)]
    normal = [g.as_dict().get((0,) * f.nvars, Fraction(0)) for g in grad]
    const = f.as_dict().get((0,) * f.nvars, Fraction(0))
    plane = Hyperplane(tuple(normal), -const, True)
    nsq = sum(c * c for c in normal)
    root = exact_sqrt(nsq)
    if isinstance(beta, Fraction) and isinstance(norm_f, Fraction) and root is not None:
        thick = beta * norm_f / root
    else:
        thick = float(beta) * float(norm_f) / math.sqrt(float(nsq))
    return CoverPiece(plane, (0.0,) * f.nvars, 1.0, thick, level)


def _affine_sup_norm(f: Polynomial):
    """``sup`` of ``|a.x + c|`` over the unit ball is ``|c| + |a|``."""
    const = f.as_dict().get((0,) * f.nvars, Fraction(0))
    nsq = sum(f.derivative(i).as_dict().get((0,) * f.nvars, Fraction(0)) ** 2 for i in range(f.nvars))
    root = exact_sqrt(nsq)
    return abs(const) + root if root is not None else abs(float(const)) + math.sqrt(float(nsq))


def _cover(f: Polynomial, ell: int, eps: float, beta, level: int, grid: np.ndarray, warnings: list) -> list:
    vals = f.evaluate_array(grid)
    norm_f = float(np.abs(vals).max()) if len(vals) else 0.0
    if f.degree <= 1 and not f.is_zero():
        norm_exact = _affine_sup_norm(f)
        zmask = np.abs(vals) <= float(beta) * float(norm_exact) * (1 + 1e-12)
        if f.degree == 0 or not zmask.any():
            return []
        return [[_affine_piece(f, beta, norm_exact, level)]]
    zmask = np.abs(vals) <= float(beta) * norm_f
    if not zmask.any():
        return []
    if ell <= 0:
        warnings.append(f"level {level}: the sublevel set is nonempty at ell = 0; beta is not small enough")
        return []
    ders = [f.derivative(i) for i in range(f.nvars)]
    dnorms = [float(np.abs(g.evaluate_array(grid)).max()) for g in ders]
    i = int(np.argmax(dnorms))
    g = ders[i]
    gamma = eps if ell == 1 else 1.0
    sub_beta = float(beta) ** (gamma / 4)
    sub = _cover(g, ell - 1, eps, sub_beta, level + 1, grid, warnings)
    beta1 = float(beta) ** 0.5
    gvals = np.abs(g.evaluate_array(grid))
    region = gvals > sub_beta * dnorms[i]
    cand = grid[zmask & region]
    pieces = []
    if len(cand):
        kept = greedy_net_array(cand, beta1)
        thick = beta1 ** (1 + gamma / 3)
        grads = [dg.evaluate_array(cand[kept]) for dg in ders]
        fv = f.evaluate_array(cand[kept])
        for row, p in enumerate(cand[kept]):
            normal = [float(gr[row]) for gr in grads]
            if not any(normal):
                continue
            off = float(np.dot(normal, p)) - float(fv[row])
            pieces.append(CoverPiece(Hyperplane(tuple(normal), off, False), tuple(map(float, p)), beta1, thick, level))
    return [pieces] + sub


def _covered(points: np.ndarray, pieces: list) -> np.ndarray:
    hit = np.zeros(len(points), bool)
    for pc in pieces:
        c = np.asarray(pc.centre, float)
        inb = ((points - c) ** 2).sum(1) <= float(pc.radius) ** 2 * (1 + 1e-12)
        if not inb.any():
            continue
        dist = np.abs(pc.plane.signed_values(points[inb]))
        idx = np.nonzero(inb)[0]
        hit[idx[dist <= float(pc.thickness) * (1 + 1e-9) + 1e-15]] = True
    return hit


def cover_sublevel(f: Polynomial, ell: int, eps: float = 1.0, beta=Fraction(1, 1000), resolution: float = 1e-3,
                   seed=None) -> SublevelCover:
    """Hyperplane-slab covers of ``{x in unit ball : |f(x)| <= beta |f|}`` level by level."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if f.degree > ell:
        raise ValueError("f has degree larger than ell")
    grid = _disc_grid(f.nvars, resolution)
    warnings: list = []
    cols = _cover(f, ell, eps, beta, 1, grid, warnings)
    vals = f.evaluate_array(grid)
    norm_f = float(np.abs(vals).max()) if len(vals) else 0.0
    if f.degree <= 1 and not f.is_zero():
        norm_f = float(_affine_sup_norm(f))
    zmask = np.abs(vals) <= float(beta) * norm_f * (1 + 1e-12)
    zpts = grid[zmask]
    pieces = [p for c in cols for p in c]
    cov = _covered(zpts, pieces) if len(zpts) else np.zeros(0, bool)
    uncovered = [tuple(map(float, p)) for p in zpts[~cov]]
    ratio = _holder_ratio(f, ell, eps, grid, norm_f, _rng(seed))
    return SublevelCover(cols, int(len(zpts)), uncovered, ratio, warnings)


# --- simplex covering sums -------------------------------------------------------

@dataclass
class SimplexSum:
    n: int
    rho: float
    Q: int
    total: float
    ball_total: float
    net_size: int
    evaluated: int
    no_rationals: int
    containment_ok: bool
    estimated: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def simplex_cover_sum(mu: MeasureOracle, gamma: float, H: int = 2, n: int = 1, E_filter: Callable | None = None,
                      n_samples: int = 20000, max_points: int = 4000, seed=None) -> SimplexSum:
    """``sum_y mu(N(L_{n,y}, rho_n^(1+gamma)) n B(y, rho_n))`` over a ``rho_n``-net of support samples."""
    if H <= 1 or n < 1:
        raise ValueError("need H > 1 and n >= 1")
    d = mu.dim
    rng = _rng(seed)
    rho = Fraction(1, 2 * H ** ((d + 1) * n))
    pts = np.asarray(mu.sample(rng, n_samples), float).reshape(-1, d)
    if E_filter is not None:
        pts = pts[np.array([bool(E_filter(p)) for p in pts], bool)]
    net = pts[greedy_net_array(pts, float(rho))]
    estimated = len(net) > max_points
    if estimated:
        net = net[rng.choice(len(net), max_points, replace=False)]
    eps_power = default_eps_power(d)
    total = 0.0
    ball_total = 0.0
    none = 0
    contained = True
    width = float(rho) ** (1 + gamma)
    Q = 0
    for y in net:
        yq = tuple(Fraction(float(v)) for v in y)
        try:
            res = simplex_hyperplane(yq, rho, d, eps_power)
        except RationalSimplexViolation:
            raise
        Q = res.height
        ball = Ball(Point(tuple(float(v) for v in y), False), float(rho), EUCLIDEAN)
        bm = _ball_mass(mu, ball, 1e-3 * float(rho) ** d, rng, 0.01)
        ball_total += float(bm.estimate)
        if res.plane is None:
            none += 1
            continue
        # the slab is far thinner than the ball, so its tolerance follows the slab's own volume
        slab = _mass(mu, SlabRegion(res.plane.to_float(), width, ball), 1e-3 * width * float(rho) ** (d - 1), rng, 0.01)
        total += float(slab.estimate)
        if float(slab.lo) > float(bm.hi) + 1e-12:
            contained = False
    scale = (len(pts) and 1.0)
    if estimated:
        full = len(pts[greedy_net_array(pts, float(rho))])
        scale = full / len(net)
        total *= scale
        ball_total *= scale
    return SimplexSum(n, float(rho), Q, total, ball_total, int(len(net)), int(len(net)), none, contained, estimated)


# --- the counterexample measure ----------------------------------------------

@dataclass
class CounterexampleWitness:
    found: bool
    n: int | None
    rho: Fraction
    y: Fraction | None
    beta: Fraction | None
    ratio: Surd | None
    ratios: list  # (n, Surd) for every scanned n with q_n near x
    best: tuple | None

    def to_json(self) -> dict:
        return {"found": self.found, "n": self.n, "rho": str(self.rho),
                "y": None if self.y is None else str(self.y), "beta": None if self.beta is None else str(self.beta),
                "ratio": None if self.ratio is None else self.ratio.to_json(),
                "ratios": [{"n": k, "ratio": r.to_json()} for k, r in self.ratios],
                "best": None if self.best is None else {"n": self.best[0], "ratio": self.best[1].to_json()}}


def counterexample_search(spec: CounterexampleSpec, C, alpha, rho0, x=Fraction(1, 2),
                          scan_all: bool = False) -> CounterexampleWitness:
    """Scan spikes ``q_n`` within ``rho/2`` of ``x``; compare ``mu(B(q_n, 1/b_n) n B) / (beta^alpha mu(B))`` with ``C``.

    With ``alpha = p/q`` the ratio is the exact surd
    ``((m_S / m_B)^q / beta^p)^(1/q)``.
    """
    C, alpha, rho, x = to_fraction(C), to_fraction(alpha), to_fraction(rho0), to_fraction(x)
    if C <= 0 or alpha <= 0 or rho <= 0:
        raise ValueError("C, alpha and rho0 must be positive")
    mu = CounterexampleMeasure(spec)
    m_ball = mu.interval_mass(x - rho, x + rho)
    if m_ball == 0:
        raise ValueError("the ball has no mass")
    p, q = alpha.numerator, alpha.denominator
    ratios, witness, best = [], None, None
    for s in mu.spikes:
        if abs(s.center - x) > rho / 2:
            continue
        beta = s.half_width / rho
        if beta > 1:
            continue
        m_s = mu.interval_mass(max(s.center - s.half_width, x - rho), min(s.center + s.half_width, x + rho))
        ratio = Surd((m_s / m_ball) ** q / beta ** p, q)
        ratios.append((s.index, ratio))
        if best is None or ratio > best[1]:
            best = (s.index, ratio)
        if witness is None and ratio > C:
            witness = (s, beta, ratio)
            if not scan_all:
                break
    if witness is None:
        return CounterexampleWitness(False, None, rho, None, None, None, ratios, best)
    s, beta, ratio = witness
    return CounterexampleWitness(True, s.index, rho, s.center, beta, ratio, ratios, best)
