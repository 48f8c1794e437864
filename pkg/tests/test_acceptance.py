"""Acceptance criteria, one test each.

Every check records a PASS/FAIL line that the terminal summary prints (see
conftest.py).  Each criterion's payload is cached so the determinism check
can rerun it with the same seed and compare bytes.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from quasidecay.cli import GOLDEN, resolve, run
from quasidecay.decay import ProbePlan, decay_profile, local_dimension
from quasidecay.diophantine import omega_mult_vector, omega_vector
from quasidecay.dynamics import xi
from quasidecay.measures import lebesgue_cube, segment_in_plane
from quasidecay.reports import dumps

ACCEPTANCE_LINES: list[str] = []
_PAYLOADS: dict[int, str] = {}


def _record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def _cli(sub: str, params: dict, seed: int = 20240601) -> dict:
    return run(resolve(sub, params, None, seed, None, None), None)


# each builder returns (payload, checks, detail); checks is a list of (label, bool)

def _identity():
    t0 = time.perf_counter()
    reports = [_cli("verify-plucker", {"m": m, "n": n, "trials": 50, "height": 2, "max_den": 16}, seed=100 + 10 * m + n)
               for m in (1, 2) for n in (1, 2)]
    elapsed = time.perf_counter() - t0
    passed = sum(r["results"]["passed"] for r in reports)
    trials = sum(r["results"]["trials"] for r in reports)
    checks = [("200/200 exact identities", passed == trials == 200), ("runtime < 60 s", elapsed < 60)]
    return reports, checks, f"{passed}/{trials} identities in {elapsed:.1f} s"


def _correspondence():
    t0 = time.perf_counter()
    rep = _cli("correspondence", {"matrix": [[GOLDEN]], "qmax": 10 ** 6, "tau_max": "30"})
    elapsed = time.perf_counter() - t0
    pairs = [(m, n) for m in range(1, 4) for n in range(1, 4)] + [(4, 1)]
    xi_ok = all(xi(0, m, n) == Fraction(n, m) and isinstance(xi(0, m, n), Fraction) for m, n in pairs)
    disc = rep["results"]["discrepancy"]
    checks = [("discrepancy <= 0.1", disc <= 0.1), ("xi(0) = N/M on 10 pairs", xi_ok and len(pairs) == 10),
              ("runtime < 30 s", elapsed < 30)]
    return rep, checks, f"discrepancy {disc:.4f}, {elapsed:.1f} s"


def _pigeonhole():
    rng = np.random.default_rng(20240601)
    simple, mult = {}, {}
    for d in (1, 2, 3):
        xs = rng.random((50, d))
        simple[d] = [omega_vector(list(map(float, x)), 10 ** 4).value for x in xs]
        mult[d] = [omega_mult_vector(list(map(float, x)), 10 ** 4).value for x in xs]
    checks = []
    for d in (1, 2, 3):
        checks.append((f"simple d={d} >= {1 + 1 / d - 0.05:.3f}", min(simple[d]) >= 1 + 1 / d - 0.05))
        checks.append((f"mult d={d} >= {d + 0.9:.1f}", min(mult[d]) >= d + 1 - 0.1))
    detail = ", ".join(f"d={d}: min {min(simple[d]):.3f}/{min(mult[d]):.3f}" for d in (1, 2, 3))
    return {"simple": simple, "mult": mult}, checks, detail


def _simplex():
    t0 = time.perf_counter()
    rep = _cli("simplex-check", {"trials": 100, "dims": [1, 2]})
    elapsed = time.perf_counter() - t0
    res = rep["results"]
    checks = [("100/100 affine-rank", res["passed"] == res["trials"] == 100), ("runtime < 60 s", elapsed < 60)]
    return rep, checks, f"{res['passed']}/{res['trials']} in {elapsed:.1f} s"


def _decay_consistency():
    t0 = time.perf_counter()
    cantor = _cli("decay-profile", {"mode": "quasi", "gamma": "1"})
    seg = decay_profile(segment_in_plane(), "quasi", 1.0, plan=ProbePlan(n_centers=4))
    elapsed = time.perf_counter() - t0
    fit = cantor["results"]
    seg_min = min(e["ratio"] for e in seg.log)
    checks = [("alpha_hat >= 0.15", fit["alpha_hat"] >= 0.15), ("r^2 >= 0.8", fit["r_squared"] >= 0.8),
              (">= 200 probes", fit["n_probes"] >= 200), ("segment ratios >= 0.9", seg_min >= 0.9),
              ("runtime < 5 min", elapsed < 300)]
    detail = (f"alpha {fit['alpha_hat']:.3f}, r^2 {fit['r_squared']:.3f}, {fit['n_probes']} probes, "
              f"segment min ratio {seg_min:.3f}, {elapsed:.0f} s")
    return {"cantor": cantor, "segment": seg.to_json() | {"log": seg.log}}, checks, detail


def _local_dimension():
    cantor = _cli("local-dimension", {})
    square = local_dimension(lebesgue_cube(2), (0.5, 0.5), [2.0 ** -k for k in range(2, 12)])
    c, s = cantor["results"]["mean_slope"], square.slope
    checks = [("Cantor 0.6309 +- 0.02", abs(c - math.log(2) / math.log(3)) <= 0.02),
              ("Lebesgue square 2 +- 0.05", abs(s - 2) <= 0.05)]
    return {"cantor": cantor, "square": square.to_json()}, checks, f"Cantor {c:.4f}, square {s:.4f}"


def _counterexample():
    t0 = time.perf_counter()
    rep = _cli("counterexample-search", {"C": "1", "alpha": "1/2", "rho0": "1", "n_max": 5})
    elapsed = time.perf_counter() - t0
    a = rep["assertions"]
    checks = [("witness with ratio > 1", a["witness_found"]), ("ratios increasing for n >= 2", a["ratios_increasing"]),
              ("runtime < 10 s", elapsed < 10)]
    return rep, checks, f"found={a['witness_found']}, increasing={a['ratios_increasing']}, {elapsed:.1f} s"


def _flags():
    t0 = time.perf_counter()
    rep = _cli("flag-suite", {"runs": 50, "m": 1, "n": 1, "height": 2})
    elapsed = time.perf_counter() - t0
    r = rep["results"]
    checks = [("base case 50/50", r["base_passed"] == r["runs"] == 50),
              ("inductive step", r["inductive_passed"] == r["inductive_applicable"]),
              ("extraction 50/50", r["extraction_passed"] == r["extraction_runs"] == 50),
              ("runtime < 2 min", elapsed < 120)]
    detail = (f"base {r['base_passed']}/{r['runs']}, inductive {r['inductive_passed']}/{r['inductive_applicable']}, "
              f"extraction {r['extraction_passed']}/{r['extraction_runs']}, {elapsed:.1f} s")
    return rep, checks, detail


def _measure_decay():
    t0 = time.perf_counter()
    leb = _cli("measure-decay", {})
    point = _cli("measure-decay", {"measure": {"kind": "point_mass", "point": ["1/2"]}, "n_samples": 2000})
    elapsed = time.perf_counter() - t0
    r = leb["results"]
    frac = dict(zip(r["taus"], r["fractions"]))
    eps = r["epsilon_hat"]
    checks = [("epsilon_hat > 0", eps is not None and eps > 0), ("fraction(14) < fraction(6)/2", frac[14] < frac[6] / 2),
              ("point mass does not decay", not point["results"]["decays"]), ("runtime < 5 min", elapsed < 300)]
    return {"lebesgue": leb, "point": point}, checks, (
        f"epsilon_hat {eps}, fractions tau=6 {frac[6]:.4f} tau=14 {frac[14]:.4f}, {elapsed:.0f} s")


BUILDERS = {1: _identity, 2: _correspondence, 3: _pigeonhole, 4: _simplex, 5: _decay_consistency,
            6: _local_dimension, 7: _counterexample, 8: _flags, 9: _measure_decay}


@pytest.mark.parametrize("number", sorted(BUILDERS))
def test_criterion(number):
    payload, checks, detail = BUILDERS[number]()
    _PAYLOADS[number] = dumps(payload)
    failed = [label for label, ok in checks if not ok]
    _record(number, not failed, detail + (f"  failed: {', '.join(failed)}" if failed else ""))
    assert not failed, detail


def test_criterion_determinism():
    mismatched = []
    for number, build in sorted(BUILDERS.items()):
        first = _PAYLOADS.get(number) or dumps(build()[0])
        if dumps(build()[0]) != first:
            mismatched.append(number)
    _record(10, not mismatched, f"{len(BUILDERS)} payloads rerun; mismatched: {mismatched or 'none'}")
    assert not mismatched
