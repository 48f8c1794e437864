"""Batch driver: one subcommand per operation, JSON config, deterministic reports.

Exit codes: 0 when every assertion holds, 2 when an assertion fails (a
counterexample), 1 on operational errors such as schema violations.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable

import jsonschema

from . import __version__
from .exact import to_fraction
from .measures import DEFAULT_SEED, measure_from_json
from .reports import build_report, dumps, emit_plot_data

DECIMAL = r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?(/\d+)?$"
NUM = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": DECIMAL}]}
NUM_LIST = {"type": "array", "items": NUM, "minItems": 1}
INT = {"type": "integer"}
POS_INT = {"type": "integer", "minimum": 1}
BOOL = {"type": "boolean"}
MEASURE = {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string"}}}
MATRIX = {"type": "array", "minItems": 1, "items": NUM_LIST}

CANTOR = {"kind": "cantor"}
# (sqrt 5 - 1) / 2 to 60 digits; 16 digits run out of precision near tau = 18
GOLDEN = "0.61803398874989484820458683436563811772030917980576286213545"


class ConfigError(ValueError):
    pass


def _num(v) -> Fraction:
    return to_fraction(v)


def _float(v) -> float:
    return float(to_fraction(v))


def _grid(values) -> list[float]:
    return [_float(v) for v in values]


# --- runners ----------------------------------------------------------------------
# each takes (params, seed, track) and returns (results, assertions, series)

def run_exponent(p, seed, track):
    from .diophantine import omega_matrix, omega_mult_matrix, omega_mult_vector, omega_vector

    if ("x" in p) == ("matrix" in p):
        raise ConfigError("give exactly one of 'x' and 'matrix'")
    conv = (lambda v: float(to_fraction(v))) if track == "float" else (lambda v: v)
    q_max = p["qmax"]
    if "matrix" in p:
        a = [[conv(v) for v in row] for row in p["matrix"]]
        est = omega_mult_matrix(a, q_max) if p["mult"] else omega_matrix(a, q_max)
    else:
        xs = p["x"] if isinstance(p["x"], list) else [p["x"]]
        xs = [conv(v) for v in xs]
        if p["mult"]:
            est = omega_mult_vector(xs, q_max)
        else:
            est = omega_vector(xs, q_max, method="cf" if p["cf"] else "brute")
    res = est.to_json()
    series = {"records": [r.to_json() | {"q": r.q[0] if len(r.q) == 1 else str(list(r.q)),
                                         "p": r.p[0] if len(r.p) == 1 else str(list(r.p))}
                          for r in est.records]}
    return res, {}, series


def run_verify_plucker(p, seed, track):
    from .plucker import identity_suite

    rep = identity_suite(p["trials"], seed, shapes=[(p["m"], p["n"])], height=p["height"],
                         max_den=p["max_den"], max_k=p["max_k"])
    return rep.to_json(), {"identity_holds": rep.passed == rep.trials}, {}


def run_simplex_check(p, seed, track):
    from .diophantine import simplex_suite

    rep = simplex_suite(p["trials"], seed, dims=p["dims"])
    return rep.to_json(), {"affine_rank_below_d": rep.passed == rep.trials}, {}


def run_simplex_sum(p, seed, track):
    from .decay import simplex_cover_sum

    mu = measure_from_json(p["measure"])
    res = simplex_cover_sum(mu, _float(p["gamma"]), H=p["H"], n=p["level"], n_samples=p["n_samples"], seed=seed)
    return res.to_json(), {"slabs_inside_balls": res.containment_ok}, {}


def run_counterexample(p, seed, track):
    from .decay import counterexample_search
    from .measures import CounterexampleSpec

    w = counterexample_search(CounterexampleSpec(p["n_max"]), _num(p["C"]), _num(p["alpha"]), _num(p["rho0"]),
                              _num(p["x"]), scan_all=True)
    later = [r for n, r in w.ratios if n >= 2]
    increasing = all(a < b for a, b in zip(later, later[1:]))
    series = {"counterexample_ratios": [{"n": n, "ratio": float(r), "ratio_base": r.to_json()["base"], "ratio_root": r.root}
                                        for n, r in w.ratios]}
    return w.to_json(), {"witness_found": w.found, "ratios_increasing": increasing}, series


def run_decay_profile(p, seed, track):
    from .decay import ProbePlan, decay_profile

    mu = measure_from_json(p["measure"])
    plan = ProbePlan(n_centers=p["n_centers"], rho_grid=tuple(_grid(p["rho_grid"])),
                     beta_grid=tuple(_grid(p["beta_grid"])), n_samples=p["n_samples"], norm=p["norm"], seed=seed)
    fit = decay_profile(mu, p["mode"], _float(p["gamma"]), plan=plan)
    res = fit.to_json()
    asserts = {}
    if "min_alpha" in p:
        asserts["alpha_at_least_min"] = fit.alpha_hat >= _float(p["min_alpha"])
    series = {"decay_fit": fit.csv_rows(), "decay_probes": [
        {"x": str(e["x"]), "rho": e["rho"], "beta": e["beta"], "ratio": e["ratio"],
         "ratio_lo": e["bracket"][0], "ratio_hi": e["bracket"][1]} for e in fit.log]}
    return res, asserts, series


def run_local_dimension(p, seed, track):
    from .decay import local_dimension, mean_local_dimension

    mu = measure_from_json(p["measure"])
    rhos = [_num(r) for r in p["rho_grid"]]
    if "point" in p:
        ld = local_dimension(mu, tuple(_num(v) for v in p["point"]), rhos, p["norm"])
        return ld.to_json(), {}, {"local_dimension": [
            {"log_rho": math.log(float(r)), "log_mass_lo": math.log(float(a)), "log_mass_hi": math.log(float(b))}
            for r, (a, b) in zip(ld.rhos, ld.masses)]}
    mean, slopes = mean_local_dimension(mu, rhos, p["n_points"], seed, p["norm"])
    return {"mean_slope": mean, "slopes": slopes}, {}, {}


def run_federer(p, seed, track):
    from .decay import federer_ratio, support_probes

    mu = measure_from_json(p["measure"])
    probes = support_probes(mu, p["n_centers"], [_num(r) for r in p["rho_grid"]], seed)
    res = federer_ratio(mu, _num(p["K"]), probes, p["norm"])
    return res.to_json(), {}, {}


def run_quasi_federer(p, seed, track):
    from .decay import quasi_federer_check, support_probes

    mu = measure_from_json(p["measure"])
    probes = support_probes(mu, p["n_centers"], _grid(p["rho_grid"]), seed)
    res = quasi_federer_check(mu, _float(p["eps"]), probes, _float(p["delta"]) if "delta" in p else None, p["norm"])
    return res.to_json(), {}, {}


def run_cover_sublevel(p, seed, track):
    from .decay import cover_sublevel
    from .poly import Polynomial

    poly = Polynomial.from_json(p["nvars"], p["polynomial"])
    cov = cover_sublevel(poly, p["ell"], _float(p["eps"]), _num(p["beta"]), _float(p["resolution"]), seed)
    return cov.to_json(), {"cover_verified": cov.verified}, {}


def _chain(p, m, n, track):
    from .dynamics import s0_chain

    return s0_chain(m, n, _float(p["tau_max"]), _float(p["step"]), exact=(track == "exact"))


def run_trajectory(p, seed, track):
    from .dynamics import trajectory

    a = p["matrix"]
    traj = trajectory(a, _chain(p, len(a), len(a[0]), track))
    rows = [{"tau": t, "delta": d, "ratio": r} for t, d, r in zip(traj.taus, traj.deltas, traj.ratios)]
    res = {"points": len(rows), "skipped": traj.skipped,
           "warnings": [f"skipped {len(traj.skipped)} points"] if traj.skipped else []}
    return res, {}, {"trajectory": rows}


def run_correspondence(p, seed, track):
    from .dynamics import correspondence_check

    a = p["matrix"]
    rep = correspondence_check(a, p["qmax"], _chain(p, len(a), len(a[0]), track))
    ok = rep.discrepancy <= _float(p["tolerance"])
    return rep.to_json(), {"discrepancy_within_tolerance": ok}, {}


def run_flag_suite(p, seed, track):
    import random

    from .flags import base_case, flag_suite, random_instance
    from .plucker import enumerate_vertices

    rep = flag_suite(p["runs"], seed, p["m"], p["n"], p["height"], p["max_k"], p["c_base"])
    # plot data from one base case: covolumes by dimension and the eta graph
    rng = random.Random(seed)
    sample, t = random_instance(rng, p["m"], p["n"], max_k=p["max_k"])
    base = base_case(sample, t, enumerate_vertices(p["m"], p["n"], p["height"]), c_base=p["c_base"],
                     pool_height=p["height"])
    scatter = sorted(({"dim": len(rows), "log_f": 0.5 * math.log(float(f_sq))} for rows, f_sq in base.f_sq.items()
                      if f_sq > 0), key=lambda r: (r["dim"], r["log_f"]))
    eta = [{"dim": j, "log_eta": math.log(v) if v > 0 else "-inf"} for j, v in enumerate(base.eta.floats())]
    return rep.to_json(), {"flag_suite_passed": rep.passed}, {"flag_plot": scatter, "eta_graph": eta}


def run_measure_decay(p, seed, track):
    from .flags import measure_decay_experiment

    mu = measure_from_json(p["measure"])
    exp = measure_decay_experiment(mu, _grid(p["box_lo"]), _grid(p["box_hi"]), _float(p["gamma"]),
                                   _grid(p["taus"]), n_samples=p["n_samples"], seed=seed, m=p["m"], n=p["n"],
                                   demo_points=p["demo_points"])
    asserts = {}
    if "expect_decay" in p:
        asserts["decay_as_expected"] = exp.decays == p["expect_decay"]
    return exp.to_json(), asserts, {"decay_hits": exp.csv_rows()}


# --- registry -----------------------------------------------------------------------

GRID_RHO = ["1/3", "1/9", "1/27"]
GRID_BETA = ["1/3", "1/9", "1/27", "1/81", "1/243", "1/729"]

SUBCOMMANDS: dict[str, tuple[dict, dict, Callable]] = {
    "exponent": ({"x": {"anyOf": [NUM, NUM_LIST]}, "matrix": MATRIX, "qmax": POS_INT, "cf": BOOL, "mult": BOOL},
                 {"qmax": 10_000, "cf": False, "mult": False}, run_exponent),
    "verify-plucker": ({"m": POS_INT, "n": POS_INT, "trials": POS_INT, "height": POS_INT, "max_den": POS_INT,
                        "max_k": INT},
                       {"m": 1, "n": 1, "trials": 50, "height": 2, "max_den": 16, "max_k": 6}, run_verify_plucker),
    "simplex-check": ({"trials": POS_INT, "dims": {"type": "array", "items": POS_INT, "minItems": 1}},
                      {"trials": 100, "dims": [1, 2]}, run_simplex_check),
    "simplex-sum": ({"measure": MEASURE, "gamma": NUM, "H": {"type": "integer", "minimum": 2}, "level": POS_INT,
                     "n_samples": POS_INT},
                    {"measure": {"kind": "lebesgue", "dim": 2}, "gamma": "0.5", "H": 2, "level": 1, "n_samples": 5000},
                    run_simplex_sum),
    "counterexample-search": ({"n_max": INT, "C": NUM, "alpha": NUM, "rho0": NUM, "x": NUM},
                              {"n_max": 5, "C": "1", "alpha": "1/2", "rho0": "1", "x": "1/2"}, run_counterexample),
    "decay-profile": ({"measure": MEASURE, "mode": {"enum": ["absolute", "quasi", "decaying", "weak-quasi"]},
                       "gamma": NUM, "n_centers": POS_INT, "rho_grid": NUM_LIST, "beta_grid": NUM_LIST,
                       "n_samples": POS_INT, "norm": {"enum": ["euclidean", "sup"]}, "min_alpha": NUM},
                      {"measure": {"kind": "product", "factors": [CANTOR, CANTOR]}, "mode": "quasi", "gamma": "1",
                       "n_centers": 14, "rho_grid": GRID_RHO, "beta_grid": GRID_BETA, "n_samples": 1024,
                       "norm": "euclidean"}, run_decay_profile),
    "local-dimension": ({"measure": MEASURE, "point": NUM_LIST, "rho_grid": NUM_LIST, "n_points": POS_INT,
                         "norm": {"enum": ["euclidean", "sup"]}},
                        {"measure": CANTOR, "rho_grid": [f"1/{3 ** k}" for k in range(2, 12)], "n_points": 16,
                         "norm": "sup"}, run_local_dimension),
    "federer": ({"measure": MEASURE, "K": NUM, "rho_grid": NUM_LIST, "n_centers": POS_INT,
                 "norm": {"enum": ["euclidean", "sup"]}},
                {"measure": CANTOR, "K": "3", "rho_grid": [f"1/{3 ** k}" for k in range(2, 8)], "n_centers": 20,
                 "norm": "sup"}, run_federer),
    "quasi-federer": ({"measure": MEASURE, "eps": NUM, "delta": NUM, "rho_grid": NUM_LIST, "n_centers": POS_INT,
                       "norm": {"enum": ["euclidean", "sup"]}},
                      {"measure": CANTOR, "eps": "0.3", "rho_grid": ["1e-1", "1e-2", "1e-3", "1e-4", "1e-5"],
                       "n_centers": 20, "norm": "sup"}, run_quasi_federer),
    "cover-sublevel": ({"nvars": POS_INT, "polynomial": {"type": "array", "items": {
                            "type": "object", "required": ["coef", "powers"], "additionalProperties": False,
                            "properties": {"coef": NUM, "powers": {"type": "array", "items": INT}}}},
                        "ell": INT, "eps": NUM, "beta": NUM, "resolution": NUM},
                       {"nvars": 2, "polynomial": [{"coef": "1", "powers": [2, 0]}, {"coef": "1", "powers": [0, 2]},
                                                   {"coef": "-1/4", "powers": [0, 0]}],
                        "ell": 2, "eps": "1", "beta": "1/1000", "resolution": "0.002"}, run_cover_sublevel),
    "trajectory": ({"matrix": MATRIX, "tau_max": NUM, "step": NUM},
                   {"matrix": [[GOLDEN]], "tau_max": "30", "step": "1"}, run_trajectory),
    "correspondence": ({"matrix": MATRIX, "qmax": POS_INT, "tau_max": NUM, "step": NUM, "tolerance": NUM},
                       {"matrix": [[GOLDEN]], "qmax": 1_000_000, "tau_max": "30", "step": "1",
                        "tolerance": "0.1"}, run_correspondence),
    "flag-suite": ({"runs": POS_INT, "m": POS_INT, "n": POS_INT, "height": POS_INT, "max_k": POS_INT,
                    "c_base": POS_INT},
                   {"runs": 50, "m": 1, "n": 1, "height": 2, "max_k": 8, "c_base": 4}, run_flag_suite),
    "measure-decay": ({"measure": MEASURE, "box_lo": NUM_LIST, "box_hi": NUM_LIST, "gamma": NUM, "taus": NUM_LIST,
                       "n_samples": POS_INT, "m": POS_INT, "n": POS_INT, "demo_points": INT, "expect_decay": BOOL},
                      {"measure": {"kind": "lebesgue", "dim": 1}, "box_lo": ["0"], "box_hi": ["1"], "gamma": "0.5",
                       "taus": [str(k) for k in range(2, 15)], "n_samples": 10_000, "m": 1, "n": 1,
                       "demo_points": 0}, run_measure_decay),
}


def params_schema(subcommand: str) -> dict:
    props = SUBCOMMANDS[subcommand][0]
    return {"type": "object", "additionalProperties": False, "properties": props}


CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["subcommand"],
    "properties": {
        "subcommand": {"enum": sorted(SUBCOMMANDS)},
        "seed": {"type": "integer", "minimum": 0},
        "track": {"enum": ["exact", "float"]},
        "threads": POS_INT,
        "out": {"type": "string"},
        "params": {"type": "object"},
    },
}


def _coerce(props: dict, params: dict) -> dict:
    """Integer fields may arrive as decimal strings such as ``"1e6"``."""
    out = dict(params)
    for k, v in params.items():
        if props.get(k, {}).get("type") in ("integer",) and isinstance(v, str):
            try:
                q = to_fraction(v)
            except (ValueError, ZeroDivisionError):
                continue
            if q.denominator == 1:
                out[k] = q.numerator
    return out


def _validate(schema: dict, doc: dict, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"{what}{' at ' + where if where else ''}: {exc.message}") from None


def resolve(subcommand: str | None, cli_params: dict, config: dict | None, seed: int | None,
            track: str | None, threads: int | None) -> dict:
    """Merge defaults, config file and command line (in increasing priority) and validate."""
    config = config or {}
    _validate(CONFIG_SCHEMA, {"subcommand": subcommand or config.get("subcommand", ""), **{
        k: v for k, v in config.items() if k != "subcommand"}}, "config")
    sub = subcommand or config["subcommand"]
    if config.get("subcommand") not in (None, sub):
        raise ConfigError(f"config is for {config['subcommand']!r}, command line asked for {sub!r}")
    props, defaults, _ = SUBCOMMANDS[sub]
    given = _coerce(props, {**config.get("params", {}), **cli_params})
    _validate(params_schema(sub), given, f"params for {sub}")
    params = {**defaults, **given}
    if "x" in given or "matrix" in given:
        for key in ("x", "matrix"):
            if key not in given:
                params.pop(key, None)
    return {"subcommand": sub, "seed": DEFAULT_SEED if seed is None else seed,
            "track": track or config.get("track", "exact"), "threads": threads or config.get("threads", 1),
            "params": params}


def run(resolved: dict, out_dir: Path | None) -> dict:
    """Execute a resolved config; writes ``report.json``, CSV sidecars and ``run_meta.json``."""
    sub = resolved["subcommand"]
    runner = SUBCOMMANDS[sub][2]
    start = time.perf_counter()
    try:
        results, assertions, series = runner(resolved["params"], resolved["seed"], resolved["track"])
    except ConfigError:
        raise
    except Exception as exc:
        raise RuntimeError(f"{sub} failed: {type(exc).__name__}: {exc}") from exc
    elapsed = time.perf_counter() - start
    files = {name: f"{name}.csv" for name in sorted(series)}
    report = build_report(sub, resolved, resolved["seed"], results, assertions, files, __version__)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        emit_plot_data(series, out_dir)
        (out_dir / "report.json").write_text(dumps(report))
        (out_dir / "run_meta.json").write_text(dumps({"wall_clock_s": elapsed, "threads": resolved["threads"]}))
    return report


# --- argparse ---------------------------------------------------------------------------

def _parse_value(text: str):
    try:
        v = json.loads(text)
    except json.JSONDecodeError:
        return text
    # keep bare numbers as their literal text so decimals stay exact
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return int(text) if isinstance(v, int) else text
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--out", type=Path, default=None, help="output directory (default: out/<subcommand>)")
    common.add_argument("--threads", type=int, help="parallelism degree; recorded, work runs serially")
    common.add_argument("--track", choices=["exact", "float"], help="arithmetic track")
    parser = argparse.ArgumentParser(prog="quasidecay", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand")
    for name, (props, defaults, _) in SUBCOMMANDS.items():
        sp = subs.add_parser(name, parents=[common], help=f"run {name}")
        for key, schema in props.items():
            flag = "--" + key.replace("_", "-")
            if schema.get("type") == "boolean":
                sp.add_argument(flag, dest=f"p_{key}", action="store_const", const=True, default=None)
            else:
                sp.add_argument(flag, dest=f"p_{key}", type=_parse_value, default=None,
                                help=f"default: {json.dumps(defaults[key])}" if key in defaults else None)
    # config-only runs: `quasidecay run --config file.json`
    subs.add_parser("run", parents=[common], help="run the subcommand named in --config")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage; 2 is reserved for failed assertions
        return 0 if exc.code in (0, None) else 1
    if args.subcommand is None:
        parser.print_help()
        return 1
    try:
        config = json.loads(args.config.read_text()) if args.config else None
        sub = None if args.subcommand == "run" else args.subcommand
        if sub is None and not config:
            raise ConfigError("'run' needs --config")
        cli_params = {k[2:]: v for k, v in vars(args).items() if k.startswith("p_") and v is not None}
        resolved = resolve(sub, cli_params, config, args.seed if args.seed is not None else
                           (config or {}).get("seed"), args.track, args.threads)
        out = args.out or Path((config or {}).get("out", Path("out") / resolved["subcommand"]))
        report = run(resolved, out)
    except (ConfigError, RuntimeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    status = "PASS" if report["passed"] else "COUNTEREXAMPLE"
    print(f"{resolved['subcommand']}: {status}; report at {Path(out) / 'report.json'}")
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return 0 if report["passed"] else 2


if __name__ == "__main__":
    sys.exit(main())
