"""Deterministic JSON reports and CSV sidecars."""

from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any

SCHEMA_VERSION = 1


def clean(value: Any) -> Any:
    """Make ``value`` JSON-safe with a stable form: rationals as strings, non-finite floats named."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else value.numerator
    if hasattr(value, "to_json"):
        return clean(value.to_json())
    try:
        f = float(value)
    except (TypeError, ValueError):
        return str(value)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return f


def collect_warnings(payload: Any, path: str = "") -> list[str]:
    """Every non-empty ``warnings`` list found anywhere in the payload, tagged by its location."""
    out: list[str] = []
    if isinstance(payload, dict):
        for k, v in payload.items():
            here = f"{path}.{k}" if path else str(k)
            if k == "warnings" and isinstance(v, list):
                out.extend(f"{path or 'results'}: {w}" for w in v)
            else:
                out.extend(collect_warnings(v, here))
    elif isinstance(payload, list):
        for i, v in enumerate(payload):
            out.extend(collect_warnings(v, f"{path}[{i}]"))
    return out


def dumps(payload: Any) -> str:
    return json.dumps(clean(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_csv(path: Path, rows: list[dict]) -> None:
    """One CSV per series; the header is the key set of the first row."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if not rows:
            fh.write("")
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: clean(v) for k, v in row.items()})


def emit_plot_data(series: dict[str, list[dict]], out_dir: Path) -> dict[str, str]:
    """Write each series to ``<name>.csv``; returns name -> file name."""
    written = {}
    for name in sorted(series):
        fname = f"{name}.csv"
        write_csv(Path(out_dir) / fname, series[name])
        written[name] = fname
    return written


def build_report(subcommand: str, config: dict, seed: int, results: dict, assertions: dict,
                 series_files: dict, version: str) -> dict:
    warnings = collect_warnings(results)
    return {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": version,
        "subcommand": subcommand,
        "seed": seed,
        "config": config,
        "results": results,
        "assertions": {k: bool(v) for k, v in sorted(assertions.items())},
        "passed": all(assertions.values()),
        "warnings": warnings,
        "series": series_files,
    }
