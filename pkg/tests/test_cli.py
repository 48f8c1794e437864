import csv
import json

import pytest

from quasidecay import cli
from quasidecay.reports import SCHEMA_VERSION, collect_warnings


def _report(out):
    return json.loads((out / "report.json").read_text())


def test_exponent_cf_example(tmp_path):
    code = cli.main(["exponent", "--cf", "--x", "0.6180339887", "--qmax", "1e6", "--out", str(tmp_path)])
    assert code == 0
    rep = _report(tmp_path)
    assert rep["schema_version"] == SCHEMA_VERSION
    assert abs(rep["results"]["value"] - 2) <= 0.05
    assert rep["config"]["params"]["qmax"] == 10 ** 6
    with (tmp_path / "records.csv").open() as fh:
        assert "q" in next(csv.reader(fh))


def test_verify_plucker_example(tmp_path):
    code = cli.main(["verify-plucker", "--m", "2", "--n", "2", "--trials", "50", "--seed", "7", "--out", str(tmp_path)])
    assert code == 0
    rep = _report(tmp_path)
    assert rep["results"]["passed"] == rep["results"]["trials"] == 50
    assert rep["seed"] == 7 and rep["passed"]


def test_unknown_field_is_named(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"subcommand": "exponent", "params": {"x": "0.5", "qmaxx": 10}}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "qmaxx" in capsys.readouterr().err
    cfg.write_text(json.dumps({"subcommand": "exponent", "colour": "red"}))
    assert cli.main(["run", "--config", str(cfg)]) == 1
    assert "colour" in capsys.readouterr().err


def test_bad_usage_exits_one(capsys):
    assert cli.main(["exponent", "--bogus", "1"]) == 1
    assert "--bogus" in capsys.readouterr().err
    assert cli.main(["--version"]) == 0


def test_run_without_config_is_an_error(capsys):
    assert cli.main(["run"]) == 1
    assert "--config" in capsys.readouterr().err


def test_failed_assertion_exits_two(tmp_path):
    code = cli.main(["counterexample-search", "--C", "1e9", "--n-max", "3", "--out", str(tmp_path)])
    assert code == 2
    rep = _report(tmp_path)
    assert rep["passed"] is False and rep["assertions"]["witness_found"] is False


def test_config_and_flags_merge(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subcommand": "flag-suite", "seed": 3, "params": {"runs": 4, "height": 1}}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    rep = _report(tmp_path / "a")
    assert rep["seed"] == 3 and rep["config"]["params"]["runs"] == 4 and rep["config"]["params"]["height"] == 1
    assert cli.main(["flag-suite", "--config", str(cfg), "--runs", "2", "--out", str(tmp_path / "b")]) == 0
    assert _report(tmp_path / "b")["config"]["params"]["runs"] == 2


def test_reports_are_byte_identical(tmp_path):
    args = ["flag-suite", "--runs", "5", "--seed", "11"]
    assert cli.main(args + ["--out", str(tmp_path / "one")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "two")]) == 0
    assert (tmp_path / "one" / "report.json").read_bytes() != b""
    # wall-clock time lives only in run_meta.json, so the report bodies match exactly
    for name in ("report.json", "flag_plot.csv", "eta_graph.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    meta = json.loads((tmp_path / "two" / "run_meta.json").read_text())
    assert meta["threads"] == 1 and meta["wall_clock_s"] >= 0


def test_flag_plot_series(tmp_path):
    assert cli.main(["flag-suite", "--runs", "3", "--out", str(tmp_path)]) == 0
    with (tmp_path / "flag_plot.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert rows and set(rows[0]) == {"dim", "log_f"}
    with (tmp_path / "eta_graph.csv").open() as fh:
        eta = list(csv.DictReader(fh))
    assert [int(r["dim"]) for r in eta] == [0, 1, 2]


def test_trajectory_series(tmp_path):
    assert cli.main(["trajectory", "--tau-max", "6", "--out", str(tmp_path)]) == 0
    with (tmp_path / "trajectory.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["tau", "delta", "ratio"]
    assert len(rows) == _report(tmp_path)["results"]["points"]
    taus = [float(r["tau"]) for r in rows]
    assert taus == sorted(taus) and 0 < taus[0] and taus[-1] <= 6


def test_decay_fit_series(tmp_path):
    params = {"measure": {"kind": "lebesgue", "dim": 1}, "mode": "absolute", "n_centers": 2,
              "rho_grid": ["1/4"], "beta_grid": ["1/3", "1/9", "1/27"]}
    cfg = tmp_path / "d.json"
    cfg.write_text(json.dumps({"subcommand": "decay-profile", "params": params}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    with (tmp_path / "o" / "decay_fit.csv").open() as fh:
        header = next(csv.reader(fh))
    assert header == ["log_beta", "log_ratio"]


def test_correspondence_golden(tmp_path):
    assert cli.main(["correspondence", "--qmax", "1e5", "--tau-max", "25", "--out", str(tmp_path)]) == 0
    assert _report(tmp_path)["results"]["discrepancy"] <= 0.1


def test_warnings_surface(monkeypatch, tmp_path):
    def noisy(p, seed, track):
        return {"inner": {"warnings": ["pool truncated"]}, "probes": [{"warnings": ["probe dropped"]}]}, {"ok": True}, {}

    props, defaults, _ = cli.SUBCOMMANDS["simplex-check"]
    monkeypatch.setitem(cli.SUBCOMMANDS, "simplex-check", (props, defaults, noisy))
    assert cli.main(["simplex-check", "--out", str(tmp_path)]) == 0
    warnings = _report(tmp_path)["warnings"]
    assert any("pool truncated" in w for w in warnings) and any("probe dropped" in w for w in warnings)


def test_collect_warnings_walks_everything():
    doc = {"a": {"warnings": ["x"]}, "b": [{"c": {"warnings": ["y", "z"]}}], "warnings": []}
    assert len(collect_warnings(doc)) == 3


def test_downstream_errors_are_wrapped(tmp_path, capsys):
    code = cli.main(["exponent", "--x", "0.5", "--matrix", "[[1]]", "--out", str(tmp_path)])
    assert code == 1
    assert "exactly one" in capsys.readouterr().err


@pytest.mark.parametrize("name", sorted(cli.SUBCOMMANDS))
def test_every_subcommand_has_a_parser(name):
    args = cli.build_parser().parse_args([name])
    assert args.subcommand == name
