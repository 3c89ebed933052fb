import csv
import io
import json
import math

import pytest

from polyww.cli import main
from polyww.config import ConfigError, ExperimentConfig
from polyww.scenarios import SCENARIOS, run_scenario

SQ = math.sqrt(2) - 1


def run_cli(tmp_path, capsys, cfg: dict, *args):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code = main(["--config", str(path), *args])
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(text)))


def test_config_round_trip_is_idempotent():
    d = {"system": {"type": "counterexample", "alpha": "sqrt2m1"}, "observable": {"character": [0, 1]},
         "start": [1, 0.3, 0.7], "phase": "witness", "checkpoints": [10, 100], "search": {"coarse_grid": 32},
         "params": {"b": [1, 2], "a": 1}, "rng_seed": 5}
    c1 = ExperimentConfig.from_dict(d)
    c2 = ExperimentConfig.from_json(c1.to_json())
    assert c1.to_json() == c2.to_json()
    assert c1.system["alpha"] == SQ and c1.search["coarse_grid"] == 32


@pytest.mark.parametrize("bad, path", [
    ({"bogus": 1}, "bogus"),
    ({"system": {"type": "torus?"}}, "system"),
    ({"observable": {"constant": "x", "dim": 1}}, "observable.constant"),
    ({"checkpoints": [10, 5]}, "checkpoints"),
    ({"search": {"coarse_grid": 1}}, "search"),
    ({"search": {"grid": 3}}, "search.grid"),
    ({"system": {"type": "counterexample", "alpha": 0.3}, "starts": [[2, 0.1, 0.2]]}, "starts[0]"),
    ({"phase": [0.1, "nan?"]}, "phase[1]"),
    ({"k": -1}, "k"),
    ({"rng_seed": 1.5}, "rng_seed"),
])
def test_config_errors_name_the_field(bad, path):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(bad)
    assert err.value.path == path
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")


def test_orbit_counterexample_rows(tmp_path, capsys):
    cfg = {"system": {"type": "counterexample", "alpha": 0.3}, "start": [1, 0.2, 0.9], "N": 4}
    code, out, _ = run_cli(tmp_path, capsys, cfg, "orbit")
    assert code == 0
    r = rows(out)
    assert r[0] == ["n", "group_index", "t1", "t2"]
    want = [(0, 0.5, 0.1), (1, 0.5, 0.1), (0, 0.8, 0.6), (1, 0.8, 0.6)]
    for row, (gi, a, b) in zip(r[1:], want):
        assert int(row[1]) == gi
        assert abs(float(row[2]) - a) < 1e-12 and abs(float(row[3]) - b) < 1e-12


def test_orbit_rotation_and_empty(tmp_path, capsys):
    cfg = {"system": {"type": "rotation", "alpha": 0.5}, "start": [0, 0.0], "N": 4}
    code, out, _ = run_cli(tmp_path, capsys, cfg, "orbit")
    assert code == 0 and [float(r[2]) for r in rows(out)[1:]] == [0.5, 0.0, 0.5, 0.0]
    code, out, _ = run_cli(tmp_path, capsys, {**cfg, "N": 0}, "orbit")
    assert code == 0 and out == "n,group_index,t1\n"


def test_orbit_budget_and_config_errors(tmp_path, capsys):
    cfg = {"system": {"type": "rotation", "alpha": 0.5}, "start": [0, 0.0], "N": 40}
    code, _, err = run_cli(tmp_path, capsys, cfg, "orbit", "--budget", "10")
    assert code == 2 and "budget" in err
    code, _, err = run_cli(tmp_path, capsys, {"system": {"type": "rotation"}}, "orbit")
    assert code == 2 and "system" in err
    assert main(["--config", str(tmp_path / "missing.json"), "orbit"]) == 2


def test_average_constant_and_witness(tmp_path, capsys):
    cfg = {"system": {"type": "skew", "d": 2, "alpha": "golden"}, "observable": {"constant": 1, "dim": 2},
           "start": [0, 0.1, 0.2], "checkpoints": [1, 10, 100]}
    code, out, _ = run_cli(tmp_path, capsys, cfg, "average")
    assert code == 0 and rows(out)[0] == ["N", "re", "im", "abs"]
    assert all(abs(float(r[3]) - 1) < 1e-14 for r in rows(out)[1:])
    cfg = {"system": {"type": "counterexample", "alpha": "sqrt2m1"}, "observable": {"character": [0, 1]},
           "start": [1, 0.3, 0.7], "phase": "witness", "checkpoints": [100, 10000]}
    code, out, _ = run_cli(tmp_path, capsys, cfg, "average")
    assert code == 0 and abs(float(rows(out)[-1][3]) - 0.5) < 0.01


def test_average_rotation_birkhoff_bound(tmp_path, capsys):
    cfg = {"system": {"type": "rotation", "alpha": "sqrt2m1"}, "observable": {"character": [1]},
           "start": [0, 0.0], "checkpoints": [10, 100, 1000, 10000]}
    code, out, _ = run_cli(tmp_path, capsys, cfg, "average")
    assert code == 0
    d = min(SQ, 1 - SQ)
    for r in rows(out)[1:]:
        assert float(r[3]) <= 1 / (2 * int(r[0]) * d) + 1e-12


def test_uniform_sup_cli(tmp_path, capsys):
    cfg = {"system": {"type": "rotation", "alpha": 0.1}, "observable": {"constant": 1, "dim": 1},
           "start": [0, 0.0], "k": 1, "checkpoints": [64, 128]}
    code, out, _ = run_cli(tmp_path, capsys, cfg, "uniform-sup")
    assert code == 0
    res = json.loads(out)
    assert [r["N"] for r in res] == [64, 128]
    assert all(abs(r["value"] - 1) < 1e-12 and r["mode"] == "heuristic" for r in res)
    code, _, err = run_cli(tmp_path, capsys, {**cfg, "k": None}, "uniform-sup")
    assert code == 2


def test_certification_budget_is_a_config_error(tmp_path, capsys):
    cfg = {"system": {"type": "skew", "d": 2, "alpha": 0.1}, "observable": {"character": [0, 1]},
           "start": [0, 0.2, 0.3], "k": 2, "N": 128, "search": {"certify": True, "budget": 1000}}
    code, _, err = run_cli(tmp_path, capsys, cfg, "uniform-sup")
    assert code == 2 and "uniform certified grid" in err


def test_vdc_and_two_scale_cli(tmp_path, capsys):
    code, out, _ = run_cli(tmp_path, capsys, {"N": 500, "params": {"H": [1, "N"]}}, "vdc")
    rep = json.loads(out)
    assert code == 0 and rep["pass"] and rep["source"] == "random" and rep["rng"]["algorithm"] == "PCG64"
    cfg = {"system": {"type": "skew", "d": 3, "alpha": "sqrt2m1"}, "observable": {"character": [0, 0, 1]},
           "start": [0, 0.3, 0.6, 0.9], "N": 200}
    code, out, _ = run_cli(tmp_path, capsys, {**cfg, "params": {"H": 7}}, "vdc")
    assert code == 0 and json.loads(out)["source"] == "orbit"
    code, out, _ = run_cli(tmp_path, capsys, {**cfg, "params": {"M": [4, 16], "alpha": 0.1}}, "two-scale")
    assert code == 0 and rows(out)[0] == ["M", "N", "value"] and len(rows(out)) == 3
    code, _, _ = run_cli(tmp_path, capsys, {"N": 5, "params": {"H": 9}}, "vdc")
    assert code == 2


def test_spectral_cli(tmp_path, capsys):
    cfg = {"system": {"type": "counterexample", "alpha": "sqrt2m1"}, "observable": {"character": [0, 1]},
           "k": 2, "params": {"family": "E2_counterexample", "window": 3}}
    code, out, _ = run_cli(tmp_path, capsys, cfg, "spectral")
    rep = json.loads(out)
    assert code == 0 and rep["level"]["member"] is False and rep["orthogonality"]["orthogonal"] is True
    code, _, _ = run_cli(tmp_path, capsys, {**cfg, "params": {"family": "nope"}}, "spectral")
    assert code == 2


def test_scenario_cli_writes_bundle(tmp_path, capsys):
    out_dir = tmp_path / "ql"
    code = main(["scenario", "quasi-level", "--out", str(out_dir)])
    capsys.readouterr()
    assert code == 0
    summary = json.loads((out_dir / "quasi-level_summary.json").read_text())
    assert summary["pass"] and summary["claim"] and summary["rng"] == {"algorithm": "PCG64", "seed": 0}
    assert (out_dir / "quasi-level.json").exists()


def test_scenario_failure_exit_code(tmp_path, capsys):
    cfg = {"scenario": "quasi-level", "observable": {"character": [0, 1]}, "k": 1}
    code, out, _ = run_cli(tmp_path, capsys, cfg, "scenario")
    assert code == 1 and json.loads(out)["pass"] is False


def test_quasi_level_constant_reports_zero():
    cfg = ExperimentConfig.from_dict({"observable": {"constant": 1, "dim": 2}, "k": 0})
    summary, _ = run_scenario("quasi-level", cfg)
    assert summary["metrics"]["level"] == 0 and summary["pass"]


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        run_scenario("nope")
    assert set(SCENARIOS) == {"counterexample", "uniform-decay", "ww-linear", "vdc-sweep", "two-scale",
                              "quasi-level", "t2-vs-t"}


@pytest.mark.parametrize("name", ["two-scale", "t2-vs-t", "ww-linear"])
def test_cheap_scenarios_pass(name):
    summary, art = run_scenario(name)
    assert summary["pass"], summary["metrics"]
    assert f"{name}_summary.json" in art and summary["claim"] == SCENARIOS[name][1]


def test_vdc_sweep_scenario_small():
    cfg = ExperimentConfig.from_dict({"params": {"trials": 5, "N": [50, 200]}})
    summary, art = run_scenario("vdc-sweep", cfg)
    assert summary["pass"] and summary["metrics"]["cases"] == 5 * 2 * 4
    assert art["vdc-sweep.csv"].splitlines()[0] == "trial,N,H,lhs,rhs,slack"


def test_counterexample_scenario_without_sup():
    cfg = ExperimentConfig.from_dict({"params": {"sup_check": False}})
    summary, art = run_scenario("counterexample", cfg)
    assert summary["pass"]


def test_seed_override_changes_random_output(tmp_path, capsys):
    code, a, _ = run_cli(tmp_path, capsys, {"N": 100}, "vdc")
    code, b, _ = run_cli(tmp_path, capsys, {"N": 100}, "vdc", "--seed", "3")
    assert a != b and json.loads(b)["rng"]["seed"] == 3
    assert main(["--threads", "0", "vdc"]) == 2
