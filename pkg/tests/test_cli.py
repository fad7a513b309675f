import csv
import json

import numpy as np
import pytest

from redkin import cli
from redkin.expoly import DivergenceError
from redkin.io import matrix_from_json


def _write(tmp_path, config, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


DEPHASING = {"task": "generator", "system": {"model": "pure_dephasing"}, "lambdas": [0.1],
             "orders": [1, 2, 3, 4], "path": "engine"}


def test_generator_writes_even_orders_only(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", _write(tmp_path, DEPHASING), "--out", str(out)]) == 0
    assert (out / "g2.json").exists() and (out / "g4.json").exists()
    assert not (out / "g1.json").exists() and not (out / "g3.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"g2.json", "g4.json"}
    assert manifest["versions"]["kernels"] in ("compiled", "python")
    g2 = json.loads((out / "g2.json").read_text())
    assert g2["order"] == 2 and g2["vectorization"] == "column-stacking"
    G = matrix_from_json(g2["superoperator"], "g2")
    # C = exp(-t): coherences decay at 4 Re Gamma(0) = 4
    assert G[2, 2] == pytest.approx(-4.0)


def test_reruns_are_byte_identical(tmp_path):
    cfg = {"task": "propagate", "system": {"model": "damped_qubit"}, "lambdas": [0.1, 0.2],
           "orders": [2, 4], "params": {"times": {"t_max": 5.0, "n": 11}}}
    path = _write(tmp_path, cfg)
    for name in ("a", "b"):
        assert cli.main(["run", "--config", path, "--out", str(tmp_path / name)]) == 0
    for f in ("trajectory_lam00.csv", "trajectory_lam01.csv", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_parallel_jobs_match_serial(tmp_path):
    cfg = {"task": "steady-state", "system": {"model": "spin_boson"}, "lambdas": [0.1, 0.3]}
    path = _write(tmp_path, cfg)
    assert cli.main(["run", "--config", path, "--out", str(tmp_path / "s")]) == 0
    assert cli.main(["run", "--config", path, "--out", str(tmp_path / "p"), "--jobs", "2"]) == 0
    for f in ("steady_lam00.json", "steady_lam01.json"):
        assert (tmp_path / "s" / f).read_bytes() == (tmp_path / "p" / f).read_bytes()


def test_empty_lambdas_is_diagnosed(tmp_path, capsys):
    cfg = {**DEPHASING, "lambdas": []}
    assert cli.main(["validate", "--config", _write(tmp_path, cfg)]) == 1
    assert "lambdas: must be a non-empty list" in capsys.readouterr().out
    assert cli.main(["run", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_validate_reports_fields():
    assert cli.validate({**DEPHASING}) == []
    diags = cli.validate({"task": "nope", "lambdas": [0.1], "system": {"model": "pure_dephasing"}})
    assert diags and diags[0].startswith("task:")
    diags = cli.validate({**DEPHASING, "orders": [6]})
    assert diags == []
    diags = cli.validate({**DEPHASING, "path": "fast", "orders": [3]})
    assert any(d.startswith("orders:") for d in diags)
    bad_h = {"task": "generator", "lambdas": [0.1],
             "system": {"H": [[0, 1], [0, 0]], "couplings": {"x": [[0, 1], [1, 0]]}},
             "bath": {"labels": ["x"], "entries": {"x,x": [{"a": [1, 0], "z": [1, 0]}]}}}
    assert any("H_S" in d for d in cli.validate(bad_h))
    slow = {**bad_h, "system": {"H": [[1, 0], [0, -1]], "couplings": {"x": [[0, 1], [1, 0]]}},
            "bath": {"labels": ["x"], "entries": {"x,x": [{"a": [1, 0], "z": [-1, 0]}]}}}
    diags = cli.validate(slow)
    assert any(d.startswith("bath.entries.x,x[0]") for d in diags)


def test_unreadable_config(tmp_path):
    assert cli.main(["validate", "--config", str(tmp_path / "missing.json")]) == 1


def test_divergence_exit_code(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise DivergenceError("pole survives")

    monkeypatch.setattr(cli, "_generator_parts", boom)
    assert cli.main(["run", "--config", _write(tmp_path, DEPHASING), "--out", str(tmp_path / "o")]) == 2


def test_oracle_compare_rates(tmp_path):
    cfg = {"task": "oracle-compare", "system": {"model": "damped_qubit"}, "lambdas": [0.05, 0.1],
           "orders": [2, 4]}
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "rates.csv").open()))
    assert [float(r["lambda"]) for r in rows] == [0.05, 0.1]
    for r in rows:
        lam = float(r["lambda"])
        exact, r2, r4 = float(r["rate_exact"]), float(r["rate_order2"]), float(r["rate_order4"])
        assert r2 == pytest.approx(lam ** 2, rel=1e-9)
        assert abs(exact - r4) < abs(exact - r2)
    assert float(rows[1]["rate_exact"]) == pytest.approx(0.010050506338833467, rel=1e-12)


def test_custom_system_and_named_operators(tmp_path):
    cfg = {"task": "qrt", "lambdas": [0.1], "system": {"model": "damped_qubit"},
           "params": {"pairs": [[0.0, 0.0], [1.0, 2.0]], "modes": 100, "half_window": 20.0,
                      "A1": "sigma_minus", "A2": "sigma_plus"}}
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    lines = (out / "qrt_lam00.csv").read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["n_pairs"] == 2 and header["max_abs"] >= 0
    # at t1 = t2 = 0 the two-time value is <sigma_plus sigma_minus> = excited population = 1
    first = lines[2].split(",")
    assert float(first[2]) == pytest.approx(1.0) and float(first[4]) == pytest.approx(1.0)


def test_custom_system_builds(tmp_path):
    cfg = {"task": "propagate", "lambdas": [0.2],
           "system": {"H": [[0.5, 0], [0, -0.5]], "couplings": {"z": [[1, 0], [0, -1]]}},
           "bath": {"labels": ["z"], "entries": {"z,z": [{"a": [1, 0], "z": [1, 0]}]}},
           "params": {"rho0": [[0.5, 0.5], [0.5, 0.5]], "times": [0.0, 1.0]}}
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = list(csv.reader(line for line in (out / "trajectory_lam00.csv").open() if not line.startswith("#")))
    cols = rows[0]
    last = dict(zip(cols, map(float, rows[2])))
    coh = complex(last["re_01"], last["im_01"])
    assert coh == pytest.approx(0.5 * np.exp(-1j - 4 * 0.04), abs=1e-12)
