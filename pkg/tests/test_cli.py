import csv
import json

import pytest

from roughevo.cli import main
from roughevo.experiments import ExperimentConfig
from roughevo.paths import ConfigError

SMALL = {"spectral": {"N": 3}, "path": {"level": 4}}


def _write(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_solve_is_byte_identical_across_runs(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "3"]) == 0
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "3"]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a == b
    assert {"summary.csv", "manifest.json", "solution.csv", "area.csv", "history.csv"} <= set(a)
    rows = list(csv.reader((tmp_path / "a" / "summary.csv").open()))
    assert rows[0] == ["criterion", "value", "threshold", "pass"]
    assert all(r[3] == "true" for r in rows[1:])
    manifest = json.loads(a["manifest.json"])
    assert manifest["seed"] == 3 and manifest["config"]["spectral"]["N"] == 3
    assert "version" in manifest


def test_seed_and_level_overrides_change_output(tmp_path):
    cfg = _write(tmp_path, SMALL)
    main(["solve", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["solve", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "1"])
    main(["solve", "--config", cfg, "--out", str(tmp_path / "c"), "--level", "5"])
    sol = [(tmp_path / d / "solution.csv").read_text() for d in "abc"]
    assert sol[0] != sol[1]
    assert len(sol[2].splitlines()) == 2**5 + 2


def test_failing_criterion_gives_nonzero_exit(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "solver": {"pair_tol": 1e-300}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    rows = list(csv.reader((tmp_path / "o" / "summary.csv").open()))
    assert any(r[3] == "false" for r in rows[1:])


def test_config_errors(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    bad = _write(tmp_path, {"exponents": {"beta": 0.2}})
    assert main(["solve", "--config", bad, "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"unknown": 1})
    with pytest.raises(SystemExit):
        main(["bogus", "--config", bad, "--out", str(tmp_path)])


def test_validate_smooth_and_invariants_run(tmp_path):
    cfg = _write(tmp_path, {"spectral": {"N": 2}, "path": {"level": 4}, "smooth_level": 6})
    assert main(["validate-smooth", "--config", cfg, "--out", str(tmp_path / "v")]) == 0
    assert (tmp_path / "v" / "smooth_solution.csv").exists()
    zero = _write(tmp_path, {"spectral": {"N": 2}, "path": {"level": 4}, "G": {"zero": True}})
    assert main(["invariants", "--config", zero, "--out", str(tmp_path / "i")]) == 0
