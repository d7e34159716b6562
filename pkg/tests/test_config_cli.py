import csv
import json

import numpy as np
import pytest
from scipy.integrate import trapezoid

from laprmt import cli
from laprmt.config import PRESETS, RunConfig, validate_config
from laprmt.errors import ConfigError


def _errors(text, overrides=None):
    with pytest.raises(ConfigError) as exc:
        validate_config(text, overrides)
    return exc.value.violations


def test_missing_seed():
    errs = _errors("experiment = density\n")
    assert any("seed" in e for e in errs)


def test_q_exp_range():
    errs = _errors("experiment = gaps\nseed = 1\nq_exp = 0.6\n")
    assert errs == ["line 3: q_exp must lie in (0, 1/2]: the model requires N^beta <= q <= N^(1/2)"]


def test_errors_are_aggregated():
    errs = _errors("experiment = gaps\nseed = -1\ncolour = 3\nn = 1\nn = 5\nbogus line\n")
    assert errs == ["line 6: expected 'key = value'"]
    errs = _errors("experiment = gaps\nseed = -1\ncolour = 3\nn = 1\nn = 5\n")
    assert [e.split(":")[0] for e in errs] == ["line 2", "line 3", "line 4", "line 5"]


def test_minimal_config_echo_round_trip():
    cfg = validate_config("# minimal\nexperiment = identities\nseed = 7\n")
    assert cfg.n == PRESETS["identities"]["n"] and cfg.trials == 50
    again = validate_config(cfg.echo())
    assert again == cfg
    assert "threads" not in cfg.echo()


def test_json_config_and_line_numbers():
    cfg = validate_config('{\n  "experiment": "rigidity",\n  "seed": 3,\n  "kappa": 0.2\n}')
    assert cfg.kappa == 0.2 and cfg.trials == 20
    errs = _errors('{\n  "experiment": "rigidity",\n  "seed": 3,\n  "kappa": 0.7\n}')
    assert errs[0].startswith("line 4:")
    assert _errors('{"experiment": ')[0].startswith("line 1: invalid JSON")


def test_overrides_win():
    cfg = validate_config("experiment = gaps\nseed = 1\nn = 300\n", {"n": 400, "trials": None})
    assert cfg.n == 400 and cfg.trials == 200


def test_digest_ignores_threads_and_output():
    a = RunConfig("gaps", 1, threads=1, output_dir="x")
    b = RunConfig("gaps", 1, threads=8, output_dir="y")
    assert a.digest() == b.digest()
    assert a.digest() != RunConfig("gaps", 2).digest()


def test_cli_check_config(capsys):
    assert cli.main(["density", "--seed", "1", "--check-config"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "experiment = \"density\"" in out and "seed = 1" in out


def test_cli_config_errors(tmp_path, capsys):
    assert cli.main(["gaps", "--check-config"]) == cli.EXIT_CONFIG
    assert "seed" in capsys.readouterr().err
    p = tmp_path / "bad.cfg"
    p.write_text("seed = 1\nq_exp = 0.6\n")
    assert cli.main(["gaps", "--config", str(p)]) == cli.EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    assert cli.main(["gaps", "--config", str(tmp_path / "none.cfg")]) == cli.EXIT_CONFIG


def test_cli_thread_env(monkeypatch, capsys):
    monkeypatch.setenv("LAPRMT_THREADS", "0")
    assert cli.main(["identities", "--seed", "1", "--check-config"]) == cli.EXIT_CONFIG
    monkeypatch.setenv("LAPRMT_THREADS", "2")
    assert cli.main(["identities", "--seed", "1", "--check-config"]) == cli.EXIT_OK


def test_cli_identities(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["identities", "--seed", "3", "--n", "200", "--trials", "50", "--out", str(out)])
    assert code == cli.EXIT_OK
    summary = json.loads((out / "identities_summary.json").read_text())
    assert summary["passed"] and summary["seed"] == 3
    assert summary["config_hash"] == RunConfig(**summary["config"]).digest()
    for c in summary["report"]["checks"]:
        assert c["value"] < 1e-9
    rows = list(csv.reader(open(out / "identities_detail.csv")))
    assert len(rows) == 51


def test_cli_density_csv(tmp_path):
    out = tmp_path / "d"
    assert cli.main(["density", "--seed", "0", "--out", str(out)]) == cli.EXIT_OK
    data = np.loadtxt(out / "density_detail.csv", delimiter=",", skiprows=1)
    assert abs(trapezoid(data[:, 1], data[:, 0]) - 1.0) < 1e-6


def test_cli_determinism_small(tmp_path):
    texts = []
    for threads in ("1", "4"):
        out = tmp_path / threads
        cli.main(["rigidity", "--seed", "5", "--n", "150", "--trials", "6", "--threads", threads, "--out", str(out)])
        texts.append((out / "rigidity_summary.json").read_bytes())
    assert texts[0] == texts[1]


def test_runtime_failure_exit(monkeypatch, tmp_path, capsys):
    from laprmt import experiments

    def boom(cfg):
        raise RuntimeError("injected")

    monkeypatch.setitem(experiments.RUNNERS, "graphsum", boom)
    assert cli.main(["graphsum", "--seed", "1", "--out", str(tmp_path)]) == cli.EXIT_FAIL
    assert "injected" in capsys.readouterr().err
