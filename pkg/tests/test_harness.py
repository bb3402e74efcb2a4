import csv
import json
import math
import subprocess
import sys

import pytest

from radialpme.harness.cli import main
from radialpme.harness.config import ConfigError, parse_config
from radialpme.harness.experiment import OUT_DIR_ENV, parse_values, run_experiment, run_sweep

MINIMAL = """
[problem]
m = 2.0
p = 3.0
R = 5.0
"""

SMALL = """
[problem]
m = 2.0
p = 3.0
R = 5.0

[problem.datum]
profile = "bump"
norm_q = 1.5
norm_value = 0.5

[solver]
cells = 200
t_end = 1.0
sample_count = 5

[diagnostics]
q_list = [1.5, 2.0]
r = 2.0
checks = ["lq_monotone", "smoothing", "aronson_benilan"]
ab_times = [0.5, 1.0]
fit_window = [0.2, 1.0]
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.manifold.kind == "euclidean" and cfg.manifold.dimension == 3
    assert math.isinf(cfg.problem.k) and cfg.problem.datum.profile == "bump"
    assert cfg.solver.cells == 1000 and cfg.output.formats == ("csv",)


def _errors(text):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    return exc.value.errors


def test_p_equal_m_rejected():
    assert any("p > m" in e for e in _errors(MINIMAL.replace("p = 3.0", "p = 2.0")))


def test_sup_bound_inapplicable_on_euclidean():
    errs = _errors(MINIMAL + '\n[diagnostics]\nr = 2.0\nchecks = ["sup_bound"]\n')
    assert any("inapplicable" in e for e in errs)


def test_all_violations_collected():
    text = MINIMAL.replace("p = 3.0", "p = 2.0") + '\nbogus = 1\n[solver]\ncells = 1\n[diagnostics]\nr = 1.0\nchecks = ["smoothing"]\n'
    errs = _errors(text)
    assert len(errs) >= 4
    assert any("unknown key problem.bogus" in e for e in errs)
    assert any("r > N/2" in e for e in errs)
    assert any("p > m + 2/N" in e for e in errs)


def test_unknown_table_and_malformed():
    assert any("unknown top-level" in e for e in _errors(MINIMAL + "\n[plots]\nx = 1\n"))
    assert any("malformed" in e for e in _errors("[problem\n"))


def test_poincare_allows_monotonicity_below_fujita():
    text = '[manifold]\nkind = "hyperbolic"\n' + MINIMAL.replace("p = 3.0", "p = 2.5") + \
        '\n[diagnostics]\nr = 2.0\nchecks = ["sup_bound", "lq_monotone"]\n'
    assert parse_config(text).manifold.has_poincare


def test_parse_values():
    assert parse_values("1, 2,inf") == [1.0, 2.0, math.inf]


def test_run_experiment_artifacts(tmp_path):
    res = run_experiment(parse_config(SMALL), out_dir=tmp_path, formats=("csv", "json"), seed=3, echo=None)
    assert res.passed, {k: r.summary() for k, r in res.reports.items()}
    rows = list(csv.reader(open(tmp_path / "timeseries.csv")))
    assert rows[0] == ["t", "dt", "sup_norm", "lq_1.5", "lq_2", "status"]
    assert rows[-1][-1] == "completed" and rows[1][-1] == "running"
    assert float(rows[1][2]) == res.record.sup_norm[0]  # 17 digits round-trip
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 3 and len(man["config_hash"]) == 64 and man["config"]["problem"]["m"] == 2.0
    assert {"timeseries", "timeseries_json", "report_lq_monotone", "profiles"} <= set(man["artifacts"])
    rep = json.loads((tmp_path / "report_aronson_benilan.json").read_text())
    assert rep["passed"] and rep["samples"] == 2


def test_identical_config_gives_identical_csv(tmp_path):
    cfg = parse_config(SMALL)
    run_experiment(cfg, out_dir=tmp_path / "a", echo=None)
    run_experiment(cfg, out_dir=tmp_path / "b", echo=None)
    assert (tmp_path / "a/timeseries.csv").read_bytes() == (tmp_path / "b/timeseries.csv").read_bytes()


def test_dry_run_writes_nothing(tmp_path, capsys):
    res = run_experiment(parse_config(SMALL), out_dir=tmp_path / "x", dry_run=True)
    assert res.record is None and not (tmp_path / "x").exists()
    assert '"decay_rate"' in capsys.readouterr().out


def test_blow_up_truncates_csv(tmp_path):
    text = MINIMAL.replace("p = 3.0", "p = 2.2") + \
        '\n[problem.datum]\namplitude = 5.0\nwidth = 3.0\n[solver]\ncells = 200\nt_end = 10.0\nsample_count = 10\n'
    res = run_experiment(parse_config(text), out_dir=tmp_path, echo=None)
    rows = list(csv.reader(open(tmp_path / "timeseries.csv")))
    assert res.record.blew_up and rows[-1][-1] == "blow_up" and float(rows[-1][0]) < 10.0


SWEEP = MINIMAL + '\n[problem.datum]\namplitude = 2.0\n[solver]\ncells = 250\ndt0 = 1e-3\nt_end = 0.2\nsamples = [0.1, 0.2]\n'


def test_k_sweep(tmp_path):
    rep = run_sweep(parse_config(SWEEP), "k", [1.0, 4.0, math.inf], out_dir=tmp_path)
    assert rep.passed and len(rep.comparisons) == 2
    assert rep.differences[0] >= rep.differences[1]
    assert (tmp_path / "sweep_k.json").exists() and (tmp_path / "sweep_k_inf.csv").exists()


def test_amplitude_and_cells_sweeps():
    cfg = parse_config(SWEEP)
    assert run_sweep(cfg, "amplitude", [0.5, 1.0, 1.5]).passed
    rep = run_sweep(cfg, "cells", [100, 200, 400])
    assert rep.passed and not rep.comparisons and len(rep.differences) == 2


def test_sweep_edge_cases():
    cfg = parse_config(SWEEP)
    single = run_sweep(cfg, "k", [2.0])
    assert single.passed and single.differences == []
    with pytest.raises(ValueError):
        run_sweep(cfg, "k", [2.0, 1.0])
    with pytest.raises(ValueError):
        run_sweep(cfg, "m", [2.0, 3.0])


def test_cli_constants(capsys):
    assert main(["constants", "--kind", "hyperbolic", "--p", "2.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["C_p"] == 1.0 and out["eps1"] > 0


def test_cli_run_uses_env_out_dir(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL)
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env_out"))
    assert main(["run", "--config", str(cfg), "--format", "json"]) == 0
    assert (tmp_path / "env_out/timeseries.json").exists()
    assert not (tmp_path / "env_out/timeseries.csv").exists()


def test_cli_rejects_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL.replace("p = 3.0", "p = 1.0"))
    assert main(["run", "--config", str(cfg), "--dry-run"]) == 2
    assert "p > m" in capsys.readouterr().err


def test_cli_sweep(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SWEEP)
    assert main(["sweep", "--config", str(cfg), "--param", "k", "--values", "1,inf", "--out-dir", str(tmp_path)]) == 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "radialpme", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify" in out.stdout
