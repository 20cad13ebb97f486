import json
import subprocess
import sys

import pytest

from fedtrans.cli import main
from fedtrans.experiment import ExperimentConfig, load_config, run_experiment

TINY = {
    "scenario": {"M": 2, "n_target": [40, 40], "n_source": [80, 80], "p": 10, "s": 3, "h": 2,
                 "target_cov": {"blocks": 2, "block_size": 5, "rho": 0.3},
                 "source_cov": {"blocks": 1, "block_size": 10, "rho": 0.5}, "test_size": 200},
    "tuning": "theory_formula",
    "record_wall_time": False,
}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_single_method_single_row(tmp_path):
    cfg = write(tmp_path, dict(TINY, methods=["target_only"], replications=1))
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "out")]) == 0
    lines = (tmp_path / "out" / "reports.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("target_only,")
    for name in ("summary.json", "manifest.json", "config.resolved.json"):
        assert (tmp_path / "out" / name).exists()


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, dict(TINY, replications=2))
    main(["run", str(cfg), "--output-dir", str(tmp_path / "a")])
    main(["run", str(cfg), "--output-dir", str(tmp_path / "b")])
    for name in ("reports.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    # manifests differ only in the recorded output directory
    ma, mb = (json.loads((tmp_path / d / "manifest.json").read_text()) for d in "ab")
    for name in ("reports.csv", "summary.json"):
        assert ma["files"][name] == mb["files"][name]
    ma["config"].pop("output_dir"), mb["config"].pop("output_dir")
    assert ma["config"] == mb["config"]
    rows = (tmp_path / "a" / "reports.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 6
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert set(summary["summary"]) == {"target_only", "source_only", "combined",
                                       "proposed_T1", "proposed_T3", "pooled"}


def test_flags_override_document(tmp_path):
    cfg = write(tmp_path, dict(TINY, methods=["pooled"], seeds=[1, 2, 3], replications=3))
    main(["run", str(cfg), "--output-dir", str(tmp_path / "o"), "--replications", "1", "--seed", "9"])
    rows = (tmp_path / "o" / "reports.csv").read_text().splitlines()
    assert len(rows) == 2
    expected = ExperimentConfig(root_seed=9, replications=1).seed_list()[0]
    assert rows[1].split(",")[1] == str(expected)


def test_describe_prints_derived_quantities(tmp_path, capsys):
    cfg = write(tmp_path, {})
    assert main(["describe", str(cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["T"] == 3 and out["scenario"]["p"] == 200
    d = out["derived"]
    assert d["design_dimension"] == 201 and d["validation_rows_at_leading_site"] == 20
    assert d["N_target_train"] == 280 and d["lambda_beta"].startswith("c0*sqrt(log p/N)")


@pytest.mark.parametrize("doc,needle", [
    ({"scenario": {"target_cov": {"blocks": 7, "block_size": 5, "rho": 0.3}}}, "target_cov.block_size"),
    ({"T": 0}, "T must be"),
    ({"methods": ["magic"]}, "methods"),
    ({"colour": 1}, "unknown config keys: colour"),
    ({"scenario": {"pp": 3}}, "unknown scenario keys: pp"),
])
def test_invalid_configs_exit_nonzero_naming_field(tmp_path, capsys, doc, needle):
    cfg = write(tmp_path, doc)
    assert main(["describe", str(cfg)]) != 0
    assert needle in capsys.readouterr().err


def test_console_script_module_entry(tmp_path):
    cfg = write(tmp_path, {"T": 0})
    res = subprocess.run([sys.executable, "-m", "fedtrans.cli", "describe", str(cfg)],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "T must be" in res.stderr


def test_method_failure_recorded_per_row(tmp_path):
    scn = dict(TINY["scenario"], n_source=[80, 0])  # leading site 2 holds no source rows
    cfg = ExperimentConfig(scenario=scn, tuning="theory_formula", methods=["target_only", "proposed_T1"],
                           leading_site=2, record_wall_time=False)
    res = run_experiment(cfg, tmp_path / "f")
    ok, bad = res["reports"]
    assert not ok.error
    assert "ConfigurationError" in bad.error and "multi-site" in bad.error
    row = (tmp_path / "f" / "reports.csv").read_text().splitlines()[2]
    assert row.startswith("proposed_T1,") and "ConfigurationError" in row


def test_load_config_round_trip(tmp_path):
    cfg = write(tmp_path, dict(TINY, c0=0.4))
    loaded = load_config(cfg)
    assert loaded.c0 == 0.4 and loaded.scenario.p == 10
