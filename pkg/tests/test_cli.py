import json
import subprocess
import sys

import pytest

from sobolevlab.cli import load_config, main

PROFILE_CFG = {"suite": "t", "operations": [{"op": "build_profile", "params": {"count": 3, "id": "p3"}}]}
CURVE_CFG = {"suite": "t", "seed": 4, "operations": [
    {"op": "density", "params": {"cases": [[2, 2.0]], "R_sweep": [6, 7, 8, 9]}}]}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(path)


def report(out):
    return json.loads((out / "report.json").read_text())


def test_empty_suite(tmp_path):
    assert main(["run", "empty", "--out", str(tmp_path)]) == 0
    doc = report(tmp_path)
    assert doc["summary"]["checks"] == 0 and doc["summary"]["all_passed"]
    assert len(doc["config_hash"]) == 64 and "numpy" in doc["environment"]


@pytest.mark.parametrize("bad", ["{not json", json.dumps([1, 2]), json.dumps({"operations": "x"}),
                                 json.dumps({"operations": [{"op": "nope"}]}),
                                 json.dumps({"operations": [], "extra": 1}),
                                 json.dumps({"operations": [{"op": "cone", "params": {"zzz": 1}}]}),
                                 json.dumps({"operations": [{"op": "noop"}, {"op": "noop"}]})])
def test_corrupted_config_is_usage_error(tmp_path, bad):
    assert main(["run", "--config", write(tmp_path, bad), "--out", str(tmp_path / "o")]) == 2


def test_bad_flags_are_usage_errors(tmp_path):
    assert main(["run", "empty", "--jobs", "0", "--out", str(tmp_path)]) == 2
    assert main(["frobnicate"]) == 2


def test_unknown_suite_and_object(tmp_path):
    assert main(["run", "no-such-suite", "--out", str(tmp_path)]) == 3
    assert main(["describe", "ghost", "--out", str(tmp_path)]) == 3
    assert main(["export", "ghost", "--format", "csv", "--out", str(tmp_path)]) == 3


def test_suite_alias_and_listing(capsys):
    assert load_config("lemma21-flat") == load_config("regularity-flat")
    assert main(["list-suites"]) == 0
    listed = capsys.readouterr().out
    for name in ("regularity-flat", "acceptance", "cone", "doubling", "spikes"):
        assert name in listed


def test_describe_and_export_profile(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--config", write(tmp_path, PROFILE_CFG), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["describe", "p3", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "bumps: 3" in text and "total eta" in text
    assert main(["export", "p3", "--format", "obj", "--out", str(out)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["mesh"]["valid"] and (out / "exports" / "p3.obj").is_file()
    assert main(["export", "p3", "--format", "json", "--dest", str(tmp_path / "p.json"), "--out", str(out)]) == 0
    assert len(json.loads((tmp_path / "p.json").read_text())["bumps"]) == 3


def test_export_curve_csv_one_row_per_sweep_value(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--config", write(tmp_path, CURVE_CFG), "--out", str(out)]) == 0
    dest = tmp_path / "c.csv"
    assert main(["export", "density.k2_p2_total", "--format", "csv", "--dest", str(dest), "--out", str(out)]) == 0
    lines = dest.read_text().strip().splitlines()
    assert lines[0].startswith("parameter") and len(lines) == 1 + 4
    assert (out / "figures" / "density_curves.png").is_file()
    assert (out / "figures" / "density_checks.png").is_file()
    assert main(["export", "density", "--format", "obj", "--out", str(out)]) == 2


def test_determinism_and_jobs(tmp_path):
    cfg = dict(CURVE_CFG, operations=CURVE_CFG["operations"] + [{"op": "cutoff", "params": {"k": 2}}])
    path = write(tmp_path, cfg)
    runs = []
    for i, jobs in enumerate((1, 1, 2)):
        out = tmp_path / f"o{i}"
        main(["run", "--config", path, "--out", str(out), "--jobs", str(jobs)])
        runs.append((report(out), (out / "density.csv").read_bytes()))
    assert runs[0][0]["results_hash"] == runs[1][0]["results_hash"] == runs[2][0]["results_hash"]
    assert runs[0][0]["config_hash"] == runs[1][0]["config_hash"]
    assert runs[0][1] == runs[1][1] == runs[2][1]


def test_seed_override_changes_config_hash(tmp_path):
    path = write(tmp_path, {"suite": "s", "seed": 1, "operations": []})
    main(["run", "--config", path, "--out", str(tmp_path / "a")])
    main(["run", "--config", path, "--out", str(tmp_path / "b"), "--seed", "2"])
    a, b = report(tmp_path / "a"), report(tmp_path / "b")
    assert a["config"]["seed"] == 1 and b["config"]["seed"] == 2
    assert a["config_hash"] != b["config_hash"]


def test_tolerance_scale(tmp_path):
    cfg = {"suite": "s", "operations": [{"op": "cutoff", "params": {"k": 2}}]}
    path = write(tmp_path, cfg)
    assert main(["run", "--config", path, "--out", str(tmp_path / "a")]) == 1
    assert main(["run", "--config", path, "--out", str(tmp_path / "b"), "--tolerance-scale", "6"]) == 0


def test_module_error_recorded_and_suite_continues(tmp_path):
    cfg = {"suite": "s", "operations": [{"op": "cone", "params": {"thetas": [3.0]}}, {"op": "noop"},
                                        {"op": "volume_oracle", "params": {"radii": [0.5]}}]}
    assert main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    doc = report(tmp_path / "o")
    assert "cone" in doc["summary"]["errors"]
    assert [op["name"] for op in doc["operations"]] == ["cone", "noop", "volume_oracle"]
    assert len(doc["operations"][2]["checks"]) == 3


def test_env_var_sets_output(tmp_path, monkeypatch):
    monkeypatch.setenv("SOBOLEVLAB_OUT", str(tmp_path / "env"))
    assert main(["run", "empty"]) == 0
    assert (tmp_path / "env" / "report.json").is_file()


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sobolevlab.cli", "run", "empty", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "0/0" in proc.stdout
