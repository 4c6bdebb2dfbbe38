import json
import subprocess
import sys

import pytest

from btl_uq.cli import main


def write_csv(path, rows, header="i,j,wins,count"):
    path.write_text(header + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return path


def test_fit_two_items_balanced(tmp_path, capsys):
    data = write_csv(tmp_path / "two.csv", [(0, 1, 1, 2)])
    assert main(["fit", str(data), "--estimator", "mle"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["theta_hat"] == [0.0, 0.0]
    assert report["converged"] is True


def test_fit_spectral_to_file(tmp_path):
    data = write_csv(tmp_path / "tri.csv", [(0, 1, 3, 4), (0, 2, 2, 4), (1, 2, 1, 4)])
    out = tmp_path / "rep.json"
    assert main(["fit", str(data), "--estimator", "spectral", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["estimator"] == "spectral"
    assert abs(sum(report["theta_hat"])) < 1e-12


def test_fit_disconnected_exits_3(tmp_path, capsys):
    data = write_csv(tmp_path / "split.csv", [(0, 1, 1, 2), (2, 3, 1, 2)])
    assert main(["fit", str(data)]) == 3
    assert "disconnected" in capsys.readouterr().err


def test_fit_nonexistent_mle_exits_3_with_report(tmp_path, capsys):
    data = write_csv(tmp_path / "sweep.csv", [(0, 1, 1, 1)])
    assert main(["fit", str(data)]) == 3
    captured = capsys.readouterr()
    assert json.loads(captured.out)["converged"] is False
    assert "estimator failure" in captured.err


def test_malformed_dataset_exits_2(tmp_path):
    data = write_csv(tmp_path / "bad.csv", [(1, 0, 1, 2)])
    assert main(["fit", str(data)]) == 2
    assert main(["fit", str(tmp_path / "missing.csv")]) == 2


def test_usage_errors_exit_2(capsys):
    assert main(["fit", "--estimator", "elo", "x.csv"]) == 2
    assert main(["transmogrify"]) == 2
    assert main(["experiment"]) == 2
    assert "usage" in capsys.readouterr().err


def test_validate(tmp_path, capsys):
    ok = write_csv(tmp_path / "ok.csv", [(0, 1, 1, 2), (1, 2, 1, 2)])
    assert main(["validate", str(ok)]) == 0
    assert json.loads(capsys.readouterr().out)["connected"] is True
    split = write_csv(tmp_path / "split.csv", [(0, 1, 1, 2), (2, 3, 1, 2)])
    assert main(["validate", str(split)]) == 3


def test_simulate_then_fit(tmp_path):
    csv_path = tmp_path / "sim.csv"
    truth = tmp_path / "truth.json"
    assert main(["simulate", "--n", "40", "--p", "0.5", "--L", "5", "--seed", "3",
                 "--out", str(csv_path), "--truth-out", str(truth)]) == 0
    sidecar = json.loads((tmp_path / "sim.csv.json").read_text())
    assert sidecar["n"] == 40 and sidecar["p"] == 0.5
    assert len(json.loads(truth.read_text())["theta_star"]) == 40
    first = csv_path.read_bytes()
    assert main(["simulate", "--n", "40", "--p", "0.5", "--L", "5", "--seed", "3",
                 "--out", str(csv_path)]) == 0
    assert csv_path.read_bytes() == first
    assert main(["fit", str(csv_path), "--out", str(tmp_path / "fit.json")]) == 0


def test_simulate_bad_p_exits_2(tmp_path):
    assert main(["simulate", "--n", "10", "--p", "cubic", "--out", str(tmp_path / "x.csv")]) == 2


def experiment_config(tmp_path, **kw):
    cfg = {"kind": "qq", "grid": {"n": [30], "p": [0.5], "L": [5]}, "reps": 4, "seed": 1}
    cfg.update(kw)
    path = tmp_path / "qq.json"
    path.write_text(json.dumps(cfg))
    return path


def test_experiment_rerun_identical_bytes(tmp_path):
    cfg = experiment_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--config", str(cfg), "--output-dir", str(a)]) == 0
    assert main(["experiment", "--config", str(cfg), "--output-dir", str(b)]) == 0
    for name in ("qq.csv", "qq_summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    manifest = json.loads((a / "qq_manifest.json").read_text())
    assert manifest["config"]["reps"] == 4


def test_experiment_seed_override(tmp_path):
    cfg = experiment_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--config", str(cfg), "--output-dir", str(a)]) == 0
    assert main(["experiment", "--config", str(cfg), "--output-dir", str(b), "--seed", "2"]) == 0
    assert (a / "qq.csv").read_bytes() != (b / "qq.csv").read_bytes()
    assert json.loads((b / "qq_manifest.json").read_text())["config"]["seed"] == 2


def test_experiment_config_errors_exit_2(tmp_path):
    assert main(["experiment", "--config", str(tmp_path / "none.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "qq", "reps": 0}')
    assert main(["experiment", "--config", str(bad)]) == 2
    bad.write_text("[1, 2]")
    assert main(["experiment", "--config", str(bad)]) == 2


def test_module_entry_point(tmp_path):
    data = write_csv(tmp_path / "two.csv", [(0, 1, 1, 2)])
    proc = subprocess.run([sys.executable, "-m", "btl_uq", "fit", str(data)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["theta_hat"] == [0.0, 0.0]


@pytest.mark.parametrize("name", ["qq", "risk", "coverage", "expansion"])
def test_shipped_configs_parse(name):
    from pathlib import Path

    from btl_uq.harness import ExperimentConfig
    cfg = ExperimentConfig.from_json(Path(__file__).parent.parent / "configs" / f"{name}.json")
    assert cfg.kind == name
