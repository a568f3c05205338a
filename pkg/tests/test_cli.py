import json
from pathlib import Path

import pytest

from qflsim.cli import main

REPO = Path(__file__).resolve().parents[1]
SMOKE_MDQFL = str(REPO / "configs" / "smoke_mdqfl.json")
SMOKE_QFL = str(REPO / "configs" / "smoke_qfl.json")


def write_config(tmp_path, name="cfg.json", **overrides):
    raw = json.loads(Path(SMOKE_MDQFL).read_text())
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key] = {**raw[key], **value}
        else:
            raw[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


def test_run_writes_metrics_and_summary(tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--config", SMOKE_MDQFL, "--out-dir", str(out)])
    assert code == 0
    csv_text = (out / "metrics.csv").read_text()
    assert len(csv_text.splitlines()) == 1 + 3  # header + R rounds
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["protocol"] == "mdqfl"
    assert summary["rounds_completed"] == 3


def test_run_device_traces_flag(tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--config", SMOKE_MDQFL, "--out-dir", str(out), "--device-traces"])
    assert code == 0
    traces = (out / "devices.csv").read_text().splitlines()
    assert len(traces) == 1 + 10 * 3  # header + devices x rounds


def test_run_rejects_invalid_config(tmp_path, capsys):
    bad = write_config(tmp_path, protocol="teleport")
    code = main(["run", "--config", str(bad)])
    assert code == 2
    assert "protocol" in capsys.readouterr().err


def test_run_missing_config_file(capsys):
    code = main(["run", "--config", "does/not/exist.json"])
    assert code == 2


def test_validate_config_subcommand(capsys):
    assert main(["validate-config", "--config", SMOKE_QFL]) == 0
    assert "valid" in capsys.readouterr().out


def test_env_var_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QFLSIM_OUT_DIR", str(tmp_path / "envout"))
    code = main(["run", "--config", SMOKE_MDQFL])
    assert code == 0
    assert (tmp_path / "envout" / "smoke_mdqfl" / "metrics.csv").exists()


def test_compare_subcommand(tmp_path, capsys):
    out = tmp_path / "cmp"
    code = main(["compare", "--a", SMOKE_QFL, "--b", SMOKE_MDQFL, "--out-dir", str(out)])
    assert code == 0
    rows = json.loads((out / "compare.json").read_text())
    assert {row["protocol"] for row in rows} == {"qfl", "mdqfl"}
    qfl = next(row for row in rows if row["protocol"] == "qfl")
    mdqfl = next(row for row in rows if row["protocol"] == "mdqfl")
    assert qfl["trainings"] == 30
    assert mdqfl["trainings"] < qfl["trainings"]
    assert "train" in capsys.readouterr().out


def test_report_subcommand(tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", SMOKE_MDQFL, "--out-dir", str(out)])
    svg_path = out / "report.svg"
    code = main(
        ["report", "--in", str(out / "metrics.csv"), "--out", str(svg_path),
         "--columns", "server_val_loss,server_val_acc"]
    )
    assert code == 0
    svg = svg_path.read_text()
    assert svg.startswith("<svg")
    assert svg.count("<polyline") == 2
    assert "server_val_loss" in svg


def test_report_deterministic(tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", SMOKE_MDQFL, "--out-dir", str(out)])
    a, b = out / "a.svg", out / "b.svg"
    main(["report", "--in", str(out / "metrics.csv"), "--out", str(a)])
    main(["report", "--in", str(out / "metrics.csv"), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_report_missing_column(tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", "--config", SMOKE_MDQFL, "--out-dir", str(out)])
    code = main(["report", "--in", str(out / "metrics.csv"), "--out", str(out / "x.svg"),
                 "--columns", "no_such_metric"])
    assert code == 3


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["run"])  # missing --config
    assert exc.value.code == 2
