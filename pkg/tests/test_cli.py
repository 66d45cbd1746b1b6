import json
import re

import pytest

from varclust.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, cli_run


def reported(out, name):
    m = re.search(rf"^{re.escape(name)}\s+(\S+)$", out, re.MULTILINE)
    assert m, out
    return m.group(1)


def test_synthetic_preset(tmp_path, capsys):
    code = cli_run(["run", "--preset", "synthetic3", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert reported(out, "k_global") == "3"
    assert reported(out, "numbers sent") == "120"
    assert reported(out, "model elements") == "180"
    for name in ("result.json", "trace.log", "points_labeled.csv", "labels_site0.csv", "labels_site2.csv"):
        assert (tmp_path / name).is_file()
    doc = json.loads((tmp_path / "result.json").read_text())
    assert doc["metrics"]["k_global"] == 3
    assert doc["config"]["sites"] == 3


def test_iris_preset_runs(tmp_path, capsys):
    code = cli_run(["run", "--preset", "iris", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert int(reported(out, "k_global")) >= 1
    assert (tmp_path / "labels_site1.csv").is_file()


@pytest.mark.xfail(
    strict=True,
    reason="the fixed 2x variance limit admits the versicolor/virginica merge; see the iris acceptance criterion",
)
def test_iris_preset_reports_three_classes(tmp_path, capsys):
    assert cli_run(["run", "--preset", "iris", "--out", str(tmp_path)]) == EXIT_OK
    assert reported(capsys.readouterr().out, "k_global") == "3"


def test_overrides_apply(tmp_path, capsys):
    code = cli_run(
        [
            "run", "--preset", "synthetic3", "--sites", "2", "--local-k", "4", "6",
            "--seed", "3", "--baseline-k", "0", "--out", str(tmp_path),
        ]
    )
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert reported(out, "baseline SSE") == "-"
    assert reported(out, "model elements") == str(3 * 2 * (4 + 6))
    doc = json.loads((tmp_path / "result.json").read_text())
    assert [site["k"] for site in doc["config"]["local"]] == [4, 6]
    assert doc["config"]["seed"] == 3


def test_config_file_with_csv(tmp_path, capsys):
    data = tmp_path / "pts.csv"
    rows = ["x,y"] + [f"{i % 5 * 0.1},{i % 3 * 0.1}" for i in range(20)]
    rows += [f"{10 + i % 5 * 0.1},{i % 3 * 0.1}" for i in range(20)]
    data.write_text("\n".join(rows) + "\n")
    cfg = {
        "dataset": {"kind": "csv", "path": "pts.csv"},
        "sites": 2,
        "local": {"algorithm": "kmeans", "k": 4},
        "seed": 1,
        "out": str(tmp_path / "out"),
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert cli_run(["run", "--config", str(tmp_path / "cfg.json")]) == EXIT_OK
    assert reported(capsys.readouterr().out, "k_global") == "2"


def test_missing_config_file(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert cli_run(["run", "--config", str(missing)]) == EXIT_USAGE
    assert str(missing) in capsys.readouterr().err


def test_missing_data_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": {"kind": "csv", "path": "gone.csv"}, "sites": 1, "local": {"k": 2}}))
    assert cli_run(["run", "--config", str(cfg)]) == EXIT_USAGE
    assert "gone.csv" in capsys.readouterr().err


def test_bad_flags_exit_2(capsys):
    assert cli_run(["run", "--preset", "nope"]) == EXIT_USAGE
    assert cli_run(["run"]) == EXIT_USAGE
    assert cli_run(["run", "--preset", "iris", "--sigma-factor", "-1"]) == EXIT_USAGE
    assert cli_run(["run", "--preset", "iris", "--local-k", "1", "2", "3"]) == EXIT_USAGE


def test_runtime_failure_exits_1(tmp_path, capsys):
    # 150 rows over 2 sites leaves 75 per site, short of k = 90
    code = cli_run(["run", "--preset", "iris", "--local-k", "90", "--out", str(tmp_path)])
    assert code == EXIT_RUNTIME
    assert "fewer than k" in capsys.readouterr().err
