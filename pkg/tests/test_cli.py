import json

import pytest

from demoforge.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_run_scripted_success(capsys, tmp_path):
    code, summary = run_cli(
        capsys, "run", "--task", "pick_and_lift", "--seed", "1",
        "--out", str(tmp_path / "ep"),
    )
    assert code == 0
    assert summary["outcome"] == "success"
    assert (tmp_path / "ep" / "meta.json").exists()


def test_run_with_injection_file(capsys, tmp_path):
    rates = tmp_path / "rates.json"
    rates.write_text(json.dumps({"rates": {"verify": 1.0}, "seed": 0}))
    code, summary = run_cli(
        capsys, "run", "--task", "pick_and_lift", "--seed", "0",
        "--inject", str(rates), "--max-tries", "3",
    )
    assert code == 1  # non-success outcome
    assert summary["outcome"].startswith("fail_")


def test_gen_and_eval_and_analyze(capsys, tmp_path):
    out = tmp_path / "ds"
    code, summary = run_cli(
        capsys, "gen", "--task", "pick_and_lift", "--n", "3", "--out", str(out),
        "--no-views",
    )
    assert code == 0 and summary["successes"] == 3

    code, summary = run_cli(
        capsys, "analyze", "chamfer", str(out / "episode_0000"), str(out / "episode_0001"),
    )
    assert code == 0
    assert summary["chamfer_distance"] >= 0.0

    code, summary = run_cli(capsys, "analyze", "keyframes", str(out / "episode_0000"))
    assert code == 0
    assert summary["keyframes"][0]["step_index"] == 0

    csv = tmp_path / "scaling.csv"
    csv.write_text("demos,success\n1,10\n10,30\n100,60\n")
    code, summary = run_cli(capsys, "analyze", "scaling", str(csv))
    assert code == 0 and summary["points"] == 3

    code, summary = run_cli(
        capsys, "eval", "--policy", "knn", "--train", str(out),
        "--task", "pick_and_lift", "--episodes", "3", "--seeds", "2",
    )
    assert code == 0
    assert set(summary["per_seed"]) == {"0", "1"}


def test_breakdown_summary(capsys, tmp_path):
    rates = tmp_path / "rates.json"
    rates.write_text(json.dumps({"rates": {"verify": 1.0}, "seed": 1}))
    code, summary = run_cli(
        capsys, "breakdown", "--task", "pick_and_lift", "--rates", str(rates),
        "--episodes", "2", "--max-tries", "2",
    )
    assert code == 0
    assert summary["success_reasoning_zeroed"] == 1.0
    assert summary["success_base"] < 1.0


def test_cli_reports_config_errors(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    code = main(["run", "--task", str(bad)])
    assert code == 1
