import json
import os

import pytest
from click.testing import CliRunner

from shiftcheck.cli import main

runner = CliRunner()


@pytest.fixture
def bundle_dir(tmp_path):
    out = str(tmp_path / "bundle")
    result = runner.invoke(
        main, ["synth", "--preset", "unseen-cluster", "--seed", "1", "--out", out]
    )
    assert result.exit_code == 0, result.output
    return out


def test_synth_writes_bundle(bundle_dir):
    assert os.path.isfile(os.path.join(bundle_dir, "manifest.json"))
    assert os.path.isfile(os.path.join(bundle_dir, "test_logits.npy"))


def test_synth_from_scenario_file(tmp_path):
    scenario_path = tmp_path / "scenario.json"
    scenario_path.write_text(
        json.dumps({"name": "mini", "n_train": 60, "n_val": 40, "n_test": 30})
    )
    out = str(tmp_path / "b")
    result = runner.invoke(main, ["synth", "--scenario", str(scenario_path), "--out", out])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["n_test"] == 30


def test_synth_unknown_preset_exits_1(tmp_path):
    result = runner.invoke(main, ["synth", "--preset", "nope", "--out", str(tmp_path / "b")])
    assert result.exit_code == 1


def test_estimate_emits_json_report(bundle_dir):
    result = runner.invoke(
        main, ["estimate", "--bundle", bundle_dir, "--method", "atc-distcs"]
    )
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    report = body["reports"][0]
    assert report["method"] == "atc-distcs"
    assert 0.0 <= report["accuracy_estimate"] <= 1.0
    assert report["config"]["seed"] == 0  # full resolved config embedded


def test_estimate_writes_out_file(bundle_dir, tmp_path):
    out_file = str(tmp_path / "nested" / "report.json")
    result = runner.invoke(
        main, ["estimate", "--bundle", bundle_dir, "--method", "atc", "--out", out_file]
    )
    assert result.exit_code == 0, result.output
    with open(out_file) as fh:
        assert json.load(fh)["reports"][0]["method"] == "atc"


def test_estimate_deterministic_across_reruns(bundle_dir):
    outputs = []
    for _ in range(2):
        result = runner.invoke(
            main,
            ["estimate", "--bundle", bundle_dir, "--method", "atc-dist", "--method", "cot"],
        )
        assert result.exit_code == 0
        body = json.loads(result.output)
        body.pop("timestamp")
        outputs.append(json.dumps(body, sort_keys=True))
    assert outputs[0] == outputs[1]


def test_gde_without_second_bundle_exits_1(bundle_dir):
    result = runner.invoke(main, ["estimate", "--bundle", bundle_dir, "--method", "gde-dist"])
    assert result.exit_code == 1
    assert "second bundle" in result.output


def test_missing_bundle_exits_1(tmp_path):
    result = runner.invoke(
        main, ["estimate", "--bundle", str(tmp_path / "absent"), "--method", "atc"]
    )
    assert result.exit_code == 1


def test_unknown_subcommand_exits_with_usage():
    result = runner.invoke(main, ["frobnicate"])
    assert result.exit_code != 0
    assert "Usage" in result.output or "No such command" in result.output


def test_fit_then_estimate_round_trip(bundle_dir, tmp_path):
    fitted = str(tmp_path / "fitted")
    result = runner.invoke(main, ["fit", "--bundle", bundle_dir, "--out", fitted])
    assert result.exit_code == 0, result.output
    assert os.path.isfile(os.path.join(fitted, "atc.json"))
    assert os.path.isfile(os.path.join(fitted, "checker", "checker.json"))
    result = runner.invoke(
        main,
        ["estimate", "--bundle", bundle_dir, "--method", "atc-dist", "--fitted", fitted],
    )
    assert result.exit_code == 0, result.output


def test_evaluate_writes_csvs(bundle_dir, tmp_path):
    out = str(tmp_path / "reports")
    result = runner.invoke(
        main,
        [
            "evaluate",
            "--bundle",
            bundle_dir,
            "--method",
            "atc",
            "--method",
            "atc-dist",
            "--out",
            out,
        ],
    )
    assert result.exit_code == 0, result.output
    for name in ("errors.csv", "scatter.csv", "summary.csv"):
        assert os.path.isfile(os.path.join(out, name))
