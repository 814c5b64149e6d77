from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from mixcell.cli import main
from mixcell.corpus import RecipeIndex, recipe_from_dict
from mixcell.demo import DEMO_RECIPE_DOCS, demo_detection_document


@pytest.fixture
def workspace(tmp_path):
    recipes_dir = tmp_path / "recipes"
    index = RecipeIndex()
    for doc in DEMO_RECIPE_DOCS:
        index.save(recipe_from_dict(doc), recipes_dir)
    detections = tmp_path / "detections.json"
    detections.write_bytes(demo_detection_document())
    no_sugar = tmp_path / "detections_no_sugar.json"
    no_sugar.write_bytes(demo_detection_document(exclude=("sugar",)))
    return tmp_path


@pytest.fixture
def runner():
    return CliRunner()


class TestIngestRetrieve:
    def test_ingest(self, runner, workspace):
        result = runner.invoke(main, ["ingest", str(workspace / "recipes")])
        assert result.exit_code == 0
        assert "loaded 5 recipes" in result.output

    def test_retrieve_rank_one(self, runner, workspace):
        result = runner.invoke(
            main, ["retrieve", "mojito", "-k", "3", "--recipes", str(workspace / "recipes")]
        )
        assert result.exit_code == 0
        hits = json.loads(result.output)
        assert len(hits) == 3
        assert hits[0]["recipe_id"] == "mojito"
        assert hits[0]["rank"] == 1


class TestInventoryReconcile:
    def test_inventory(self, runner, workspace):
        result = runner.invoke(main, ["inventory", str(workspace / "detections.json")])
        assert result.exit_code == 0
        snapshot = json.loads(result.output)
        assert {item["label"] for item in snapshot["items"]} >= {"sugar", "honey", "tequila"}

    def test_reconcile_reports_missing_sugar(self, runner, workspace):
        result = runner.invoke(
            main,
            [
                "reconcile",
                "daiquiri",
                str(workspace / "detections_no_sugar.json"),
                "--recipes",
                str(workspace / "recipes"),
            ],
        )
        assert result.exit_code == 0
        out = json.loads(result.output)
        assert out["anomalies"][0]["kind"] == "MissingIngredient"
        assert out["anomalies"][0]["suggestions"] == ["honey"]

    def test_reconcile_unattended_resolves(self, runner, workspace):
        result = runner.invoke(
            main,
            [
                "reconcile",
                "daiquiri",
                str(workspace / "detections_no_sugar.json"),
                "--recipes",
                str(workspace / "recipes"),
                "--unattended",
            ],
        )
        assert result.exit_code == 0
        out = json.loads(result.output)
        assert out["resolution"]["applied_substitutions"] == [{"from": "sugar", "to": "honey"}]

    def test_unknown_recipe_errors(self, runner, workspace):
        result = runner.invoke(
            main,
            [
                "reconcile",
                "negroni",
                str(workspace / "detections.json"),
                "--recipes",
                str(workspace / "recipes"),
            ],
        )
        assert result.exit_code == 1
        assert json.loads(result.stderr)["error"] == "unknown-id"


class TestCompileSimulate:
    def test_compile_then_simulate_round_trip(self, runner, workspace):
        program_path = workspace / "program.json"
        report_path = workspace / "report.json"
        result = runner.invoke(
            main,
            [
                "compile",
                "margarita",
                str(workspace / "detections.json"),
                "--recipes",
                str(workspace / "recipes"),
                "-o",
                str(program_path),
            ],
        )
        assert result.exit_code == 0, result.output
        program_doc = json.loads(program_path.read_text())
        assert [a["op"] for a in program_doc["actions"]][:2] == ["take_glass", "take_bottle"]

        result = runner.invoke(
            main,
            [
                "simulate",
                str(program_path),
                str(workspace / "detections.json"),
                "--seed",
                "7",
                "-o",
                str(report_path),
            ],
        )
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["ok"] is True
        assert all(p["within_tolerance"] for p in summary["pours"])
        report = json.loads(report_path.read_text())
        assert report["ok"] is True
        assert len(report["traces"]) == 3

    def test_simulate_rejects_mutated_program(self, runner, workspace):
        program_path = workspace / "program.json"
        runner.invoke(
            main,
            [
                "compile",
                "mojito",
                str(workspace / "detections.json"),
                "--recipes",
                str(workspace / "recipes"),
                "-o",
                str(program_path),
            ],
        )
        doc = json.loads(program_path.read_text())
        del doc["actions"][3]  # drop a left_bottle: breaks hold-state sequencing
        program_path.write_text(json.dumps(doc))
        result = runner.invoke(
            main,
            ["simulate", str(program_path), str(workspace / "detections.json"), "--seed", "1"],
        )
        assert result.exit_code == 1
        error = json.loads(result.stderr)
        assert error["error"] == "validation-failure"
        assert error["violations"]

    def test_seed_reproducibility(self, runner, workspace):
        program_path = workspace / "program.json"
        runner.invoke(
            main,
            [
                "compile",
                "daiquiri",
                str(workspace / "detections.json"),
                "--recipes",
                str(workspace / "recipes"),
                "-o",
                str(program_path),
            ],
        )
        outs = []
        for _ in range(2):
            result = runner.invoke(
                main,
                ["simulate", str(program_path), str(workspace / "detections.json"), "--seed", "9"],
            )
            outs.append(result.output)
        assert outs[0] == outs[1]


class TestDemo:
    def test_demo_serves_everything(self, runner):
        result = runner.invoke(main, ["demo", "--seed", "1"])
        assert result.exit_code == 0, result.output
        assert "demo: 10/10 sessions Served" in result.output
        assert "answered 'honey'" in result.output


class TestConfig:
    def test_config_file_overrides(self, runner, tmp_path, workspace):
        config = tmp_path / "mixcell.toml"
        config.write_text(
            "[sim.sensor]\nnoise_sigma_g = 0.0\nlatency_samples = 0\n"
            "[perception]\ndefault_volume_ml = 500.0\n"
        )
        result = runner.invoke(
            main,
            ["--config", str(config), "inventory", str(workspace / "detections.json")],
        )
        assert result.exit_code == 0
        snapshot = json.loads(result.output)
        assert all(item["available_ml"] == 500.0 for item in snapshot["items"])
