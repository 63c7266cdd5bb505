from __future__ import annotations

import json

import numpy as np
import pytest
from typer.testing import CliRunner

from medianbayes.harness import config as study_config
from medianbayes.harness.io import write_matrix
from tools.medianbayes_cli import app

runner = CliRunner()


def _payload(text: str) -> dict:
    return json.loads(text[text.index("{") : text.rindex("}") + 1])


@pytest.fixture(autouse=True)
def _isolated(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(study_config.ENV_WORKERS, raising=False)
    monkeypatch.delenv(study_config.ENV_SEED, raising=False)


@pytest.fixture
def sample_csv(tmp_path):
    data = np.random.default_rng(0).normal(size=(40, 2))
    return write_matrix(tmp_path / "sample.csv", data)


@pytest.fixture
def study_yml(tmp_path):
    path = tmp_path / "study.yml"
    path.write_text(
        "study:\n"
        "  kind: one_sample\n"
        "  locations: [[0, 0], [1, 1]]\n"
        "  n: 20\n"
        "  B: 30\n"
        "  replications: 2\n"
        "  methods: [npbayes, sign, hotelling]\n",
        encoding="utf-8",
    )
    return path


def test_test1_prints_json(sample_csv):
    result = runner.invoke(app, ["test1", "--data", str(sample_csv), "--method", "npbayes,sign", "--seed", "3"])
    assert result.exit_code == 0, result.output
    payload = _payload(result.stdout)
    assert payload["kind"] == "one_sample"
    assert payload["theta0"] == [0.0, 0.0]
    assert payload["seed"] == 3
    assert [r["method"] for r in payload["results"]] == ["npbayes", "sign"]


def test_test1_writes_out(sample_csv, tmp_path):
    out = tmp_path / "reports" / "one.json"
    result = runner.invoke(
        app, ["test1", "--data", str(sample_csv), "--theta0", "5,5", "--method", "hotelling", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["results"][0]["reject"] is True


def test_test2_identical_files_with_matching_seeds(sample_csv):
    result = runner.invoke(
        app,
        ["test2", "--data1", str(sample_csv), "--data2", str(sample_csv), "--seed", "5", "--seed2", "5"],
    )
    assert result.exit_code == 0, result.output
    payload = _payload(result.stdout)
    assert payload["seed"] == [5, 5]
    assert payload["results"][0]["statistic"] == 0.0
    assert payload["results"][0]["reject"] is False


@pytest.mark.parametrize(
    "args",
    [
        ["test1", "--data", "missing.csv"],
        ["test1", "--data", "{sample}", "--method", "magic"],
        ["test1", "--data", "{sample}", "--env-file", "absent.env"],
        ["power"],
        ["power", "--preset", "table9"],
    ],
)
def test_config_errors_exit_1(args, sample_csv):
    argv = [a.replace("{sample}", str(sample_csv)) for a in args]
    assert runner.invoke(app, argv).exit_code == 1


def test_runtime_errors_exit_2(sample_csv):
    result = runner.invoke(app, ["test1", "--data", str(sample_csv), "--theta0", "0,0,0"])
    assert result.exit_code == 2


def test_power_writes_reports(study_yml, tmp_path):
    out = tmp_path / "results" / "power.csv"
    result = runner.invoke(app, ["power", "--config", str(study_yml), "--seed", "11", "--out", str(out)])
    assert result.exit_code == 0, result.output
    for suffix in ("csv", "md", "json"):
        assert (tmp_path / "results" / f"power.{suffix}").exists()
    payload = json.loads((tmp_path / "results" / "power.json").read_text(encoding="utf-8"))
    assert payload["seed"] == 11
    assert payload["config"]["replications"] == 2


def test_power_prints_markdown(study_yml):
    result = runner.invoke(app, ["power", "--config", str(study_yml), "--reps", "1", "--method", "sign"])
    assert result.exit_code == 0, result.output
    assert "# Power study" in result.stdout
    assert "- replications: 1" in result.stdout


def test_powercmp_needs_power_curve(study_yml):
    assert runner.invoke(app, ["powercmp", "--config", str(study_yml)]).exit_code == 2


def test_power_tag_names_reports_by_kind_and_seed(study_yml, tmp_path):
    out = tmp_path / "results" / "power.csv"
    result = runner.invoke(app, ["power", "--config", str(study_yml), "--seed", "11", "--out", str(out), "--tag"])
    assert result.exit_code == 0, result.output
    for suffix in ("csv", "md", "json"):
        assert (tmp_path / "results" / f"power_one_sample_seed11.{suffix}").exists()
    assert not (tmp_path / "results" / "power.csv").exists()
