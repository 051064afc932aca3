import json

import pytest
from click.testing import CliRunner

from app.main import cli


@pytest.fixture
def runner():
    return CliRunner()


def test_partition_circular_n1(runner):
    result = runner.invoke(
        cli, ["partition", "--ensemble", "circular", "--n", "1", "--beta", "2"]
    )
    assert result.exit_code == 0
    assert result.output.strip() == "1.83787706641"


def test_partition_complex(runner):
    result = runner.invoke(
        cli, ["partition", "--ensemble", "hermite", "--n", "3", "--complex", "2", "0.5"]
    )
    assert result.exit_code == 0
    assert result.output.strip().endswith("i")


def test_unknown_ensemble_is_usage_error(runner):
    result = runner.invoke(
        cli, ["partition", "--ensemble", "gaussian", "--n", "2", "--beta", "2"]
    )
    assert result.exit_code == 2


def test_missing_parameter_is_domain_error(runner):
    result = runner.invoke(
        cli, ["partition", "--ensemble", "laguerre", "--n", "2", "--beta", "2"]
    )
    assert result.exit_code == 2
    assert "Ошибка области определения" in result.output


def test_cgf_command(runner):
    result = runner.invoke(
        cli,
        ["cgf", "--ensemble", "circular", "--n", "2", "--beta", "2", "--z", "0"],
    )
    assert result.exit_code == 0
    assert float(result.output) == 0.0


def test_rate_csv(runner, tmp_path):
    out = tmp_path / "rate.csv"
    result = runner.invoke(
        cli,
        [
            "rate",
            "--ensemble",
            "hermite",
            "--beta",
            "2",
            "--x",
            "-1",
            "--x",
            "5",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x,rate,argmax_t"
    assert float(lines[1].split(",")[1]) > 0
    assert lines[2].split(",")[1:] == ["+inf", ""]


def test_rate_requires_grid(runner):
    result = runner.invoke(cli, ["rate", "--ensemble", "hermite", "--beta", "2"])
    assert result.exit_code == 2


def test_predict_clt(runner):
    result = runner.invoke(
        cli,
        ["predict", "--ensemble", "hermite", "--n", "1000", "--beta", "2", "--kind", "clt"],
    )
    assert result.exit_code == 0
    record = json.loads(result.output)
    assert record["value"] == 0.5
    assert record["t_n"] == pytest.approx(10 * (2 - 3.141592653589793**2 / 6))


def test_predict_laguerre_needs_integer_n_theta(runner):
    result = runner.invoke(
        cli,
        [
            "predict",
            "--ensemble",
            "laguerre",
            "--theta",
            "1.5",
            "--n",
            "1001",
            "--beta",
            "2",
            "--kind",
            "mdp",
        ],
    )
    assert result.exit_code == 2


def test_predict_unsupported_ensemble(runner):
    result = runner.invoke(
        cli,
        ["predict", "--ensemble", "cauchy", "--d", "1", "--n", "100", "--beta", "2", "--kind", "clt"],
    )
    assert result.exit_code == 2


def test_sample_csv(runner):
    result = runner.invoke(
        cli,
        [
            "sample",
            "--ensemble",
            "hermite",
            "--n",
            "4",
            "--beta",
            "2",
            "--seed",
            "3",
            "--replicas",
            "2",
        ],
    )
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert lines[0] == "replica,index,point,log_density"
    assert len(lines) == 1 + 2 * 4


def test_sample_json_deterministic(runner):
    args = [
        "sample",
        "--ensemble",
        "circular",
        "--n",
        "3",
        "--beta",
        "1",
        "--seed",
        "8",
        "--format",
        "json",
    ]
    first = json.loads(runner.invoke(cli, args).output)
    second = json.loads(runner.invoke(cli, args).output)
    assert first == second
    assert len(first[0]["points"]) == 3


def test_verify_subset(runner):
    result = runner.invoke(
        cli, ["verify", "--check", "log_gamma_known_values", "--check", "entropy_hermite_exact"]
    )
    assert result.exit_code == 0
    assert "log_gamma_known_values" in result.output
    assert "pass" in result.output


def test_verify_unknown_check(runner):
    result = runner.invoke(cli, ["verify", "--check", "no_such_check"])
    assert result.exit_code == 2


def test_experiment_record_and_runs(runner, tmp_path):
    prefix = tmp_path / "cli_run"
    result = runner.invoke(
        cli,
        [
            "experiment",
            "--ensemble",
            "hermite",
            "--n",
            "4",
            "--beta",
            "2",
            "--replicas",
            "40",
            "--seed",
            "5",
            "--checks",
            "popescu",
            "--out",
            str(prefix),
            "--record",
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "cli_run.json").exists()
    assert (tmp_path / "cli_run.csv").exists()
    assert "реестре" in result.output

    listing = runner.invoke(cli, ["runs", "--limit", "5"])
    assert listing.exit_code == 0
    assert "hermite" in listing.output


def test_experiment_from_config_file(runner, tmp_path):
    path = tmp_path / "exp.env"
    path.write_text(
        f"ENSEMBLE=circular\nBETA=2\nN=3\nREPLICAS=20\nSEED=1\nCHECKS=popescu\n"
        f"OUTPUT_PATH={tmp_path / 'from_file'}\n",
        encoding="utf-8",
    )
    result = runner.invoke(cli, ["experiment", "--config", str(path), "--replicas", "30"])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "from_file.json").read_text(encoding="utf-8"))
    assert report["config"]["replicas"] == 30


def test_experiment_missing_keys(runner):
    result = runner.invoke(cli, ["experiment", "--ensemble", "hermite"])
    assert result.exit_code == 2
