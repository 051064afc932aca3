import csv
import json
import math

import numpy as np
import pytest

from services import (
    EXPERIMENT_CHECKS,
    EnsembleSpec,
    ExperimentConfig,
    ExperimentService,
    ModGaussService,
    Statistic,
)
from services.errors import ConfigError, DomainError, UnsupportedEnsembleError
from services.experiment_service import (
    CSV_HEADER,
    cumulants_with_errors,
    empirical_log_mgf,
)
from services.modgauss_service import ZONE_XI_GRID


def _config(tmp_path, **kwargs):
    values = dict(
        spec=EnsembleSpec.hermite(),
        beta=2.0,
        n=6,
        replicas=200,
        seed=1,
        output_path=str(tmp_path / "run"),
    )
    values.update(kwargs)
    return ExperimentConfig(**values)


def _without_runtime(report):
    data = json.loads(ExperimentService.report_json(report))
    data.pop("runtime_seconds")
    return data


def test_report_structure_and_files(tmp_path):
    report = ExperimentService.run_experiment(_config(tmp_path))
    data = json.loads((tmp_path / "run.json").read_text(encoding="utf-8"))
    for key in (
        "schema_version",
        "config",
        "empirical_cumulants",
        "scaled_cumulants",
        "ks_distance",
        "ks_distance_exact",
        "tail_table",
        "exact_predictions",
        "certification",
        "pass_flags",
        "runtime_seconds",
        "notes",
    ):
        assert key in data
    assert data["schema_version"] == 1
    assert data["config"]["ensemble"] == "hermite"
    assert set(report.pass_flags) == set(EXPERIMENT_CHECKS)
    assert [row["t"] for row in data["certification"]] == [-0.5, 0.2, 0.5]
    assert {row["kind"] for row in data["tail_table"]} == {"clt", "mdp", "llt"}
    assert data["popescu"]["identity_max_error"] <= 1e-9

    with open(tmp_path / "run.csv", encoding="utf-8") as stream:
        rows = list(csv.reader(stream))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 201
    assert [int(r[0]) for r in rows[1:]] == list(range(200))


def test_run_is_deterministic(tmp_path):
    config = _config(tmp_path, replicas=50)
    first = ExperimentService.run_experiment(config, write=False)
    second = ExperimentService.run_experiment(config, write=False)
    assert _without_runtime(first) == _without_runtime(second)
    assert not (tmp_path / "run.json").exists()


def test_different_seeds_differ(tmp_path):
    a = ExperimentService.run_experiment(_config(tmp_path, replicas=30), write=False)
    b = ExperimentService.run_experiment(_config(tmp_path, replicas=30, seed=2), write=False)
    assert a.empirical_cumulants["mean"] != b.empirical_cumulants["mean"]


def test_selected_checks_only(tmp_path):
    config = _config(tmp_path, replicas=50, checks=("mean", "ks"))
    report = ExperimentService.run_experiment(config, write=False)
    assert set(report.pass_flags) == {"mean", "ks"}


def test_popescu_check_needs_two_points(tmp_path):
    config = _config(tmp_path, n=1, replicas=20, checks=("popescu",))
    with pytest.raises(DomainError):
        ExperimentService.run_experiment(config, write=False)


def test_normalized_statistic(tmp_path):
    config = _config(tmp_path, replicas=50, statistic=Statistic.NORMALIZED_Y)
    report = ExperimentService.run_experiment(config, write=False)
    # нормированная статистика имеет порядок единицы
    assert abs(report.empirical_cumulants["mean"]) < 3
    assert 0.1 < report.empirical_cumulants["variance"] < 10


def test_mcmc_run_reports_diagnostics(tmp_path):
    config = _config(
        tmp_path, spec=EnsembleSpec.jacobi(1.0, 1.0), n=3, replicas=30, checks=("mean",)
    )
    report = ExperimentService.run_experiment(config, write=False)
    assert report.mcmc is not None
    assert 0 < report.mcmc["acceptance_rate"] < 1
    assert any("MCMC" in note for note in report.notes)


def test_centered_statistic_requires_e_beta(tmp_path):
    config = _config(
        tmp_path,
        spec=EnsembleSpec.circular_jacobi(1.0),
        n=3,
        replicas=10,
        statistic=Statistic.CENTERED_Y,
    )
    with pytest.raises(UnsupportedEnsembleError):
        ExperimentService.run_experiment(config, write=False)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(EnsembleSpec.hermite(), 2.0, 5, 10, 1, checks=("speed",))
    with pytest.raises(ConfigError):
        ExperimentConfig(EnsembleSpec.hermite(), 2.0, 5, 0, 1)
    with pytest.raises(DomainError):
        ExperimentConfig(EnsembleSpec.hermite(), -1.0, 5, 10, 1)


def test_config_from_file_with_overrides(tmp_path):
    path = tmp_path / "experiment.env"
    path.write_text(
        "ENSEMBLE=laguerre\nTHETA=2\nBETA=2\nN=10\nREPLICAS=100\nSEED=7\n"
        "CHECKS=mean, ks\n",
        encoding="utf-8",
    )
    config = ExperimentConfig.from_file(str(path), n=20, replicas=None)
    assert config.spec == EnsembleSpec.laguerre(2.0)
    assert config.n == 20
    assert config.replicas == 100
    assert config.checks == ("mean", "ks")
    assert config.to_dict()["params"] == {"theta": 2.0}


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(tmp_path / "missing.env"))
    path = tmp_path / "bad.env"
    path.write_text("ENSEMBLE=hermite\nBETA=2\nN=5\nREPLICAS=3\nSPEED=1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(path))
    path.write_text("ENSEMBLE=hermite\nBETA=2\nN=five\nREPLICAS=3\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(path))


def test_cumulants_with_errors_on_known_sample():
    values = np.array([1.0, 2.0, 3.0, 4.0])
    result = cumulants_with_errors(values)
    assert result["mean"] == 2.5
    assert result["variance"] == pytest.approx(5 / 3)
    assert result["third"] == pytest.approx(0.0)


def test_empirical_log_mgf():
    rng = np.random.default_rng(3)
    sample = rng.standard_normal(20000)
    estimate, se, method = empirical_log_mgf(sample, 0.5)
    assert method == "delta"
    assert abs(estimate - 0.125) <= 5 * se
    _, _, method = empirical_log_mgf(sample, -0.5)
    assert method == "jackknife"


@pytest.mark.slow
def test_hermite_experiment_passes(tmp_path):
    config = _config(
        tmp_path,
        n=10,
        replicas=3000,
        seed=2024,
        checks=("mean", "variance", "certification", "popescu"),
    )
    report = ExperimentService.run_experiment(config, write=False)
    assert report.passed, report.pass_flags
    assert math.isfinite(report.ks_distance_exact)


def test_ks_threshold_uses_kolmogorov_bound(tmp_path):
    config = _config(tmp_path, replicas=100, checks=("ks",))
    report = ExperimentService.run_experiment(config, write=False)
    predictions = report.exact_predictions

    zone = ModGaussService.zone_control_fit(EnsembleSpec.hermite(), 2.0, [6], ZONE_XI_GRID)
    bound = ModGaussService.kolmogorov_bound(zone, 6, 2.0)
    assert predictions["kolmogorov_bound"] == pytest.approx(bound)
    assert predictions["ks_threshold"] == pytest.approx(max(bound, 0.1))
    assert predictions["zone_control"]["K1"] == pytest.approx(zone.K1)
    assert report.pass_flags["ks"] == (
        report.ks_distance_exact <= predictions["ks_threshold"]
    )

    data = json.loads(ExperimentService.report_json(report))
    assert data["exact_predictions"]["ks_threshold"] == pytest.approx(
        predictions["ks_threshold"]
    )


def test_ks_threshold_fallback_without_zone_control(tmp_path):
    config = _config(
        tmp_path, spec=EnsembleSpec.jacobi(1.0, 1.0), n=3, replicas=30, checks=("ks",)
    )
    report = ExperimentService.run_experiment(config, write=False)
    assert report.exact_predictions["ks_threshold"] == 0.1
    assert report.exact_predictions["kolmogorov_bound"] is None
    assert report.pass_flags["ks"] == (report.ks_distance_exact <= 0.1)


def test_failed_write_leaves_no_files(tmp_path, monkeypatch):
    config = _config(tmp_path, replicas=20, checks=("mean",))
    report = ExperimentService.run_experiment(config, write=False)

    def broken_writer(*args, **kwargs):
        raise OSError("диск заполнен")

    monkeypatch.setattr("services.experiment_service.csv.writer", broken_writer)
    with pytest.raises(OSError):
        ExperimentService.write_report(
            report, config.output_path, np.zeros(20), np.zeros(20)
        )
    assert list(tmp_path.iterdir()) == []


@pytest.mark.slow
@pytest.mark.parametrize(
    "spec", [EnsembleSpec.hermite(), EnsembleSpec.circular()], ids=lambda s: s.label()
)
def test_ks_distance_shrinks_with_n(tmp_path, spec):
    # SE расстояния KS при m = 10^4 около 0.87 / sqrt(m) = 0.009
    reports = {}
    for n in (100, 200):
        config = _config(
            tmp_path, spec=spec, n=n, replicas=10000, seed=2024, checks=("ks",)
        )
        report = ExperimentService.run_experiment(config, write=False)
        reports[n] = report
    assert reports[200].ks_distance < reports[100].ks_distance
    assert reports[200].ks_distance <= 0.1
    assert reports[200].ks_distance_exact <= 0.1
    assert reports[200].pass_flags["ks"]
