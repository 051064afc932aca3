import pytest

from services import (
    EnsembleSpec,
    ExperimentConfig,
    ExperimentService,
    RunRegistryService,
)


@pytest.fixture
def finished_run(tmp_path):
    config = ExperimentConfig(
        spec=EnsembleSpec.laguerre(2.0),
        beta=2.0,
        n=3,
        replicas=20,
        seed=2**63 + 5,
        checks=("popescu",),
        output_path=str(tmp_path / "registry"),
    )
    return config, ExperimentService.run_experiment(config, write=False)


def test_record_and_list(finished_run):
    config, report = finished_run
    first = RunRegistryService.record_run(config, report, None)
    second = RunRegistryService.record_run(config, report, "reports/x.json")
    assert second > first

    runs = RunRegistryService.list_runs(limit=2)
    assert [r.id for r in runs] == [second, first]
    latest = runs[0]
    assert latest.ensemble == "laguerre"
    assert latest.params == {"theta": 2.0}
    assert latest.seed == str(2**63 + 5)
    assert latest.passed is True
    assert latest.report_path == "reports/x.json"


def test_list_respects_limit(finished_run):
    config, report = finished_run
    for _ in range(3):
        RunRegistryService.record_run(config, report, None)
    assert len(RunRegistryService.list_runs(limit=1)) == 1
