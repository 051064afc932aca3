import math

from sqlalchemy import select
from sqlalchemy.exc import SQLAlchemyError

from db.database import Base, engine, get_db_session
from db.models import ExperimentRun
from services.entities import ExperimentConfig, ExperimentReport
from services.errors import AepError


class RunRegistryService:

    @staticmethod
    def ensure_tables() -> None:
        Base.metadata.create_all(engine)

    @staticmethod
    def record_run(
        config: ExperimentConfig, report: ExperimentReport, report_path: str | None
    ) -> int:
        """Сохранить итог эксперимента; возвращает id записи."""
        RunRegistryService.ensure_tables()
        ks = report.ks_distance if math.isfinite(report.ks_distance) else None
        run = ExperimentRun(
            ensemble=config.spec.kind.value,
            params=config.spec.params(),
            beta=config.beta,
            n=config.n,
            replicas=config.replicas,
            seed=str(config.seed),
            statistic=config.statistic.value,
            report_path=report_path,
            passed=report.passed,
            ks_distance=ks,
        )
        for session in get_db_session():
            try:
                session.add(run)
                session.commit()
                return run.id
            except SQLAlchemyError as e:
                session.rollback()
                raise AepError(f"Не удалось сохранить запуск: {e}") from e

    @staticmethod
    def list_runs(limit: int = 20) -> list[ExperimentRun]:
        """Последние запуски, новые первыми."""
        RunRegistryService.ensure_tables()
        for session in get_db_session():
            try:
                result = session.execute(
                    select(ExperimentRun).order_by(ExperimentRun.id.desc()).limit(limit)
                )
                return list(result.scalars().all())
            except SQLAlchemyError as e:
                raise AepError(f"Не удалось прочитать реестр запусков: {e}") from e
