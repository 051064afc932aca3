from sqlalchemy import JSON, Boolean, Column, DateTime, Float, Integer, String, func

from db.database import Base


class ExperimentRun(Base):
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now(), nullable=False)
    ensemble = Column(String, nullable=False)
    params = Column(JSON, nullable=False, default=dict)
    beta = Column(Float, nullable=False)
    n = Column(Integer, nullable=False)
    replicas = Column(Integer, nullable=False)
    # 64-битный сид не помещается в знаковый INTEGER, храним строкой
    seed = Column(String, nullable=False)
    statistic = Column(String, nullable=False)
    report_path = Column(String, nullable=True)
    passed = Column(Boolean, nullable=False)
    ks_distance = Column(Float, nullable=True)
