import os
from pathlib import Path

from dotenv import load_dotenv

# Определяем среду выполнения (по умолчанию 'dev')
APP_ENV = os.getenv("APP_ENV", "dev")

# Выбираем файл .env в зависимости от среды
env_file = f".env.{APP_ENV}"
env_path = Path(".") / env_file

if env_path.exists():
    load_dotenv(dotenv_path=env_path, override=True)
else:
    # Без файла окружения используем переменные окружения напрямую
    load_dotenv(override=True)


class Settings:
    # Логи
    LOG_DIR = Path(os.getenv("LOG_DIR", "logs"))
    LOG_TIMEZONE = os.getenv("LOG_TIMEZONE", "Europe/Moscow")
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Реестр запусков экспериментов
    DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///aep_runs.db")
    REPORTS_DIR = Path(os.getenv("REPORTS_DIR", "reports"))

    # Монте-Карло
    DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", 20240601))
    WORKERS = int(os.getenv("WORKERS", 1))
    MCMC_BURN_IN_FACTOR = int(os.getenv("MCMC_BURN_IN_FACTOR", 200))
    MCMC_THINNING_FACTOR = int(os.getenv("MCMC_THINNING_FACTOR", 1))
    MCMC_TARGET_ACCEPTANCE = float(os.getenv("MCMC_TARGET_ACCEPTANCE", 0.3))

    # Оракулы и проверки
    QUADRATURE_MAX_EVALUATIONS = int(
        os.getenv("QUADRATURE_MAX_EVALUATIONS", 10_000_000)
    )
    KS_FALLBACK_THRESHOLD = float(os.getenv("KS_FALLBACK_THRESHOLD", 0.1))


settings = Settings()
