import logging

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from config.settings import settings

# Создаем движок и фабрику сессий
engine = create_engine(settings.DATABASE_URL, echo=False, future=True)

logging.getLogger("sqlalchemy.engine").setLevel(logging.WARNING)

SessionLocal = sessionmaker(engine, expire_on_commit=False)

Base = declarative_base()


def get_db_session():
    """Контекстный генератор сессии БД для сервисов."""
    with SessionLocal() as session:
        yield session
