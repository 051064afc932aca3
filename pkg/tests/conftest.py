import os
import tempfile

# до импорта config: логи, реестр и отчеты во временной директории
_TMP = tempfile.mkdtemp(prefix="aep_lab_tests_")
os.environ.setdefault("APP_ENV", "test")
os.environ["LOG_DIR"] = os.path.join(_TMP, "logs")
os.environ["DATABASE_URL"] = f"sqlite:///{os.path.join(_TMP, 'runs.db')}"
os.environ["REPORTS_DIR"] = os.path.join(_TMP, "reports")

import pytest  # noqa: E402

from services import EnsembleSpec  # noqa: E402


@pytest.fixture
def hermite():
    return EnsembleSpec.hermite()


@pytest.fixture
def circular():
    return EnsembleSpec.circular()


@pytest.fixture
def laguerre2():
    return EnsembleSpec.laguerre(2.0)


@pytest.fixture
def jacobi11():
    return EnsembleSpec.jacobi(1.0, 1.0)
