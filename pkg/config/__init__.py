from .logging_config import setup_logging
from .settings import settings
