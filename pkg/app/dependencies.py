from config.logging_config import setup_logging

logger = setup_logging()
