from .dependencies import logger
from .loader import cli
