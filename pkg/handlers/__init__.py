from .decorators import *
from .commands import *
