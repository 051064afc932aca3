from .messages import *
