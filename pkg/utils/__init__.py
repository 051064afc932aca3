from .quadrature import *
from .specfun import *
