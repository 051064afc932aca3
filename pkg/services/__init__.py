from .errors import *
from .entities import *
from .ensemble_service import *
from .partition_service import *
from .ldp_service import *
from .modgauss_service import *
from .sampler_service import *
from .experiment_service import *
from .verification_service import *
from .run_registry_service import *
