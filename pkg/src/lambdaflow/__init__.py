"""Metric gradient flows: dissipation checks, reparametrization order, minimal solutions."""
__version__ = "0.1.0"

from .errors import (
    CoercivityError,
    ConcatenationGapError,
    ConfigError,
    DomainError,
    LambdaFlowError,
    NotASolutionError,
    PreconditionError,
)
from .metric import *  # noqa: F401,F403
from .problems import *  # noqa: F401,F403
from .dissipation import *  # noqa: F401,F403
from .mm import *  # noqa: F401,F403
from .order import *  # noqa: F401,F403
from .harness import *  # noqa: F401,F403
from ._accel import backend_name
