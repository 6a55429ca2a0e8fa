# TrustQN/__init__.py
from . import kernels
from . import curvature
from . import hessian
from . import subproblem
from . import objective
from . import sampling
from . import trainers
from . import idx
from . import table
from . import schema
from . import attribute
from . import config
from . import models
from . import fuzz
from . import exceptions
PACKAGE_VERSION = "0.1.0"


def get_package_version():
    return PACKAGE_VERSION
__version__ = get_package_version()
__all__ = ['kernels', 'curvature', 'hessian', 'subproblem', 'objective', 'sampling', 'trainers',
           'idx', 'table', 'schema', 'attribute', 'config', 'models', 'fuzz', 'exceptions']
