__version__ = "1.0.0"

from ._cli import *
from ._core import *
from ._experiments import *
from ._utils import *
