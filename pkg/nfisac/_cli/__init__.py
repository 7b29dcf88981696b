from ._config import *
from ._main import *
