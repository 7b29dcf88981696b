from ._errors import *
from ._linalg import *
from ._seeding import *
from ._units import *
