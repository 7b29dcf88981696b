from ._figures import *
from ._output import *
from ._parallel import *
from ._pipelines import *
from ._scenario import *
from ._sweeps import *
