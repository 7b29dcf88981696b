from ._beamform import *
from ._channel import *
from ._crb import *
from ._geometry import *
from ._powermin import *
from ._precoder import *
from ._sensing import *
