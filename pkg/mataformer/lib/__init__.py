from . import tensor
from . import optim
