from .tensor import Tensor, as_tensor, concat, no_grad
from .functional import softmax_lastdim, rmsnorm, silu
from .gradcheck import GradCheckReport, grad_check, grad_check_parameters
from .module import Module, Linear, RMSNorm, parameter
