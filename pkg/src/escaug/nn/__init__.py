from . import tensor, layers, optim, checkpoint, gradcheck  # noqa: F401
from .tensor import Tensor, no_grad  # noqa: F401
