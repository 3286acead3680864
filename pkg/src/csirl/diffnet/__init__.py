"""Differentiable MLP core: forward, backprop, mixed second derivatives."""
from .backend import NAME as BACKEND
from .checkpoint import CKPT_FORMAT, load_checkpoint, save_checkpoint
from .core import (Adam, Cache, MLPSpec, NumericError, backprop_grad, backward,
                   check_params, fd_grad, forward_cache, mlp_forward,
                   require_finite, second_order_vjp, sgd_step, soft_update)
from .dual import Dual

__all__ = [
    "BACKEND", "CKPT_FORMAT", "Adam", "Cache", "Dual", "MLPSpec", "NumericError",
    "backprop_grad", "backward", "check_params", "fd_grad", "forward_cache",
    "load_checkpoint", "mlp_forward", "require_finite", "save_checkpoint",
    "second_order_vjp", "sgd_step", "soft_update",
]
