from .adam import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .tensor import Graph, Tensor, apply_op, backward, config

from . import init, ops

__all__ = [
    "AdamState", "adam_step", "load_checkpoint", "save_checkpoint", "grad_check",
    "Graph", "Tensor", "apply_op", "backward", "config", "init", "ops",
]
