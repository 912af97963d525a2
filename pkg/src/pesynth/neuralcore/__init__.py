"""Minimal differentiable-array substrate used by the models."""
from .checkpoint import CheckpointError, VersionError, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .optim import Optimizer, OptimizerConfig, Scheduler
from .params import ParamStore
from .tensor import (
    ShapeError, Tensor, add, as_tensor, default_dtype, bce_with_logits, concat, cross_entropy, dropout, embedding,
    layer_norm, linear, log_softmax, matmul, mean, mul, no_grad, precision, relu, reshape,
    selu, sigmoid, sinusoidal_positions, softmax, softmax_np, sum_, swapaxes, take_rows,
)

__all__ = [
    "CheckpointError", "VersionError", "load_checkpoint", "save_checkpoint", "grad_check",
    "Optimizer", "OptimizerConfig", "Scheduler", "ParamStore", "ShapeError", "Tensor", "add", "as_tensor", "default_dtype",
    "bce_with_logits", "concat", "cross_entropy", "dropout", "embedding", "layer_norm",
    "linear", "log_softmax", "matmul", "mean", "mul", "no_grad", "precision", "relu",
    "reshape", "selu", "sigmoid", "sinusoidal_positions", "softmax", "softmax_np", "sum_",
    "swapaxes", "take_rows",
]
