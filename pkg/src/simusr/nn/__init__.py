from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .model import ModelConfig, init_params, model_forward, param_count, param_shapes
from .ops import add, conv2d, l1_loss, pixel_shuffle, relu, upsample2d
from .optim import adam_step, init_moments
from .tensor import Tensor, as_tensor, counters, reset_counters

__all__ = [
    "Checkpoint",
    "ModelConfig",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "conv2d",
    "counters",
    "init_moments",
    "init_params",
    "l1_loss",
    "load_checkpoint",
    "model_forward",
    "param_count",
    "param_shapes",
    "pixel_shuffle",
    "relu",
    "reset_counters",
    "save_checkpoint",
    "upsample2d",
]
