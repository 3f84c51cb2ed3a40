"""Minimal tensor layer library: exactly the ops the classifier needs.

Hand-written forward/backward passes over numpy arrays, a stabilized
cross-entropy, Adam, and a small binary format for trained parameters.
Training runs in float64; call ``cast_layers`` for a float32 inference copy.
"""

from .layers import (
    AvgPool2d,
    BatchNorm2d,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    LayerSpec,
    MaxPool2d,
    ReLU,
    Residual,
    Softmax,
    cast_layers,
    flatten_layers,
    run_backward,
    run_forward,
)
from .loss import cross_entropy, softmax
from .optim import AdamState, adam_step
from .serialize import MODEL_MAGIC, load_params, save_params

__all__ = [
    "AvgPool2d",
    "BatchNorm2d",
    "Conv2d",
    "Dense",
    "Dropout",
    "Flatten",
    "LayerSpec",
    "MaxPool2d",
    "ReLU",
    "Residual",
    "Softmax",
    "cast_layers",
    "flatten_layers",
    "run_backward",
    "run_forward",
    "cross_entropy",
    "softmax",
    "AdamState",
    "adam_step",
    "MODEL_MAGIC",
    "load_params",
    "save_params",
]
