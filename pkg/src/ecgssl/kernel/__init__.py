"""Minimal differentiable-layer engine (numpy, CPU, fixed architectures)."""

from .layers import (
    Param,
    conv1d,
    conv1d_backward,
    dense,
    dense_backward,
    dropout,
    dropout_backward,
    global_maxpool,
    global_maxpool_backward,
    maxpool1d,
    maxpool1d_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
)
from .losses import (
    bce_loss,
    bce_loss_backward,
    cross_entropy,
    cross_entropy_backward,
    l2_penalty,
    l2_penalty_grad,
    multitask_loss,
)
from .optim import AdamState, adam_step

__all__ = [
    "Param", "conv1d", "conv1d_backward", "dense", "dense_backward",
    "dropout", "dropout_backward", "global_maxpool", "global_maxpool_backward",
    "maxpool1d", "maxpool1d_backward", "relu", "relu_backward",
    "sigmoid", "sigmoid_backward",
    "bce_loss", "bce_loss_backward", "cross_entropy", "cross_entropy_backward",
    "l2_penalty", "l2_penalty_grad", "multitask_loss",
    "AdamState", "adam_step",
]
