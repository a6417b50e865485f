"""Minimal differentiable 1D building blocks on numpy."""
from .gradcheck import GradCheckReport, grad_check, rel_error
from .layers import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    LeakyReLU,
    Linear,
    PReLU,
    Sigmoid,
    Tanh,
    activation,
    concat_channels,
    conv1d_backward,
    conv1d_forward,
    conv_out_len,
    split_channels,
    tconv1d_backward,
    tconv1d_forward,
    tconv_out_len,
)
from .optim import ReduceLROnPlateau, adam_step
from .params import Param, ParamStore

__all__ = [
    "BatchNorm1d", "Conv1d", "ConvTranspose1d", "GradCheckReport", "LeakyReLU", "Linear",
    "PReLU", "Param", "ParamStore", "ReduceLROnPlateau", "Sigmoid", "Tanh", "activation",
    "adam_step", "concat_channels", "conv1d_backward", "conv1d_forward", "conv_out_len",
    "grad_check", "rel_error", "split_channels", "tconv1d_backward", "tconv1d_forward",
    "tconv_out_len",
]
