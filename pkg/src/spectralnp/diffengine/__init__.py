"""Minimal reverse-mode differentiation engine (float64, tape-based)."""

from .optim import ParamStore, adam_step, cosine_lr
from .tensor import (
    Tape,
    Tensor,
    add,
    atan2,
    broadcast_to,
    clip_min,
    concat,
    constant,
    cos,
    div,
    exp,
    layernorm,
    log,
    masked_fill,
    matmul,
    mul,
    relu,
    reshape,
    sin,
    softmax,
    softplus,
    sqrt,
    square,
    stack_last,
    sub,
    take_slice,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "Tape",
    "Tensor",
    "ParamStore",
    "adam_step",
    "cosine_lr",
    "add",
    "sub",
    "mul",
    "div",
    "matmul",
    "tsum",
    "tmean",
    "broadcast_to",
    "concat",
    "reshape",
    "transpose",
    "take_slice",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "square",
    "relu",
    "clip_min",
    "softplus",
    "atan2",
    "softmax",
    "layernorm",
    "masked_fill",
    "stack_last",
    "constant",
]
