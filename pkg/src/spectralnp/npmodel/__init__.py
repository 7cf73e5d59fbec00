"""Transformer neural-process backbone, embedding variants, training."""

from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    ModelConfig,
    PredictiveGaussian,
    PreparedBatch,
    RespNetConfig,
    TokenSequence,
    VARIANTS,
    constants_of,
    embed_batch,
    forward,
    init_params,
    nll_loss,
    predict,
    prepare_batch,
    tnp_forward,
    tokenize,
    variant_feature_width,
)
from .training import (
    EvalMetrics,
    OptimConfig,
    clip_gradients,
    evaluate,
    lr_at,
    run_training,
    train_step,
)

__all__ = [
    "ModelConfig",
    "RespNetConfig",
    "TokenSequence",
    "PredictiveGaussian",
    "PreparedBatch",
    "VARIANTS",
    "tokenize",
    "init_params",
    "prepare_batch",
    "embed_batch",
    "tnp_forward",
    "forward",
    "predict",
    "nll_loss",
    "constants_of",
    "variant_feature_width",
    "OptimConfig",
    "EvalMetrics",
    "train_step",
    "evaluate",
    "run_training",
    "clip_gradients",
    "lr_at",
    "save_checkpoint",
    "load_checkpoint",
]
