"""Training step, evaluation over a fixed cache, and the run loop.

Frequency noise is resampled per forward pass during training (stream keyed
by the training seed and step) and frozen per evaluation episode (stream
keyed by the evaluation seed and episode index), so evaluation numbers are
identical no matter when or how often they are computed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..diffengine import ParamStore, Tape, adam_step
from ..rng import TAG_FREQ_NOISE, TAG_RFF, substream
from ..spectral import SpectralBranchConfig
from ..tasks import Episode, EvalCache, TaskConfig, sample_batch
from .model import ModelConfig, PreparedBatch, RespNetConfig, constants_of, forward, prepare_batch


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 5e-4
    lr_schedule: str = "cosine"  # "cosine" | "constant"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float = 0.5


def lr_at(opt: OptimConfig, step: int, total_steps: int) -> float:
    if opt.lr_schedule == "constant":
        return opt.lr
    from ..diffengine import cosine_lr

    return cosine_lr(opt.lr, step, total_steps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


def _training_noise(
    seed: int, step: int, batch_size: int, spectral_cfg: SpectralBranchConfig | None, variant: str
):
    freq_noise = None
    rff_rngs = None
    if variant == "stnp" and spectral_cfg is not None:
        rng = substream(seed, TAG_FREQ_NOISE, step)
        freq_noise = rng.standard_normal(
            (batch_size, spectral_cfg.Q, spectral_cfg.D0, spectral_cfg.d_p)
        )
    if variant == "rff":
        rff_rngs = [substream(seed, TAG_RFF, step * batch_size + i) for i in range(batch_size)]
    return freq_noise, rff_rngs


def _eval_noise(
    eval_seed: int,
    first_index: int,
    batch_size: int,
    spectral_cfg: SpectralBranchConfig | None,
    variant: str,
):
    freq_noise = None
    rff_rngs = None
    if variant == "stnp" and spectral_cfg is not None:
        freq_noise = np.stack(
            [
                substream(eval_seed, TAG_FREQ_NOISE, first_index + i).standard_normal(
                    (spectral_cfg.Q, spectral_cfg.D0, spectral_cfg.d_p)
                )
                for i in range(batch_size)
            ]
        )
    if variant == "rff":
        rff_rngs = [substream(eval_seed, TAG_RFF, first_index + i) for i in range(batch_size)]
    return freq_noise, rff_rngs


def train_step(
    store: ParamStore,
    episodes: list[Episode],
    cfg: ModelConfig,
    spectral_cfg: SpectralBranchConfig | None,
    respnet_cfg: RespNetConfig,
    opt: OptimConfig,
    lr: float,
    seed: int,
    step: int,
) -> dict:
    """One forward/backward/AdamW update on the batch mean loss."""
    freq_noise, rff_rngs = _training_noise(seed, step, len(episodes), spectral_cfg, cfg.variant)
    batch = prepare_batch(episodes, cfg, spectral_cfg, freq_noise=freq_noise, rff_rngs=rff_rngs)
    tape = Tape()
    leaves = store.tensors(tape)
    result = forward(leaves, batch, cfg, spectral_cfg, respnet_cfg)
    tape.backward(result.loss)
    grads = ParamStore.gradients(leaves)
    grad_norm = clip_gradients(grads, opt.clip_norm)
    if lr > 0:
        adam_step(
            store,
            grads,
            lr,
            beta1=opt.beta1,
            beta2=opt.beta2,
            eps_opt=opt.eps_opt,
            weight_decay=opt.weight_decay,
        )
    return {"loss": float(result.loss.data), "grad_norm": grad_norm}


@dataclass
class EvalMetrics:
    mean_log_likelihood: float
    rmse: float
    per_episode_ll: np.ndarray
    per_episode_rmse: np.ndarray


def _eval_batch(args) -> tuple[np.ndarray, np.ndarray]:
    params, episodes, cfg, spectral_cfg, respnet_cfg, eval_seed, first_index = args
    freq_noise, rff_rngs = _eval_noise(
        eval_seed, first_index, len(episodes), spectral_cfg, cfg.variant
    )
    batch = prepare_batch(episodes, cfg, spectral_cfg, freq_noise=freq_noise, rff_rngs=rff_rngs)
    res = forward(params, batch, cfg, spectral_cfg, respnet_cfg)
    ll = -res.per_episode_nll.data
    err = (res.mu.data - batch.y_true) ** 2 * batch.target_mask[:, :, None]
    counts = np.maximum(batch.n_target, 1) * batch.y_true.shape[2]
    rmse = np.sqrt(err.sum(axis=(1, 2)) / counts)
    return ll, rmse


def evaluate(
    store: ParamStore,
    cache: EvalCache,
    cfg: ModelConfig,
    spectral_cfg: SpectralBranchConfig | None,
    respnet_cfg: RespNetConfig,
    eval_seed: int,
    threads: int = 1,
) -> EvalMetrics:
    """Deterministic metrics over the fixed cache (frozen per-episode noise).

    Batches are independent, so they may fan out across threads; results are
    reassembled in batch order and identical for any thread count.
    """
    params = constants_of(store)
    jobs = [
        (params, list(batch), cfg, spectral_cfg, respnet_cfg, eval_seed, b * cache.batch_size)
        for b, batch in enumerate(cache.batches)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_eval_batch, jobs))
    else:
        results = [_eval_batch(job) for job in jobs]
    ll = np.concatenate([r[0] for r in results])
    rmse = np.concatenate([r[1] for r in results])
    return EvalMetrics(
        mean_log_likelihood=float(ll.mean()),
        rmse=float(rmse.mean()),
        per_episode_ll=ll,
        per_episode_rmse=rmse,
    )


def run_training(
    store: ParamStore,
    task_cfg: TaskConfig,
    cfg: ModelConfig,
    spectral_cfg: SpectralBranchConfig | None,
    respnet_cfg: RespNetConfig,
    opt: OptimConfig,
    steps: int,
    batch_size: int,
    seed: int,
    log_every: int = 100,
    on_log=None,
) -> list[dict]:
    """Online episodic training: a fresh batch of tasks every step."""
    history = []
    for step in range(steps):
        episodes = sample_batch(task_cfg, seed, step * batch_size, batch_size)
        lr = lr_at(opt, step, steps)
        metrics = train_step(
            store, episodes, cfg, spectral_cfg, respnet_cfg, opt, lr, seed, step
        )
        if log_every and (step % log_every == 0 or step == steps - 1):
            row = {"step": step, "loss": metrics["loss"], "lr": lr}
            history.append(row)
            if on_log is not None:
                on_log(row)
    return history
