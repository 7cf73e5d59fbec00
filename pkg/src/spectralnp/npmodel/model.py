"""Transformer neural-process backbone with interchangeable embeddings.

The forward pass runs over a padded batch of episodes on the diffengine
tape, so one code path serves training (gradients), evaluation (constants)
and the property suites (B = 1).  Context tokens are canonically sorted
before tokenisation, which makes every context statistic permutation-stable.

Embedding variants:

* ``stnp``      spectral-mixture features inferred from the context set,
                concatenated with the time-domain MLP branch;
* ``plain_tnp`` the MLP branch alone (degenerate concatenation);
* ``fan``       trainable but context-independent sinusoidal projection;
* ``disc``      the discrete context spectrum used directly, sqrt(p_k)-scaled;
* ``rff``       Monte-Carlo frequency draws from the discrete spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import diffengine as de
from ..diffengine import ParamStore, Tape, Tensor
from ..errors import ConfigError
from ..rng import TAG_INIT, substream
from ..spectral import (
    SharedChannels,
    SpectralBranchConfig,
    canonical_context_order,
    empirical_spectrum,
    spectral_summary,
)
from ..tasks import Episode

VARIANTS = ("stnp", "plain_tnp", "fan", "disc", "rff")

NEG_FILL = -1e30  # pre-softmax fill for masked attention logits
LN_EPS = 1e-5


@dataclass(frozen=True)
class RespNetConfig:
    channels: int = 64
    n_layers: int = 3
    kernel_size: int = 5
    variant: str = "cnn"  # "cnn" | "ffn"

    def __post_init__(self):
        if self.variant not in ("cnn", "ffn"):
            raise ConfigError(f"unknown responsibility-net variant: {self.variant!r}")
        if self.n_layers < 2:
            raise ConfigError("responsibility net needs at least 2 layers (body + head)")

    @property
    def kappa(self) -> int:
        return self.kernel_size if self.variant == "cnn" else 1


@dataclass(frozen=True)
class ModelConfig:
    d_x: int = 1
    d_y: int = 1
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 2
    ffn_width: int = 64
    mlp_hidden: int = 64
    mlp_width: int = 64
    variant: str = "stnp"
    m_rff: int = 48
    sigma_out_min: float = 1e-3
    head_hidden: int = 64
    context_self_only: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown embedding variant: {self.variant!r}")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")


@dataclass(frozen=True)
class TokenSequence:
    """Per-token (x, y-tilde, is_context); context tokens stored first."""

    x: np.ndarray  # (N, d_x)
    y_tilde: np.ndarray  # (N, d_y), zeros at targets
    is_context: np.ndarray  # (N,) bool


@dataclass(frozen=True)
class PredictiveGaussian:
    mu: np.ndarray  # (n_targets, d_y)
    sigma: np.ndarray  # (n_targets, d_y), >= sigma_out_min


def tokenize(ep: Episode) -> TokenSequence:
    """Context pairs followed by target queries with zeroed responses."""
    x = np.concatenate([ep.xs_context, ep.xs_target], axis=0)
    y = np.concatenate([ep.ys_context, np.zeros_like(ep.ys_target)], axis=0)
    flags = np.zeros(x.shape[0], dtype=bool)
    flags[: ep.n_context] = True
    return TokenSequence(x=x, y_tilde=y, is_context=flags)


def variant_feature_width(cfg: ModelConfig, spectral_cfg: SpectralBranchConfig | None) -> int:
    """Width of the non-MLP feature block entering the projection."""
    if cfg.variant == "plain_tnp":
        return 0
    if cfg.variant == "fan":
        need = spectral_cfg.Q * spectral_cfg.D0 if spectral_cfg is not None else cfg.m_rff
        return 2 * need
    if spectral_cfg is None:
        raise ConfigError(f"variant {cfg.variant!r} needs a spectral branch config")
    if cfg.variant == "stnp":
        return 2 * spectral_cfg.Q * spectral_cfg.D0
    if cfg.variant == "disc":
        return 2 * spectral_cfg.K
    return 2 * cfg.m_rff  # rff


def init_params(
    cfg: ModelConfig,
    spectral_cfg: SpectralBranchConfig | None,
    respnet_cfg: RespNetConfig,
    seed: int,
) -> ParamStore:
    """Uniform +-1/sqrt(fan_in) weights, zero biases, unit layernorm scales.

    Draw order is fixed by construction order, so (cfg, seed) pins every
    array bit-exactly.
    """
    rng = substream(seed, TAG_INIT, 0)
    store = ParamStore()

    def linear(name: str, fan_in: int, fan_out: int) -> None:
        bound = 1.0 / np.sqrt(fan_in)
        store.add(f"{name}/w", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        store.add(f"{name}/b", np.zeros(fan_out))

    def layer_norm(name: str, width: int) -> None:
        store.add(f"{name}/gamma", np.ones(width))
        store.add(f"{name}/beta", np.zeros(width))

    if cfg.variant == "stnp":
        if spectral_cfg is None:
            raise ConfigError("stnp variant needs a spectral branch config")
        kappa = respnet_cfg.kappa
        widths = [spectral_cfg.summary_width()] + [respnet_cfg.channels] * (respnet_cfg.n_layers - 1)
        for i in range(respnet_cfg.n_layers - 1):
            fan_in = widths[i] * kappa
            bound = 1.0 / np.sqrt(fan_in)
            store.add(
                f"respnet/conv{i}/w",
                rng.uniform(-bound, bound, size=(widths[i + 1], widths[i], kappa)),
            )
            store.add(f"respnet/conv{i}/b", np.zeros(widths[i + 1]))
        bound = 1.0 / np.sqrt(widths[-1])
        store.add("respnet/head/w", rng.uniform(-bound, bound, size=(spectral_cfg.Q, widths[-1], 1)))
        store.add("respnet/head/b", np.zeros(spectral_cfg.Q))
    elif cfg.variant == "fan":
        n_fan = variant_feature_width(cfg, spectral_cfg) // 2
        bound = 1.0 / np.sqrt(cfg.d_x)
        store.add("embed/fan/wp", rng.uniform(-bound, bound, size=(cfg.d_x, n_fan)))

    linear("embed/mlp/0", cfg.d_x + cfg.d_y, cfg.mlp_hidden)
    linear("embed/mlp/1", cfg.mlp_hidden, cfg.mlp_width)
    linear("embed/proj", variant_feature_width(cfg, spectral_cfg) + cfg.mlp_width, cfg.d_model)

    for layer in range(cfg.n_layers):
        layer_norm(f"layer{layer}/ln1", cfg.d_model)
        for piece in ("wq", "wk", "wv", "wo"):
            linear(f"layer{layer}/attn/{piece}", cfg.d_model, cfg.d_model)
        layer_norm(f"layer{layer}/ln2", cfg.d_model)
        linear(f"layer{layer}/ffn/0", cfg.d_model, cfg.ffn_width)
        linear(f"layer{layer}/ffn/1", cfg.ffn_width, cfg.d_model)

    layer_norm("final_ln", cfg.d_model)
    linear("head/0", cfg.d_model, cfg.head_hidden)
    linear("head/1", cfg.head_hidden, 2 * cfg.d_y)
    return store


# ---------------------------------------------------------------------------
# batch preparation (plain numpy; everything here is constant w.r.t. params)
# ---------------------------------------------------------------------------


@dataclass
class PreparedBatch:
    x: np.ndarray  # (B, N, d_x)
    y_tilde: np.ndarray  # (B, N, d_y)
    y_true: np.ndarray  # (B, N, d_y); real values at target rows
    context_mask: np.ndarray  # (B, N) bool
    target_mask: np.ndarray  # (B, N) bool
    n_context: np.ndarray  # (B,)
    n_target: np.ndarray  # (B,)
    allowed: np.ndarray  # (B, N, N) bool attention pattern
    has_valid: np.ndarray  # (B, N) rows with at least one attendable column
    summaries: np.ndarray | None = None  # (B, K, C_in) for stnp
    p: np.ndarray | None = None  # (B, K) for stnp/disc/rff
    spectra: list | None = None  # per-episode EmpiricalSpectrum (phase statistics)
    freq_noise: np.ndarray | None = None  # (B, Q, D0, d_p) for stnp
    rff_omegas: np.ndarray | None = None  # (B, m_rff, d_p) for rff


def prepare_batch(
    episodes: list[Episode],
    cfg: ModelConfig,
    spectral_cfg: SpectralBranchConfig | None = None,
    freq_noise: np.ndarray | None = None,
    rff_rngs: list[np.random.Generator] | None = None,
) -> PreparedBatch:
    """Pad episodes into batch tensors and precompute context spectra.

    `freq_noise` carries the reparameterisation draws for the stnp variant
    (callers control resampling vs. frozen evaluation streams); `rff_rngs`
    provides one stream per episode for categorical frequency redraws.
    """
    B = len(episodes)
    n_max = max(ep.n_context + ep.n_target for ep in episodes)
    x = np.zeros((B, n_max, cfg.d_x))
    y_tilde = np.zeros((B, n_max, cfg.d_y))
    y_true = np.zeros((B, n_max, cfg.d_y))
    context_mask = np.zeros((B, n_max), dtype=bool)
    target_mask = np.zeros((B, n_max), dtype=bool)

    for b, ep in enumerate(episodes):
        order = (
            canonical_context_order(ep.xs_context, ep.ys_context)
            if ep.n_context > 0
            else np.empty(0, dtype=int)
        )
        m, t = ep.n_context, ep.n_target
        x[b, :m] = ep.xs_context[order]
        y_tilde[b, :m] = ep.ys_context[order]
        y_true[b, :m] = ep.ys_context[order]
        x[b, m : m + t] = ep.xs_target
        y_true[b, m : m + t] = ep.ys_target
        context_mask[b, :m] = True
        target_mask[b, m : m + t] = True

    real = context_mask | target_mask
    if cfg.context_self_only:
        eye = np.eye(n_max, dtype=bool)[None]
        rows_ctx = context_mask[:, :, None] & eye
        rows_tgt = target_mask[:, :, None] & context_mask[:, None, :]
        allowed = rows_ctx | rows_tgt
    else:
        allowed = real[:, :, None] & context_mask[:, None, :]
    has_valid = allowed.any(axis=-1)

    batch = PreparedBatch(
        x=x,
        y_tilde=y_tilde,
        y_true=y_true,
        context_mask=context_mask,
        target_mask=target_mask,
        n_context=np.array([ep.n_context for ep in episodes]),
        n_target=np.array([ep.n_target for ep in episodes]),
        allowed=allowed,
        has_valid=has_valid,
    )

    if cfg.variant in ("stnp", "disc", "rff"):
        if spectral_cfg is None:
            raise ConfigError(f"variant {cfg.variant!r} needs a spectral branch config")
        K = spectral_cfg.K
        p = np.empty((B, K))
        spectra = []
        summaries = np.empty((B, K, spectral_cfg.summary_width())) if cfg.variant == "stnp" else None
        for b, ep in enumerate(episodes):
            spec = empirical_spectrum(ep.xs_context, ep.ys_context, spectral_cfg)
            spectra.append(spec)
            p[b] = spec.p
            if summaries is not None:
                summaries[b] = spectral_summary(spec, spectral_cfg.grid).S
        batch.p = p
        batch.spectra = spectra
        batch.summaries = summaries
        if cfg.variant == "stnp":
            batch.freq_noise = freq_noise
        if cfg.variant == "rff":
            if rff_rngs is None:
                raise ConfigError("rff variant needs per-episode redraw streams")
            omegas = np.empty((B, cfg.m_rff, spectral_cfg.d_p))
            for b in range(B):
                idx = rff_rngs[b].choice(K, size=cfg.m_rff, p=p[b])
                omegas[b] = spectral_cfg.grid.omegas[idx]
            batch.rff_omegas = omegas
    return batch


# ---------------------------------------------------------------------------
# tape-side building blocks
# ---------------------------------------------------------------------------


def _linear(h: Tensor, params: dict[str, Tensor], name: str) -> Tensor:
    return de.matmul(h, params[f"{name}/w"]) + params[f"{name}/b"]


def _conv_stack(
    h: Tensor, params: dict[str, Tensor], respnet_cfg: RespNetConfig, n_body: int
) -> Tensor:
    """1-D conv stack along the frequency axis with zero 'same' padding."""
    B, K, _ = h.shape
    for i in range(n_body + 1):
        last = i == n_body
        pname = "respnet/head" if last else f"respnet/conv{i}"
        w = params[f"{pname}/w"]  # (C_out, C_in, kappa)
        b = params[f"{pname}/b"]
        c_out, c_in, kappa = w.shape
        flat_w = de.reshape(de.transpose(w, (2, 1, 0)), (kappa * c_in, c_out))
        if kappa == 1:
            windows = h
        else:
            pad_l = kappa // 2
            pad_r = kappa - 1 - pad_l
            pieces = []
            if pad_l:
                pieces.append(de.constant(np.zeros((B, pad_l, c_in))))
            pieces.append(h)
            if pad_r:
                pieces.append(de.constant(np.zeros((B, pad_r, c_in))))
            padded = de.concat(pieces, axis=1)
            windows = de.concat(
                [padded[:, t : t + K, :] for t in range(kappa)], axis=2
            )  # (B, K, kappa*C_in), tap-major to match flat_w
        h = de.matmul(windows, flat_w) + b
        if not last:
            h = de.relu(h)
    return h  # (B, K, Q) logits


def spectral_branch(
    params: dict[str, Tensor],
    batch: PreparedBatch,
    spectral_cfg: SpectralBranchConfig,
    respnet_cfg: RespNetConfig,
) -> tuple[Tensor, dict]:
    """Differentiable aggregator: summaries -> mixture -> sampled features.

    Mirrors the library pipeline; gradients reach the responsibility network
    through the responsibility-weighted moments and the reparameterised
    frequency draws.
    """
    if batch.freq_noise is None:
        raise ConfigError("stnp forward needs frequency noise (training or frozen eval stream)")
    B = batch.x.shape[0]
    K, Q, D0, d_p = spectral_cfg.K, spectral_cfg.Q, spectral_cfg.D0, spectral_cfg.d_p
    omegas = spectral_cfg.grid.omegas  # (K, d_p)

    logits = _conv_stack(de.constant(batch.summaries), params, respnet_cfg, respnet_cfg.n_layers - 1)
    r = de.softmax(logits, axis=-1)  # (B, K, Q)
    p = de.constant(batch.p[:, :, None])  # (B, K, 1)
    rp = r * p
    w_raw = de.tsum(rp, axis=1)  # (B, Q)
    denom = de.reshape(de.clip_min(w_raw, spectral_cfg.w_floor), (B, Q, 1))

    rp_t = de.transpose(rp, (0, 2, 1))  # (B, Q, K)
    mu = de.matmul(rp_t, de.constant(omegas)) / denom  # (B, Q, d_p)
    centred = de.constant(omegas[None, None]) - de.reshape(mu, (B, Q, 1, d_p))
    var = de.tsum(de.reshape(rp_t, (B, Q, K, 1)) * de.square(centred), axis=2) / denom
    if spectral_cfg.isotropic:
        var = de.broadcast_to(var.mean(axis=-1, keepdims=True), (B, Q, d_p))
    var = de.clip_min(var, spectral_cfg.sigma_min**2)
    w = de.clip_min(w_raw, spectral_cfg.w_floor)
    w = w / de.tsum(w, axis=1, keepdims=True)  # (B, Q)

    if spectral_cfg.phase_enabled and not isinstance(spectral_cfg.channel_mode, SharedChannels):
        u_re = np.stack([s.a / np.sqrt(s.E) for s in batch.spectra])  # (B, K)
        u_im = np.stack([s.b / np.sqrt(s.E) for s in batch.spectra])
        z_re = de.tsum(rp * de.constant(u_re[:, :, None]), axis=1) / de.reshape(denom, (B, Q))
        z_im = de.tsum(rp * de.constant(u_im[:, :, None]), axis=1) / de.reshape(denom, (B, Q))
        phi = de.atan2(z_im, z_re)  # (B, Q)
    else:
        phi = de.constant(np.zeros((B, Q)))

    eps = de.constant(batch.freq_noise)  # (B, Q, D0, d_p)
    omega = de.reshape(mu, (B, Q, 1, d_p)) + de.reshape(de.sqrt(var), (B, Q, 1, d_p)) * eps

    def per_component_rep(t: Tensor) -> Tensor:
        # (B, Q) -> (B, 1, Q*D0), repeating each component D0 times
        return de.reshape(de.broadcast_to(de.reshape(t, (B, Q, 1)), (B, Q, D0)), (B, 1, Q * D0))

    om_t = de.transpose(de.reshape(omega, (B, Q * D0, d_p)), (0, 2, 1))  # (B, d_p, Q*D0)
    xp = de.constant(batch.x[:, :, list(spectral_cfg.coord_subset)])
    angle = de.matmul(xp, om_t) - per_component_rep(phi)  # (B, N, Q*D0)
    scale = per_component_rep(de.sqrt(w / float(D0)))
    feats = de.stack_last([de.cos(angle) * scale, de.sin(angle) * scale])
    feats = de.reshape(feats, (B, batch.x.shape[1], 2 * Q * D0))
    aux = {"w": w, "mu": mu, "sigma2": var, "phi": phi, "omega": omega, "r": r}
    return feats, aux


def _constant_sinusoid_features(x_p: np.ndarray, omegas: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """scale_j * [cos, sin](omega_j . x) interleaved, for constant frequency sets.

    x_p: (B, N, d_p), omegas: (B, J, d_p), scale: (B, J) -> (B, N, 2J).
    """
    angles = np.einsum("bnd,bjd->bnj", x_p, omegas)
    feats = np.stack(
        [scale[:, None, :] * np.cos(angles), scale[:, None, :] * np.sin(angles)], axis=-1
    )
    return feats.reshape(x_p.shape[0], x_p.shape[1], -1)


def embed_batch(
    params: dict[str, Tensor],
    batch: PreparedBatch,
    cfg: ModelConfig,
    spectral_cfg: SpectralBranchConfig | None,
    respnet_cfg: RespNetConfig,
) -> tuple[Tensor, dict]:
    """Variant feature block + MLP branch, concatenated and projected."""
    B, N = batch.x.shape[:2]
    aux: dict = {}
    parts: list[Tensor] = []

    if cfg.variant == "stnp":
        feats, aux = spectral_branch(params, batch, spectral_cfg, respnet_cfg)
        parts.append(feats)
    elif cfg.variant == "fan":
        angle = de.matmul(de.constant(batch.x), params["embed/fan/wp"])  # (B, N, n_fan)
        parts.append(de.concat([de.cos(angle), de.sin(angle)], axis=-1))
    elif cfg.variant == "disc":
        x_p = batch.x[:, :, list(spectral_cfg.coord_subset)]
        omegas = np.broadcast_to(spectral_cfg.grid.omegas[None], (B,) + spectral_cfg.grid.omegas.shape)
        parts.append(de.constant(_constant_sinusoid_features(x_p, omegas, np.sqrt(batch.p))))
    elif cfg.variant == "rff":
        x_p = batch.x[:, :, list(spectral_cfg.coord_subset)]
        scale = np.full((B, cfg.m_rff), 1.0 / np.sqrt(cfg.m_rff))
        parts.append(de.constant(_constant_sinusoid_features(x_p, batch.rff_omegas, scale)))

    token = de.constant(np.concatenate([batch.x, batch.y_tilde], axis=-1))
    h = de.relu(_linear(token, params, "embed/mlp/0"))
    parts.append(_linear(h, params, "embed/mlp/1"))

    joint = parts[0] if len(parts) == 1 else de.concat(parts, axis=-1)
    return _linear(joint, params, "embed/proj"), aux


def tnp_forward(
    params: dict[str, Tensor], e: Tensor, batch: PreparedBatch, cfg: ModelConfig
) -> Tensor:
    """Pre-layernorm masked multi-head attention encoder."""
    B, N = batch.x.shape[:2]
    dh = cfg.d_model // cfg.n_heads
    mask = ~batch.allowed[:, None, :, :]  # (B, 1, N, N), True where forbidden
    row_ok = batch.has_valid[:, :, None].astype(np.float64)

    def split_heads(t: Tensor) -> Tensor:
        return de.transpose(de.reshape(t, (B, N, cfg.n_heads, dh)), (0, 2, 1, 3))

    for layer in range(cfg.n_layers):
        pre = de.layernorm(e, params[f"layer{layer}/ln1/gamma"], params[f"layer{layer}/ln1/beta"], LN_EPS)
        q = split_heads(_linear(pre, params, f"layer{layer}/attn/wq"))
        k = split_heads(_linear(pre, params, f"layer{layer}/attn/wk"))
        v = split_heads(_linear(pre, params, f"layer{layer}/attn/wv"))
        logits = de.matmul(q, de.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
        att = de.softmax(de.masked_fill(logits, mask, NEG_FILL), axis=-1)
        mixed = de.transpose(de.matmul(att, v), (0, 2, 1, 3))
        mixed = de.reshape(mixed, (B, N, cfg.d_model)) * de.constant(row_ok)
        e = e + _linear(mixed, params, f"layer{layer}/attn/wo")

        pre = de.layernorm(e, params[f"layer{layer}/ln2/gamma"], params[f"layer{layer}/ln2/beta"], LN_EPS)
        h = de.relu(_linear(pre, params, f"layer{layer}/ffn/0"))
        e = e + _linear(h, params, f"layer{layer}/ffn/1")
    return e


@dataclass
class ForwardResult:
    loss: Tensor  # scalar: batch mean of per-episode mean NLL
    per_episode_nll: Tensor  # (B,)
    mu: Tensor  # (B, N, d_y)
    sigma: Tensor  # (B, N, d_y)
    aux: dict


def forward(
    params: dict[str, Tensor],
    batch: PreparedBatch,
    cfg: ModelConfig,
    spectral_cfg: SpectralBranchConfig | None,
    respnet_cfg: RespNetConfig,
) -> ForwardResult:
    e0, aux = embed_batch(params, batch, cfg, spectral_cfg, respnet_cfg)
    eL = tnp_forward(params, e0, batch, cfg)
    eL = de.layernorm(eL, params["final_ln/gamma"], params["final_ln/beta"], LN_EPS)
    h = de.relu(_linear(eL, params, "head/0"))
    out = _linear(h, params, "head/1")  # (B, N, 2*d_y)
    mu = out[:, :, : cfg.d_y]
    sigma = de.softplus(out[:, :, cfg.d_y :]) + cfg.sigma_out_min

    y = de.constant(batch.y_true)
    var = de.square(sigma)
    ll_term = (de.log(var * (2.0 * np.pi)) + de.square(y - mu) / var) * 0.5  # (B, N, d_y)
    tmask = de.constant(batch.target_mask[:, :, None].astype(np.float64))
    counts = de.constant(np.maximum(batch.n_target, 1) * float(batch.y_true.shape[2]))
    per_episode = de.tsum(ll_term * tmask, axis=(1, 2)) / counts  # (B,)
    loss = per_episode.mean()
    return ForwardResult(loss=loss, per_episode_nll=per_episode, mu=mu, sigma=sigma, aux=aux)


def constants_of(store: ParamStore) -> dict[str, Tensor]:
    """Parameter tensors detached from any tape (evaluation fast path)."""
    return {name: de.constant(arr) for name, arr in store.params.items()}


def predict(
    store: ParamStore,
    episode: Episode,
    cfg: ModelConfig,
    spectral_cfg: SpectralBranchConfig | None,
    respnet_cfg: RespNetConfig,
    freq_noise: np.ndarray | None = None,
    rff_rng: np.random.Generator | None = None,
) -> PredictiveGaussian:
    """Per-target diagonal Gaussian for a single episode."""
    noise = freq_noise[None] if freq_noise is not None else None
    batch = prepare_batch(
        [episode], cfg, spectral_cfg, freq_noise=noise,
        rff_rngs=[rff_rng] if rff_rng is not None else None,
    )
    res = forward(constants_of(store), batch, cfg, spectral_cfg, respnet_cfg)
    rows = batch.target_mask[0]
    return PredictiveGaussian(mu=res.mu.data[0][rows], sigma=res.sigma.data[0][rows])


def nll_loss(pred: PredictiveGaussian, ys_target: np.ndarray) -> float:
    """Mean over targets and output dims of the Gaussian negative log-density."""
    ys = np.asarray(ys_target, dtype=np.float64)
    if ys.ndim == 1:
        ys = ys[:, None]
    var = pred.sigma**2
    return float(np.mean(0.5 * (np.log(2.0 * np.pi * var) + (ys - pred.mu) ** 2 / var)))
