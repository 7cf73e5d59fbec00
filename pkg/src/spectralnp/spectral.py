"""Context-conditioned spectral-mixture inference and spectral features.

The pipeline has four stages, all pure functions of their inputs:

1. ``empirical_spectrum`` projects centred context responses onto a fixed
   cosine/sine frequency grid and turns stabilised energies into a discrete
   probability over grid frequencies.
2. ``responsibilities`` soft-assigns each grid frequency to one of Q latent
   components with a small convolutional (or per-frequency MLP) network that
   reads a per-frequency summary sequence.
3. ``compress`` collapses the discrete spectrum into a Q-component Gaussian
   mixture by responsibility-weighted moment matching, with optional
   component phases from a weighted circular mean.
4. ``sample_frequencies`` + ``spectral_features`` draw reparameterised
   frequencies and evaluate scaled cosine/sine features, whose inner product
   is an unbiased estimate of the induced spectral-mixture kernel.

All context reductions run in a canonical sorted order, so any permutation
of the context set produces bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

TWO_PI = 2.0 * np.pi

DEFAULT_EPS = 1e-6
DEFAULT_SIGMA_MIN = 1e-3
DEFAULT_W_FLOOR = 1e-8


# ---------------------------------------------------------------------------
# frequency grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyGrid:
    """Fixed grid of angular-frequency vectors (radians per input unit)."""

    omegas: np.ndarray  # (K, d_p)
    spacing: str  # "logarithmic" | "linear"
    period_min: float
    period_max: float
    omega_max_norm: float
    axis_values: tuple = field(default_factory=tuple)  # per-axis 1-d arrays

    @property
    def K(self) -> int:
        return self.omegas.shape[0]

    @property
    def d_p(self) -> int:
        return self.omegas.shape[1]

    def grid_step_ratio(self) -> float:
        """Multiplicative step between adjacent per-axis frequencies (log grids)."""
        ax = self.axis_values[0]
        return float(ax[1] / ax[0])


def _axis_frequencies(period_min: float, period_max: float, n: int, spacing: str) -> np.ndarray:
    lo = TWO_PI / period_max
    hi = TWO_PI / period_min
    if spacing == "logarithmic":
        vals = np.exp(np.linspace(np.log(lo), np.log(hi), n))
    elif spacing == "linear":
        vals = np.linspace(lo, hi, n)
    else:
        raise ConfigError(f"unknown grid spacing: {spacing!r}")
    # pin the endpoints exactly; interior points keep the spacing law
    vals[0] = lo
    vals[-1] = hi
    return vals


def build_frequency_grid(
    period_min: float,
    period_max: float,
    K: int,
    spacing: str = "logarithmic",
    d_p: int = 1,
) -> FrequencyGrid:
    """Grid on [2*pi/period_max, 2*pi/period_min]; tensor product for d_p > 1."""
    if period_min <= 0 or period_max <= 0:
        raise ConfigError(f"periods must be positive, got ({period_min}, {period_max})")
    if period_min >= period_max:
        raise ConfigError(f"period_min must be < period_max, got ({period_min}, {period_max})")
    if K < 2:
        raise ConfigError(f"need at least 2 grid frequencies, got K={K}")
    if d_p < 1:
        raise ConfigError(f"d_p must be >= 1, got {d_p}")

    if d_p == 1:
        ax = _axis_frequencies(period_min, period_max, K, spacing)
        omegas = ax[:, None]
        axes = (ax,)
    else:
        m = int(np.floor(K ** (1.0 / d_p)))
        while (m + 1) ** d_p <= K:  # guard float-power truncation
            m += 1
        if m < 2:
            raise ConfigError(f"K={K} too small for a {d_p}-dimensional tensor-product grid")
        ax = _axis_frequencies(period_min, period_max, m, spacing)
        mesh = np.meshgrid(*([ax] * d_p), indexing="ij")
        omegas = np.stack([g.reshape(-1) for g in mesh], axis=-1)
        axes = tuple([ax] * d_p)

    return FrequencyGrid(
        omegas=omegas,
        spacing=spacing,
        period_min=float(period_min),
        period_max=float(period_max),
        omega_max_norm=float(np.max(np.linalg.norm(omegas, axis=1))),
        axis_values=axes,
    )


# ---------------------------------------------------------------------------
# branch configuration and channel modes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarChannel:
    """Use the single output channel directly (requires d_y == 1)."""


@dataclass(frozen=True)
class ProjectedChannel:
    """Project centred responses onto a unit vector u in output space."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        if abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise ConfigError("projection vector u must have unit L2 norm")
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class SharedChannels:
    """One shared spectrum aggregating energy over the selected channels."""

    channels: tuple

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) == 0:
            raise ConfigError("shared channel set must be non-empty")


@dataclass(frozen=True)
class ChannelwiseBranches:
    """Independent scalar branch per selected channel; features concatenate."""

    branches: tuple  # of (channel index, SpectralBranchConfig)


@dataclass(frozen=True)
class SpectralBranchConfig:
    grid: FrequencyGrid
    Q: int
    D0: int
    coord_subset: tuple = (0,)
    channel_mode: object = ScalarChannel()
    eps: float = DEFAULT_EPS
    sigma_min: float = DEFAULT_SIGMA_MIN
    w_floor: float = DEFAULT_W_FLOOR
    phase_enabled: bool = False
    isotropic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coord_subset", tuple(int(i) for i in self.coord_subset))
        if self.Q * self.D0 < 1:
            raise ConfigError("Q*D0 must be >= 1")
        if self.eps <= 0:
            raise ConfigError("eps stabiliser must be positive")
        if self.sigma_min <= 0:
            raise ConfigError("sigma_min must be positive")
        if len(self.coord_subset) != self.grid.d_p:
            raise ConfigError(
                f"coord subset size {len(self.coord_subset)} != grid dimension {self.grid.d_p}"
            )

    @property
    def d_p(self) -> int:
        return len(self.coord_subset)

    @property
    def K(self) -> int:
        return self.grid.K

    def summary_width(self) -> int:
        if isinstance(self.channel_mode, SharedChannels):
            return 1 + 2 * len(self.channel_mode.channels) + self.d_p
        return 3 + self.d_p


# ---------------------------------------------------------------------------
# step 1: empirical spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalSpectrum:
    a: np.ndarray  # (K,)
    b: np.ndarray  # (K,)
    E: np.ndarray  # (K,) stabilised energies, strictly positive
    p: np.ndarray  # (K,) on the simplex
    # shared-channel mode keeps the per-channel statistics as well
    a_by_channel: np.ndarray | None = None  # (K, |A|)
    b_by_channel: np.ndarray | None = None
    E_by_channel: np.ndarray | None = None


def canonical_context_order(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Permutation sorting context rows by (x columns, then y columns).

    Fixing the reduction order this way makes every context statistic
    bit-identical under permutations of the context set.
    """
    keys = [ys[:, j] for j in range(ys.shape[1] - 1, -1, -1)]
    keys += [xs[:, j] for j in range(xs.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _as_2d(arr, name):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    return arr


def empirical_spectrum(xs, ys, cfg: SpectralBranchConfig) -> EmpiricalSpectrum:
    """Cosine/sine projections of centred context responses onto the grid.

    Empty or constant-response contexts degrade gracefully: a = b = 0,
    E_k = eps and p uniform, so callers never special-case them.
    """
    xs = _as_2d(xs, "xs")
    ys = _as_2d(ys, "ys")
    if xs.shape[0] != ys.shape[0]:
        raise DataError(f"xs/ys length mismatch: {xs.shape[0]} vs {ys.shape[0]}")
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise DataError("context contains NaN or Inf")
    if cfg.coord_subset and max(cfg.coord_subset) >= xs.shape[1]:
        raise ConfigError(f"coord subset {cfg.coord_subset} out of range for d_x={xs.shape[1]}")

    mode = cfg.channel_mode
    K = cfg.K
    M = xs.shape[0]

    if isinstance(mode, ChannelwiseBranches):
        raise ConfigError("channelwise mode: build one spectrum per branch (see aggregate_channelwise)")
    if isinstance(mode, ScalarChannel) and ys.shape[1] != 1:
        raise ConfigError(f"scalar channel mode needs d_y=1, got d_y={ys.shape[1]}")
    if isinstance(mode, ProjectedChannel) and mode.u.shape[0] != ys.shape[1]:
        raise ConfigError(f"projection vector has dim {mode.u.shape[0]}, data d_y={ys.shape[1]}")
    if isinstance(mode, SharedChannels) and max(mode.channels) >= ys.shape[1]:
        raise ConfigError(f"shared channel set {mode.channels} out of range for d_y={ys.shape[1]}")

    if M == 0:
        if isinstance(mode, SharedChannels):
            nc = len(mode.channels)
            E_c = np.full((K, nc), cfg.eps)
            E = E_c.sum(axis=1)
            return EmpiricalSpectrum(
                a=np.zeros(K), b=np.zeros(K), E=E, p=np.full(K, 1.0 / K),
                a_by_channel=np.zeros((K, nc)), b_by_channel=np.zeros((K, nc)), E_by_channel=E_c,
            )
        return EmpiricalSpectrum(
            a=np.zeros(K), b=np.zeros(K), E=np.full(K, cfg.eps), p=np.full(K, 1.0 / K)
        )

    order = canonical_context_order(xs, ys)
    xs = xs[order]
    ys = ys[order]
    xp = xs[:, list(cfg.coord_subset)]  # (M, d_p)
    angles = xp @ cfg.grid.omegas.T  # (M, K)
    cosA = np.cos(angles)
    sinA = np.sin(angles)
    ybar = ys.mean(axis=0)
    centred = ys - ybar

    if isinstance(mode, SharedChannels):
        yc = centred[:, list(mode.channels)]  # (M, |A|)
        a_c = cosA.T @ yc / M  # (K, |A|)
        b_c = sinA.T @ yc / M
        E_c = a_c**2 + b_c**2 + cfg.eps
        E = E_c.sum(axis=1)
        p = E / E.sum()
        return EmpiricalSpectrum(
            a=a_c.sum(axis=1), b=b_c.sum(axis=1), E=E, p=p,
            a_by_channel=a_c, b_by_channel=b_c, E_by_channel=E_c,
        )

    if isinstance(mode, ProjectedChannel):
        resp = centred @ mode.u
    else:
        resp = centred[:, 0]

    a = cosA.T @ resp / M
    b = sinA.T @ resp / M
    E = a**2 + b**2 + cfg.eps
    p = E / E.sum()
    return EmpiricalSpectrum(a=a, b=b, E=E, p=p)


# ---------------------------------------------------------------------------
# step 2: summary sequence and responsibilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SummarySequence:
    S: np.ndarray  # (K, C_in)


def spectral_summary(spec: EmpiricalSpectrum, grid: FrequencyGrid) -> SummarySequence:
    """Per-frequency rows [log E, a/sqrt(E), b/sqrt(E), omega/omega_max].

    Shared-channel spectra emit [log E, {a_c/sqrt(E), b_c/sqrt(E)}_c, omega/omega_max].
    """
    if spec.E.shape[0] != grid.K:
        raise ConfigError(f"spectrum length {spec.E.shape[0]} != grid K {grid.K}")
    wnorm = grid.omegas / grid.omega_max_norm  # (K, d_p)
    root_E = np.sqrt(spec.E)
    if spec.E_by_channel is not None:
        pairs = np.empty((grid.K, 2 * spec.a_by_channel.shape[1]))
        pairs[:, 0::2] = spec.a_by_channel / root_E[:, None]
        pairs[:, 1::2] = spec.b_by_channel / root_E[:, None]
        S = np.column_stack([np.log(spec.E), pairs, wnorm])
    else:
        S = np.column_stack([np.log(spec.E), spec.a / root_E, spec.b / root_E, wnorm])
    return SummarySequence(S=S)


@dataclass(frozen=True)
class RespNetParams:
    """Convolution stack along the frequency axis producing component logits.

    ``layers`` holds (weights, bias) with weights (C_out, C_in, kappa).  The
    "ffn" variant is the same per-frequency MLP expressed as kernel-size-1
    convolutions.  The final layer always has kernel size 1 and Q outputs.
    """

    layers: tuple  # of (np.ndarray (C_out, C_in, kappa), np.ndarray (C_out,))
    variant: str = "cnn"

    def __post_init__(self):
        if self.variant not in ("cnn", "ffn"):
            raise ConfigError(f"unknown responsibility-net variant: {self.variant!r}")
        prev = None
        for w, b in self.layers:
            if w.ndim != 3 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ConfigError("responsibility-net layer shapes inconsistent")
            if prev is not None and w.shape[1] != prev:
                raise ConfigError("responsibility-net channel chain inconsistent")
            prev = w.shape[0]

    @property
    def Q(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def c_in(self) -> int:
        return self.layers[0][0].shape[1]

    @staticmethod
    def create(
        rng: np.random.Generator,
        c_in: int,
        Q: int,
        channels: int = 64,
        n_layers: int = 3,
        kernel_size: int = 5,
        variant: str = "cnn",
    ) -> "RespNetParams":
        """Uniform +-1/sqrt(fan_in) weights, zero biases."""
        kappa = kernel_size if variant == "cnn" else 1
        widths = [c_in] + [channels] * (n_layers - 1)
        layers = []
        for i in range(n_layers - 1):
            fan_in = widths[i] * kappa
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(widths[i + 1], widths[i], kappa))
            layers.append((w, np.zeros(widths[i + 1])))
        bound = 1.0 / np.sqrt(widths[-1])
        layers.append((rng.uniform(-bound, bound, size=(Q, widths[-1], 1)), np.zeros(Q)))
        return RespNetParams(layers=tuple(layers), variant=variant)


@dataclass(frozen=True)
class ResponsibilityMatrix:
    r: np.ndarray  # (Q, K), columns on the simplex
    logits: np.ndarray  # (Q, K)


def conv1d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross-correlation along axis 0 with zero "same" padding.

    x: (K, C_in), w: (C_out, C_in, kappa), b: (C_out,) -> (K, C_out).
    """
    K = x.shape[0]
    kappa = w.shape[2]
    pad = kappa // 2
    xp = np.zeros((K + kappa - 1, x.shape[1]))
    xp[pad : pad + K] = x
    out = np.tile(b, (K, 1))
    for t in range(kappa):
        out += xp[t : t + K] @ w[:, :, t].T
    return out


def responsibilities(params: RespNetParams, summary: SummarySequence) -> ResponsibilityMatrix:
    """Run the responsibility network and softmax over components per frequency."""
    if summary.S.shape[1] != params.c_in:
        raise ConfigError(
            f"summary width {summary.S.shape[1]} != responsibility-net input {params.c_in}"
        )
    h = summary.S
    n = len(params.layers)
    for i, (w, b) in enumerate(params.layers):
        h = conv1d_same(h, w, b)
        if i < n - 1:
            h = np.maximum(h, 0.0)
    logits = h.T  # (Q, K)
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    r = e / e.sum(axis=0, keepdims=True)
    return ResponsibilityMatrix(r=r, logits=logits)


# ---------------------------------------------------------------------------
# step 3: compression to a Gaussian mixture (+ optional phases)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralMixture:
    """Amortised mixture over frequencies: weights, means, diagonal variances, phases."""

    w: np.ndarray  # (Q,), simplex with floor
    mu: np.ndarray  # (Q, d_p)
    sigma2: np.ndarray  # (Q, d_p), floored at sigma_min^2
    phi: np.ndarray  # (Q,), zeros when phases disabled

    @property
    def Q(self) -> int:
        return self.w.shape[0]

    @property
    def d_p(self) -> int:
        return self.mu.shape[1]


def compress(
    spec: EmpiricalSpectrum,
    resp: ResponsibilityMatrix,
    grid: FrequencyGrid,
    cfg: SpectralBranchConfig,
) -> SpectralMixture:
    """Responsibility-weighted moments of the discrete spectrum, per component.

    Weight, mean and variance divisions share a floored denominator so dead
    components cannot produce NaN; weights are floored and renormalised.
    """
    r = resp.r
    p = spec.p
    rp = r * p  # (Q, K)
    w_raw = rp.sum(axis=1)
    denom = np.maximum(w_raw, cfg.w_floor)
    mu = rp @ grid.omegas / denom[:, None]  # (Q, d_p)
    centred = grid.omegas[None, :, :] - mu[:, None, :]  # (Q, K, d_p)
    var = np.einsum("qk,qkd->qd", rp, centred**2) / denom[:, None]
    if cfg.isotropic:
        var = np.repeat(var.mean(axis=1, keepdims=True), grid.d_p, axis=1)
    var = np.maximum(var, cfg.sigma_min**2)
    w = np.maximum(w_raw, cfg.w_floor)
    w = w / w.sum()

    phi = np.zeros(w.shape[0])
    if cfg.phase_enabled and not isinstance(cfg.channel_mode, SharedChannels):
        phi = estimate_phases(spec, resp, denom)
    return SpectralMixture(w=w, mu=mu, sigma2=var, phi=phi)


def estimate_phases(
    spec: EmpiricalSpectrum, resp: ResponsibilityMatrix, denom: np.ndarray
) -> np.ndarray:
    """Component phases as the argument of a weighted circular mean.

    u_k = (a_k + i b_k)/sqrt(E_k), weighted by the per-component posterior
    over grid frequencies; arg(0) is defined as 0.  A shared-channel energy
    has no single complex direction, so those branches keep phi = 0.
    """
    u = (spec.a + 1j * spec.b) / np.sqrt(spec.E)
    posterior = (resp.r * spec.p) / denom[:, None]  # (Q, K)
    z = posterior @ u
    phi = np.angle(z)
    return np.where(phi <= -np.pi, phi + TWO_PI, phi)


# ---------------------------------------------------------------------------
# step 4: sampling and features
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampledFrequencies:
    omega: np.ndarray  # (Q, D0, d_p)
    noise: np.ndarray  # (Q, D0, d_p) standard-normal draws, kept for gradients/tests

    @property
    def D0(self) -> int:
        return self.omega.shape[1]


def sample_frequencies(
    mix: SpectralMixture, D0: int, rng: np.random.Generator
) -> SampledFrequencies:
    """Reparameterised draws omega = mu + sigma * eps; eps retained.

    Draws are not clipped: negative frequencies are legal inputs to the
    cosine/sine features.
    """
    if D0 < 1:
        raise ConfigError(f"D0 must be >= 1, got {D0}")
    noise = rng.standard_normal((mix.Q, D0, mix.d_p))
    omega = mix.mu[:, None, :] + np.sqrt(mix.sigma2)[:, None, :] * noise
    return SampledFrequencies(omega=omega, noise=noise)


def frequencies_from_noise(mix: SpectralMixture, noise: np.ndarray) -> SampledFrequencies:
    """Deterministic variant of sample_frequencies for pre-drawn noise."""
    omega = mix.mu[:, None, :] + np.sqrt(mix.sigma2)[:, None, :] * noise
    return SampledFrequencies(omega=omega, noise=np.asarray(noise, dtype=np.float64))


def spectral_features(
    x,
    freqs: SampledFrequencies,
    w: np.ndarray,
    phi: np.ndarray,
    coord_subset: tuple = (0,),
) -> np.ndarray:
    """Feature vector in R^{2 Q D0}: blocks sqrt(w_q/D0) [cos, sin](omega.x - phi).

    Block order is component-major, draw-minor, cosine before sine, so the
    layout matches the block-diagonal rotation operator used by the
    equivariance property.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    xp = x[list(coord_subset)]
    Q, D0, _ = freqs.omega.shape
    angles = freqs.omega @ xp - phi[:, None]  # (Q, D0)
    scale = np.sqrt(w / D0)[:, None]
    feat = np.empty((Q, D0, 2))
    feat[:, :, 0] = scale * np.cos(angles)
    feat[:, :, 1] = scale * np.sin(angles)
    return feat.reshape(-1)


# ---------------------------------------------------------------------------
# full aggregator
# ---------------------------------------------------------------------------


def aggregate(
    xs,
    ys,
    cfg: SpectralBranchConfig,
    net: RespNetParams,
    rng: np.random.Generator,
) -> tuple[SpectralMixture, SampledFrequencies]:
    """Context set -> (mixture parameters, sampled frequencies)."""
    spec = empirical_spectrum(xs, ys, cfg)
    summary = spectral_summary(spec, cfg.grid)
    resp = responsibilities(net, summary)
    mix = compress(spec, resp, cfg.grid, cfg)
    freqs = sample_frequencies(mix, cfg.D0, rng)
    return mix, freqs


def aggregate_channelwise(
    xs,
    ys,
    mode: ChannelwiseBranches,
    nets: dict,
    rng: np.random.Generator,
) -> list:
    """Run one scalar branch per selected channel; results in branch order."""
    ys = _as_2d(ys, "ys")
    results = []
    for channel, sub_cfg in mode.branches:
        mix, freqs = aggregate(xs, ys[:, [channel]], sub_cfg, nets[channel], rng)
        results.append((channel, sub_cfg, mix, freqs))
    return results


def channelwise_features(x, results) -> np.ndarray:
    """Concatenate per-branch features in selected-channel order."""
    parts = [
        spectral_features(x, freqs, mix.w, mix.phi, sub_cfg.coord_subset)
        for _, sub_cfg, mix, freqs in results
    ]
    return np.concatenate(parts)
