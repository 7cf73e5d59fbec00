"""Synthetic episode generators and CSV episode ingestion.

GP tasks draw functions from zero-mean priors with randomised
hyperparameters; the sawtooth family is a truncated Fourier series.  Every
episode is produced from its own counter-based random stream, so caches
regenerate bit-identically and batches can be built in parallel.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, IngestionError
from .kernels import KernelSpec, cholesky_factor, gram_matrix
from .rng import TAG_EPISODE, substream

N_CAP = 50
M_MAX = N_CAP - 3  # largest context size leaving room for >= 3 targets


@dataclass(frozen=True)
class Episode:
    """One meta-learning task: disjoint context and target pairs."""

    xs_context: np.ndarray  # (M, d_x)
    ys_context: np.ndarray  # (M, d_y)
    xs_target: np.ndarray  # (N - M, d_x)
    ys_target: np.ndarray  # (N - M, d_y)
    task_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("xs_context", "ys_context", "xs_target", "ys_target"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim == 1:
                arr = arr[:, None]
            if not np.isfinite(arr).all():
                raise DataError(f"{name} contains NaN or Inf")
            object.__setattr__(self, name, arr)
        if self.xs_context.shape[0] != self.ys_context.shape[0]:
            raise DataError("context xs/ys length mismatch")
        if self.xs_target.shape[0] != self.ys_target.shape[0]:
            raise DataError("target xs/ys length mismatch")

    @property
    def n_context(self) -> int:
        return self.xs_context.shape[0]

    @property
    def n_target(self) -> int:
        return self.xs_target.shape[0]


HYPER_RANGES = {
    "rbf": {"s": (0.1, 1.0), "ell": (0.1, 0.6)},
    "matern52": {"s": (0.1, 1.0), "ell": (0.1, 0.6)},
    "periodic": {"s": (0.1, 1.0), "ell": (0.6, 1.0), "period": (0.1, 0.5)},
    "sawtooth": {"freq": (3.0, 5.0), "shift": (-5.0, 5.0), "terms": (10, 20)},
}


@dataclass(frozen=True)
class TaskConfig:
    family: str = "rbf"
    x_range: tuple = (-2.0, 2.0)
    m_min: int = 3
    n_cap: int = N_CAP
    noise: float = 0.02
    hyper_ranges: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in ("rbf", "matern52", "periodic", "sawtooth", "csv_imputation"):
            raise ConfigError(f"unknown task family: {self.family!r}")
        if self.family != "csv_imputation":
            m_max = self.n_cap - 3
            if self.m_min > m_max:
                raise ConfigError(f"m_min={self.m_min} exceeds maximum context size {m_max}")
            if self.m_min < 1:
                raise ConfigError("m_min must be >= 1")
        merged = {k: dict(v) for k, v in HYPER_RANGES.items()}
        for fam, over in self.hyper_ranges.items():
            merged.setdefault(fam, {}).update(over)
        object.__setattr__(self, "hyper_ranges", merged)


def sample_gp_function(spec: KernelSpec, xs, rng: np.random.Generator) -> np.ndarray:
    """Draw function values at xs from the zero-mean GP: y = L z."""
    xs = np.asarray(xs, dtype=np.float64)
    L = cholesky_factor(gram_matrix(spec, xs))
    z = rng.standard_normal(xs.shape[0])
    return L @ z


def sample_sawtooth(A: float, freq: float, shift: float, n_terms: int, xs) -> np.ndarray:
    """Truncated Fourier sawtooth A/2 - (A/pi) sum_k (-1)^k sin(2 pi k f (x - shift))/k."""
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    k = np.arange(1, n_terms + 1)
    phases = 2.0 * np.pi * freq * (xs[:, None] - shift) * k[None, :]
    series = ((-1.0) ** k / k)[None, :] * np.sin(phases)
    return A / 2.0 - (A / np.pi) * series.sum(axis=1)


def _draw_counts(cfg: TaskConfig, rng: np.random.Generator) -> tuple[int, int]:
    m_max = cfg.n_cap - 3
    M = int(rng.integers(cfg.m_min, m_max + 1))
    n_t = int(rng.integers(3, cfg.n_cap - M + 1))
    return M, n_t


def sample_episode(cfg: TaskConfig, rng: np.random.Generator) -> Episode:
    """One episode per the sampling protocol.

    Context count M ~ U[m_min, 47] and target count ~ U[3, 50 - M]; inputs
    i.i.d. uniform on x_range (unsorted, keeping the irregular-sampling
    regime).  At m_min = 47 the counts degenerate to M = 47, 3 targets.
    """
    M, n_t = _draw_counts(cfg, rng)
    n = M + n_t
    xs = rng.uniform(cfg.x_range[0], cfg.x_range[1], size=(n, 1))
    ranges = cfg.hyper_ranges[cfg.family]
    if cfg.family == "sawtooth":
        freq = rng.uniform(*ranges["freq"])
        shift = rng.uniform(*ranges["shift"])
        lo, hi = ranges["terms"]
        n_terms = int(rng.integers(lo, hi + 1))
        ys = sample_sawtooth(1.0, freq, shift, n_terms, xs)
        meta = {"family": "sawtooth", "freq": freq, "shift": shift, "terms": n_terms}
    else:
        s = rng.uniform(*ranges["s"])
        ell = rng.uniform(*ranges["ell"])
        period = rng.uniform(*ranges["period"]) if cfg.family == "periodic" else 1.0
        spec = KernelSpec(family=cfg.family, s=s, ell=ell, period=period, noise=cfg.noise)
        ys = sample_gp_function(spec, xs, rng)
        meta = {"family": cfg.family, "s": s, "ell": ell, "period": period, "noise": cfg.noise}
    ys = ys[:, None]
    return Episode(
        xs_context=xs[:M],
        ys_context=ys[:M],
        xs_target=xs[M:],
        ys_target=ys[M:],
        task_meta=meta,
    )


def episode_stream(seed: int, index: int) -> np.random.Generator:
    """The counter-based stream owning episode `index` under `seed`."""
    return substream(seed, TAG_EPISODE, index)


def sample_batch(cfg: TaskConfig, seed: int, first_index: int, batch_size: int) -> list[Episode]:
    """Episodes first_index .. first_index + batch_size - 1, each from its own stream."""
    return [
        sample_episode(cfg, episode_stream(seed, first_index + i)) for i in range(batch_size)
    ]


@dataclass(frozen=True)
class EvalCache:
    seed: int
    n_batches: int
    batch_size: int
    batches: tuple  # of tuples of Episode

    def content_hash(self) -> str:
        """SHA-256 over all episode arrays, for bitwise-determinism checks."""
        h = hashlib.sha256()
        for batch in self.batches:
            for ep in batch:
                for arr in (ep.xs_context, ep.ys_context, ep.xs_target, ep.ys_target):
                    h.update(arr.tobytes())
        return h.hexdigest()


def build_eval_cache(cfg: TaskConfig, seed: int, n_batches: int, batch_size: int) -> EvalCache:
    """Fixed evaluation set; regeneration from (seed, cfg) is bit-identical."""
    batches = tuple(
        tuple(sample_batch(cfg, seed, b * batch_size, batch_size)) for b in range(n_batches)
    )
    return EvalCache(seed=seed, n_batches=n_batches, batch_size=batch_size, batches=batches)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _parse_csv(path) -> tuple[np.ndarray, np.ndarray]:
    ts: list[float] = []
    vals: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["t", "value"]:
            raise IngestionError(f"{path}: expected header 't,value', got {header}")
        prev_t = -np.inf
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise IngestionError(f"{path}:{lineno}: expected two columns, got {row}")
            try:
                t = float(row[0])
            except ValueError:
                raise IngestionError(f"{path}:{lineno}: non-numeric timestamp {row[0]!r}") from None
            cell = row[1].strip()
            if cell == "":
                v = np.nan  # gap
            else:
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestionError(f"{path}:{lineno}: non-numeric value {row[1]!r}") from None
            if t < prev_t:
                raise IngestionError(f"{path}:{lineno}: timestamps not monotone non-decreasing")
            prev_t = t
            ts.append(t)
            vals.append(v)
    return np.asarray(ts), np.asarray(vals)


def episodes_from_csv(
    path,
    window_len: int,
    m_min: int,
    m_max: int,
    rng: np.random.Generator,
    train_fraction: float = 0.5,
    interpolate_gaps: bool = False,
) -> list[Episode]:
    """Split a `t,value` series into imputation episodes.

    Non-overlapping windows of `window_len` rows; per-window time restarts at
    0; values min-max normalised with statistics from the first
    `train_fraction` of windows (the declared training split).  Windows with
    gaps are rejected unless `interpolate_gaps` linearly fills interior ones.
    Context size is drawn uniformly from [m_min, m_max).
    """
    if not 1 <= m_min < m_max <= window_len:
        raise ConfigError(f"need 1 <= m_min < m_max <= window_len, got ({m_min}, {m_max}, {window_len})")
    ts, vals = _parse_csv(path)
    n_windows = len(ts) // window_len
    if n_windows == 0:
        return []

    n_train = max(1, int(np.floor(n_windows * train_fraction)))
    train_vals = vals[: n_train * window_len]
    finite = train_vals[np.isfinite(train_vals)]
    if finite.size == 0:
        raise IngestionError(f"{path}: training split contains no finite values")
    vmin, vmax = float(finite.min()), float(finite.max())
    scale = vmax - vmin if vmax > vmin else 1.0

    episodes = []
    for widx in range(n_windows):
        sl = slice(widx * window_len, (widx + 1) * window_len)
        t_win = ts[sl].copy()
        v_win = vals[sl].copy()
        gaps = ~np.isfinite(v_win)
        if gaps.any():
            # only interior gaps are interpolable; edge gaps always reject
            if not interpolate_gaps or gaps[0] or gaps[-1]:
                continue
            good = ~gaps
            v_win[gaps] = np.interp(t_win[gaps], t_win[good], v_win[good])
        t_win = t_win - t_win[0]
        v_win = (v_win - vmin) / scale
        M = int(rng.integers(m_min, m_max))
        idx = rng.permutation(window_len)
        ctx, tgt = np.sort(idx[:M]), np.sort(idx[M:])
        episodes.append(
            Episode(
                xs_context=t_win[ctx][:, None],
                ys_context=v_win[ctx][:, None],
                xs_target=t_win[tgt][:, None],
                ys_target=v_win[tgt][:, None],
                task_meta={"family": "csv_imputation", "window": widx, "source": str(path)},
            )
        )
    return episodes
