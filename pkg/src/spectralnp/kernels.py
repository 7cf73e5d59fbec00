"""Closed-form kernels, the random-feature kernel estimator, and the
block-rotation operator realising feature translation equivariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .spectral import SampledFrequencies, SpectralMixture

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class KernelSpec:
    family: str  # "rbf" | "matern52" | "periodic" | "spectral_mixture"
    s: float = 1.0  # output scale
    ell: float = 1.0  # lengthscale
    period: float = 1.0  # periodic family only
    noise: float = 0.0  # diagonal observation noise std
    mixture: SpectralMixture | None = None

    def __post_init__(self):
        if self.family not in ("rbf", "matern52", "periodic", "spectral_mixture"):
            raise ConfigError(f"unknown kernel family: {self.family!r}")
        if self.family != "spectral_mixture" and (self.s <= 0 or self.ell <= 0):
            raise ConfigError("kernel scale parameters must be positive")
        if self.family == "periodic" and self.period <= 0:
            raise ConfigError("period must be positive")
        if self.family == "spectral_mixture" and self.mixture is None:
            raise ConfigError("spectral_mixture family needs a mixture")
        if self.noise < 0:
            raise ConfigError("noise std must be non-negative")


def _base_eval(spec: KernelSpec, tau: np.ndarray) -> np.ndarray:
    r = np.abs(tau)
    if spec.family == "rbf":
        return spec.s**2 * np.exp(-(tau**2) / (2.0 * spec.ell**2))
    if spec.family == "matern52":
        z = np.sqrt(5.0) * r / spec.ell
        return spec.s**2 * (1.0 + z + z**2 / 3.0) * np.exp(-z)
    if spec.family == "periodic":
        return spec.s**2 * np.exp(-2.0 * np.sin(np.pi * r / spec.period) ** 2 / spec.ell**2)
    raise ConfigError(f"kernel_eval does not handle family {spec.family!r}")


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """Stationary kernel value; diagonal noise added only on exact equality."""
    if spec.family == "spectral_mixture":
        val = sm_kernel(spec.mixture, np.asarray(x, dtype=float) - np.asarray(x2, dtype=float))
    else:
        val = float(_base_eval(spec, np.float64(x) - np.float64(x2)))
    if np.all(np.asarray(x) == np.asarray(x2)):
        val += spec.noise**2
    return val


def sm_kernel(mix: SpectralMixture, tau) -> float:
    """Spectral-mixture kernel sum_q w_q exp(-tau' Sigma_q tau / 2) cos(mu_q' tau).

    Takes only the input difference, so stationarity holds by construction.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
    quad = (mix.sigma2 * tau[None, :] ** 2).sum(axis=1)  # (Q,)
    osc = np.cos(mix.mu @ tau)
    return float(np.sum(mix.w * np.exp(-0.5 * quad) * osc))


def feature_kernel(feat_x: np.ndarray, feat_x2: np.ndarray) -> float:
    """Random-feature kernel estimate: plain inner product of feature vectors."""
    return float(feat_x @ feat_x2)


@dataclass(frozen=True)
class RotationOperator:
    """Block-diagonal 2x2 rotations by omega_{q,d}.Delta, in feature block order."""

    angles: np.ndarray  # (Q, D0)


def rotation_for_shift(freqs: SampledFrequencies, delta) -> RotationOperator:
    delta = np.atleast_1d(np.asarray(delta, dtype=np.float64))
    return RotationOperator(angles=freqs.omega @ delta)


def apply_rotation(op: RotationOperator, v: np.ndarray) -> np.ndarray:
    """Rotate each (cos, sin) block; preserves the L2 norm."""
    angles = op.angles.reshape(-1)
    if v.shape[0] != 2 * angles.shape[0]:
        raise ConfigError(f"feature length {v.shape[0]} != 2 * block count {angles.shape[0]}")
    blocks = v.reshape(-1, 2)
    c, s = np.cos(angles), np.sin(angles)
    out = np.empty_like(blocks)
    out[:, 0] = c * blocks[:, 0] - s * blocks[:, 1]
    out[:, 1] = s * blocks[:, 0] + c * blocks[:, 1]
    return out.reshape(-1)


def gram_matrix(spec: KernelSpec, xs) -> np.ndarray:
    """Symmetric kernel matrix with the smallest jitter that admits a Cholesky.

    Jitter escalates 1e-10 -> x10 -> 1e-4; failure beyond that raises.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    n = xs.shape[0]
    if spec.family == "spectral_mixture":
        G = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                G[i, j] = sm_kernel(spec.mixture, xs[i] - xs[j])
    else:
        tau = xs[:, None, :] - xs[None, :, :]
        G = _base_eval(spec, np.linalg.norm(tau, axis=-1))
    equal = np.all(xs[:, None, :] == xs[None, :, :], axis=-1)
    G = G + spec.noise**2 * equal
    G = 0.5 * (G + G.T)

    jitter = JITTER_START
    while jitter <= JITTER_MAX:
        try:
            np.linalg.cholesky(G + jitter * np.eye(n))
            return G + jitter * np.eye(n)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(f"Cholesky failed for {n}x{n} Gram matrix up to jitter {JITTER_MAX}")


def cholesky_factor(gram: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of an already-jittered Gram matrix."""
    try:
        return np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Cholesky failed on jittered Gram matrix") from exc
