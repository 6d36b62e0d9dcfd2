"""Block-fading MIMO channel, extended block-diagonal matrices and SNR bookkeeping.

Noise convention: each complex noise sample has total variance ``2 N0``
(``N0`` per real dimension).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .config import SystemConfig
from .errors import ConfigurationError

__all__ = [
    "ChannelRealizationSet",
    "NoiseModel",
    "draw_channel",
    "build_extended_matrix",
    "extended_matrices",
    "transmit",
    "ebn0_to_n0",
    "spectral_efficiency",
    "complex_gaussian",
]


def complex_gaussian(rng, shape, variance: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian samples with total variance ``variance``."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class ChannelRealizationSet:
    """``H[c]`` is the ``n_t x n_r`` matrix of channel realization ``c``."""

    H: np.ndarray = field(repr=False)

    @property
    def n_c(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class NoiseModel:
    N0: float

    def __post_init__(self):
        if not (self.N0 > 0 and np.isfinite(self.N0)):
            raise ConfigurationError(f"N0 must be positive and finite, got {self.N0}")

    @property
    def complex_variance(self) -> float:
        return 2.0 * self.N0

    def sample(self, rng, shape) -> np.ndarray:
        return complex_gaussian(rng, shape, self.complex_variance)


def draw_channel(cfg: SystemConfig, rng, batch: int | None = None) -> ChannelRealizationSet | np.ndarray:
    """Draw ``n_c`` independent ``n_t x n_r`` Rayleigh matrices.

    With ``batch`` the raw array of shape ``(batch, n_c, n_t, n_r)`` is
    returned instead (one realization set per frame).
    """
    if batch is None:
        return ChannelRealizationSet(complex_gaussian(rng, (cfg.n_c, cfg.n_t, cfg.n_r)))
    return complex_gaussian(rng, (batch, cfg.n_c, cfg.n_t, cfg.n_r))


def build_extended_matrix(chan, k: int, cfg: SystemConfig) -> np.ndarray:
    """``N_t x N_r`` block-diagonal matrix of extended block ``k``.

    The diagonal holds realization ``k n_s`` repeated ``s'`` times, then
    ``k n_s + 1`` repeated ``s'`` times, and so on up to ``n_s`` distinct
    realizations.
    """
    H = chan.H if isinstance(chan, ChannelRealizationSet) else np.asarray(chan)
    if H.shape[0] != cfg.n_c:
        raise ConfigurationError(f"expected {cfg.n_c} realizations, got {H.shape[0]}")
    if not 0 <= k < cfg.N_c:
        raise ConfigurationError(f"block index {k} outside [0, {cfg.N_c})")
    blocks = [H[k * cfg.n_s + t] for t in range(cfg.n_s) for _ in range(cfg.s_prime)]
    return block_diag(*blocks)


def extended_matrices(H: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Vectorized :func:`build_extended_matrix` over a batch.

    ``H`` has shape ``(B, n_c, n_t, n_r)``; the result ``(B, N_c, N_t, N_r)``.
    """
    B = H.shape[0]
    out = np.zeros((B, cfg.N_c, cfg.N_t, cfg.N_r), dtype=complex)
    for k in range(cfg.N_c):
        for t in range(cfg.n_s):
            for rep in range(cfg.s_prime):
                d = t * cfg.s_prime + rep
                out[:, k, d * cfg.n_t:(d + 1) * cfg.n_t, d * cfg.n_r:(d + 1) * cfg.n_r] = \
                    H[:, k * cfg.n_s + t]
    return out


def transmit(z, S, H_k, noise: NoiseModel | float, rng) -> np.ndarray:
    """``y = z S H_k + eta`` for row vectors ``z`` (any leading batch axes)."""
    z = np.asarray(z)
    S = np.asarray(S)
    H_k = np.asarray(H_k)
    if z.shape[-1] != S.shape[0] or S.shape[1] != H_k.shape[-2]:
        raise ConfigurationError(
            f"dimension mismatch: z {z.shape}, S {S.shape}, H {H_k.shape}"
        )
    if not isinstance(noise, NoiseModel):
        noise = NoiseModel(float(noise))
    clean = z @ S @ H_k if H_k.ndim == 2 else np.einsum("...i,ij,...jk->...k", z, S, H_k)
    return clean + noise.sample(rng, clean.shape)


def spectral_efficiency(cfg: SystemConfig, code_rate: float) -> float:
    """Information bits per channel use, ``m n_t R_C``."""
    return cfg.m * cfg.n_t * code_rate


def ebn0_to_n0(cfg: SystemConfig, ebn0_db: float, code_rate: float) -> float:
    """Noise level ``N0`` for a given ``Eb/N0`` (dB).

    ``Eb`` is the received energy per information bit, counting the ``n_r``
    receive antennas: ``N0 = n_r n_t / (2 m n_t R_C Eb/N0)``.
    """
    if not np.isfinite(ebn0_db):
        raise ConfigurationError("Eb/N0 must be finite")
    lin = 10.0 ** (ebn0_db / 10.0)
    return cfg.n_r * cfg.n_t / (2.0 * spectral_efficiency(cfg, code_rate) * lin)
