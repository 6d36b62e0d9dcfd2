"""System configuration shared by the interleaver, channel and simulation code."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import ConfigurationError, ResourceError

__all__ = ["SystemConfig", "load_config"]


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and options of one ST-BICM link.

    ``frame_bits`` is the codeword length ``L_C * N_C`` in coded bits.
    ``precoder`` is ``"dna"``, ``"identity"``, ``"golden"`` or a path to a matrix file.
    ``interleaver`` is ``"optimized"`` or ``"pr"``.
    """

    n_t: int = 2
    n_r: int = 1
    n_c: int = 1
    s: int = 1
    n_s: int | None = None
    m: int = 2
    code: str = "7,5"
    code_kind: str = "conv"
    turbo_punctured: bool = True
    turbo_inner: int = 1
    turbo_warm_start: bool = True
    frame_bits: int = 1024
    interleaver: str = "optimized"
    L_I: int | None = None
    iterations: int = 10
    precoder: str = "dna"
    reorder_rows: bool = True
    seed: int = 0
    max_frames: int = 1_000_000
    target_errors: int = 100
    early_stop: bool = True
    detector_cap: int = 16
    chunk_frames: int = 64

    def __post_init__(self):
        if self.n_s is None:
            object.__setattr__(self, "n_s", min(self.s, self.n_c))
        for name in ("n_t", "n_r", "n_c", "s", "n_s", "m", "frame_bits", "iterations"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_c % self.n_s:
            raise ConfigurationError(f"n_s={self.n_s} must divide n_c={self.n_c}")
        if self.s % self.n_s:
            raise ConfigurationError(f"n_s={self.n_s} must divide s={self.s}")
        if (self.n_t * self.n_c) % self.s:
            raise ConfigurationError(f"s={self.s} must divide n_t*n_c={self.n_t * self.n_c}")
        if self.precoder == "dna" and self.n_t % self.s_prime:
            raise ConfigurationError(f"s'={self.s_prime} must divide n_t={self.n_t}")
        if self.m * self.N_t > self.detector_cap:
            raise ResourceError(
                f"m*N_t={self.m * self.N_t} exceeds the detector cap {self.detector_cap}"
            )
        unit = self.n_c * self.s * self.m * self.n_t
        if self.frame_bits % unit:
            raise ConfigurationError(
                f"frame length {self.frame_bits} not divisible by n_c*s*m*n_t={unit}"
            )
        if self.code_kind not in ("conv", "turbo"):
            raise ConfigurationError(f"unknown code kind {self.code_kind!r}")
        if self.interleaver not in ("optimized", "pr"):
            raise ConfigurationError(f"unknown interleaver kind {self.interleaver!r}")

    # derived dimensions
    @property
    def s_prime(self) -> int:
        return self.s // self.n_s

    @property
    def N_t(self) -> int:
        return self.s * self.n_t

    @property
    def N_r(self) -> int:
        return self.s * self.n_r

    @property
    def N_c(self) -> int:
        """Number of extended channel blocks (precoding blocks) per frame."""
        return self.n_c // self.n_s

    @property
    def bits_per_period(self) -> int:
        """Coded bits carried by one precoding time period."""
        return self.m * self.N_t

    @property
    def periods(self) -> int:
        """Precoding time periods per frame."""
        return self.frame_bits // self.bits_per_period

    @property
    def periods_per_block(self) -> int:
        return self.periods // self.N_c

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path) -> SystemConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return SystemConfig.from_dict(data)


def rate_fraction(text) -> Fraction:
    """Parse ``"1/2"`` or ``0.5`` into a fraction."""
    try:
        return Fraction(str(text)).limit_denominator(1000)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"bad rate {text!r}") from exc
