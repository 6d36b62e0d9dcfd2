"""Gray-labelled square QAM / BPSK mapping and single-bit-flip distance sets.

Labelling convention: the first ``m/2`` bits of a label select the in-phase
level and the last ``m/2`` bits the quadrature level, each through a
binary-reflected Gray code. The all-zero label sits on the most positive
level, so BPSK maps 0 -> +1 and 1 -> -1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Constellation",
    "BskDistanceSet",
    "make_constellation",
    "map_bits",
    "bsk_distances",
]


def _gray_decode(g: np.ndarray) -> np.ndarray:
    """Inverse of the binary-reflected Gray code (works element-wise)."""
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    """MSB-first bit vectors along the last axis -> integers."""
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits @ weights


@dataclass(frozen=True)
class Constellation:
    """Unit-energy constellation with an explicit bit labelling.

    Attributes
    ----------
    m : int
        Bits per symbol.
    points : ndarray of complex, shape (2**m,)
        ``points[i]`` is the symbol whose label is the integer ``i``
        (MSB first).
    labels : ndarray of uint8, shape (2**m, m)
        Binary labels, ``labels[i]`` is the MSB-first expansion of ``i``.
    scale : float
        Half the minimum distance on one axis (``A`` in ``(2k+1)A`` levels).
    """

    m: int
    points: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    scale: float

    @property
    def order(self) -> int:
        return 1 << self.m

    @property
    def energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def map(self, bits) -> np.ndarray:
        """Map bits (..., m) to symbols (...)."""
        bits = np.asarray(bits)
        if bits.shape[-1] != self.m:
            raise ConfigurationError(
                f"expected groups of {self.m} bits, got trailing axis {bits.shape[-1]}"
            )
        return self.points[_bits_to_int(bits)]

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "I", "Q"])
            for lab, pt in zip(self.labels, self.points):
                writer.writerow(
                    ["".join(str(int(b)) for b in lab), f"{pt.real:.15g}", f"{pt.imag:.15g}"]
                )


@lru_cache(maxsize=None)
def make_constellation(m: int) -> Constellation:
    """Build the Gray-labelled unit-energy constellation with ``2**m`` points.

    ``m = 1`` gives real BPSK; even ``m`` gives square QAM (QPSK, 16-QAM, ...).
    """
    if m < 1 or (m > 1 and m % 2):
        raise ConfigurationError(f"unsupported bits per symbol m={m} (BPSK or square QAM)")
    labels = ((np.arange(1 << m)[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)
    if m == 1:
        points = np.array([1.0 + 0j, -1.0 + 0j])
        return Constellation(1, points, labels, 1.0)

    half = m // 2
    side = 1 << half
    scale = np.sqrt(3.0 / (2.0 * ((1 << m) - 1)))
    i_idx = _gray_decode(_bits_to_int(labels[:, :half]))
    q_idx = _gray_decode(_bits_to_int(labels[:, half:]))
    levels_i = (side - 1 - 2 * i_idx) * scale
    levels_q = (side - 1 - 2 * q_idx) * scale
    points = levels_i + 1j * levels_q
    return Constellation(m, points.astype(complex), labels, float(scale))


def map_bits(c: Constellation, bits) -> np.ndarray:
    """Map one or more ``m``-bit groups onto constellation symbols."""
    return c.map(bits)


@dataclass(frozen=True)
class BskDistanceSet:
    """Distances between each point and its single-bit-flip neighbours.

    ``per_point[i, l]`` is ``|z_i - zbar_i^l|`` where ``zbar_i^l`` is the
    point whose label differs from label ``i`` in bit ``l`` only.
    """

    per_point: np.ndarray

    @property
    def values(self) -> np.ndarray:
        """Flat multiset D (one entry per point and bit position)."""
        return self.per_point.ravel()

    def distinct(self, decimals: int = 12) -> np.ndarray:
        return np.unique(np.round(self.values, decimals))

    def per_bit(self, l: int) -> np.ndarray:
        return self.per_point[:, l]


def bsk_distances(c: Constellation) -> BskDistanceSet:
    idx = np.arange(c.order)
    out = np.empty((c.order, c.m))
    for l in range(c.m):
        flip = idx ^ (1 << (c.m - 1 - l))
        out[:, l] = np.abs(c.points - c.points[flip])
    return BskDistanceSet(out)
