"""Optimized channel interleavers with block separation, and a random baseline.

An :class:`InterleaverMap` sends codeword bit ``p`` to transmission slot
``permutation[p]``. For the channel interleaver the slots are ordered as

    slot = (block * P + period) * (m * N_t) + row * m + bit

where ``block`` is the extended channel block, ``period`` the precoding time
period inside it (``P`` per block), ``row`` the precoder input (antenna when
unprecoded) and ``bit`` the position inside the ``m``-bit label. The
standalone basic interleaver uses ``slot = column * N_I + row``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SystemConfig
from .errors import ConfigurationError

__all__ = [
    "InterleaverMap",
    "InterleaverReport",
    "separation_bound",
    "demultiplex",
    "sliding_separation_permutation",
    "circulant_placement",
    "build_basic_interleaver",
    "build_channel_interleaver",
    "build_pr_interleaver",
    "verify_interleaver",
    "window_collisions",
]


@dataclass(frozen=True)
class InterleaverMap:
    """A bit permutation plus the parameters it was built with."""

    permutation: np.ndarray = field(repr=False)
    n_inputs: int
    frame_size: int
    separation: int
    kind: str
    seed: object = None
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.int64)
        object.__setattr__(self, "permutation", perm)
        if perm.shape != (self.frame_size,):
            raise ConfigurationError("permutation length differs from frame size")

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.frame_size)
        return inv

    def is_bijection(self) -> bool:
        return np.array_equal(np.sort(self.permutation), np.arange(self.frame_size))

    def interleave(self, x):
        """Reorder the last axis of ``x`` from codeword order to slot order."""
        x = np.asarray(x)
        out = np.empty_like(x)
        out[..., self.permutation] = x
        return out

    def deinterleave(self, y):
        return np.asarray(y)[..., self.permutation]

    def to_file(self, path) -> None:
        """One target index per line, preceded by a commented parameter line."""
        head = (f"# kind={self.kind} N_I={self.n_inputs} S_I={self.frame_size} "
                f"L_I={self.separation} seed={self.seed}")
        np.savetxt(path, self.permutation, fmt="%d", header=head[2:], comments="# ")

    @classmethod
    def from_file(cls, path) -> "InterleaverMap":
        path = Path(path)
        lines = path.read_text().splitlines()
        params = {}
        if lines and lines[0].startswith("#"):
            for tok in lines[0][1:].split():
                k, _, v = tok.partition("=")
                params[k] = v
        perm = np.loadtxt(path, dtype=np.int64, comments="#", ndmin=1)
        out = cls(perm, int(params.get("N_I", 1)), perm.size, int(params.get("L_I", 1)),
                  params.get("kind", "file"), params.get("seed"))
        if not out.is_bijection():
            raise ConfigurationError(f"{path} does not hold a permutation")
        return out


def separation_bound(n_inputs: int, frame_size: int) -> int:
    """Largest admissible sliding separation, floor((S_I/N_I^2 + 1)/2)."""
    return max(1, int((frame_size / n_inputs**2 + 1) // 2))


def demultiplex(n_frame: int, n_sub: int) -> np.ndarray:
    """Anti-periodic demultiplexer.

    Returns ``src`` of shape ``(n_sub, n_frame // n_sub)`` such that
    sub-frame ``i`` position ``j`` holds codeword bit ``src[i, j] =
    (i + j) mod n_sub + j * n_sub``.
    """
    if n_frame % n_sub:
        raise ConfigurationError(f"{n_sub} sub-frames do not divide {n_frame} bits")
    i = np.arange(n_sub)[:, None]
    j = np.arange(n_frame // n_sub)[None, :]
    return (i + j) % n_sub + j * n_sub


def sliding_separation_permutation(length: int, block: int, separation: int, rng,
                                   restarts: int = 100, weight_power: float = 2.0):
    """Random permutation ``pi`` of ``range(length)`` with sliding separation.

    Any ``separation`` consecutive inputs land in pairwise distinct output
    blocks ``pi(j) // block``. Built by a randomized greedy that picks a
    block among those not used by the previous ``separation - 1`` inputs,
    with probability growing with its remaining free slots, then a random
    free slot inside it. Returns ``None`` if every restart dead-ends.
    """
    if length % block:
        raise ConfigurationError(f"block {block} does not divide length {length}")
    n_blocks = length // block
    for _ in range(restarts):
        free = [list(rng.permutation(block) + b * block) for b in range(n_blocks)]
        cap = np.full(n_blocks, block, dtype=float)
        chosen = np.empty(length, dtype=np.int64)
        recent: list[int] = []
        ok = True
        for j in range(length):
            w = cap ** weight_power
            if recent:
                w[recent] = 0.0
            total = w.sum()
            if total <= 0:
                ok = False
                break
            b = int(rng.choice(n_blocks, p=w / total))
            chosen[j] = free[b].pop()
            cap[b] -= 1
            recent.append(b)
            if len(recent) > separation - 1:
                recent.pop(0)
        if ok:
            return chosen
    return None


def circulant_placement(n_inputs: int, sub_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic shift of step 3: element ``q`` of sub-frame ``i`` -> (row, column).

    Returns ``(row, col)`` arrays of shape ``(n_inputs, sub_len)``; element
    ``q = j2 + j1 * N_I`` of sub-frame ``i`` goes to row ``i``, column
    ``(i + j2) mod N_I + j1 * N_I``.
    """
    if sub_len % n_inputs:
        raise ConfigurationError(
            f"sub-frame length {sub_len} is not a multiple of N_I={n_inputs}"
        )
    i = np.arange(n_inputs)[:, None]
    q = np.arange(sub_len)[None, :]
    j2, j1 = q % n_inputs, q // n_inputs
    col = (i + j2) % n_inputs + j1 * n_inputs
    return np.broadcast_to(i, col.shape).copy(), col


def _basic_rows_cols(n_inputs, frame_size, separation, rng, restarts):
    """Codeword bit -> (row, column) of the ``N_I x S_I/N_I`` matrix."""
    sub_len = frame_size // n_inputs
    src = demultiplex(frame_size, n_inputs)
    pi_s = sliding_separation_permutation(sub_len, n_inputs, separation, rng, restarts)
    if pi_s is None:
        return None, None, None
    row_of, col_of = circulant_placement(n_inputs, sub_len)
    rows = np.empty(frame_size, dtype=np.int64)
    cols = np.empty(frame_size, dtype=np.int64)
    # sub-frame bit j moves to position pi_s[j], then to the circulant column
    rows[src] = row_of[:, pi_s]
    cols[src] = col_of[np.arange(n_inputs)[:, None], pi_s[None, :]]
    return rows, cols, pi_s


def _check_basic_dims(n_inputs, frame_size):
    if n_inputs < 1 or frame_size < 1:
        raise ConfigurationError("N_I and S_I must be positive")
    if frame_size % (n_inputs * n_inputs):
        raise ConfigurationError(
            f"S_I={frame_size} must be a multiple of N_I^2={n_inputs**2} "
            "(whole circulant blocks)"
        )


def build_basic_interleaver(n_inputs: int, frame_size: int, separation: int | None = None,
                            rng_seed=0, restarts: int = 100) -> InterleaverMap:
    """Basic interleaver for ``N_I`` channel inputs, ``S_I`` bits, separation ``L_I``.

    Steps: anti-periodic demultiplexing into ``N_I`` sub-frames, one
    sliding-separation permutation shared by all sub-frames, then circulant
    placement of blocks of ``N_I`` bits. Any ``(L_I - 1) * N_I + 1``
    consecutive codeword bits occupy distinct columns (time periods).
    """
    _check_basic_dims(n_inputs, frame_size)
    if separation is None:
        separation = separation_bound(n_inputs, frame_size)
    if separation < 1:
        raise ConfigurationError("L_I must be >= 1")
    rng = np.random.default_rng(rng_seed)
    rows, cols, pi_s = _basic_rows_cols(n_inputs, frame_size, separation, rng, restarts)
    if rows is None:
        raise ConfigurationError(
            f"no sliding-separation permutation found for N_I={n_inputs}, S_I={frame_size}, "
            f"L_I={separation} (bound {separation_bound(n_inputs, frame_size)}) "
            f"after {restarts} restarts with seed {rng_seed!r}"
        )
    perm = cols * n_inputs + rows
    return InterleaverMap(perm, n_inputs, frame_size, separation, "optimized", rng_seed,
                          {"pi_s": pi_s, "rows": rows, "columns": cols,
                           "shared_pi_s": True})


def build_channel_interleaver(cfg: SystemConfig, rng_seed=None,
                              restarts: int = 100) -> InterleaverMap:
    """Optimized interleaver for a full system configuration.

    The codeword is first demultiplexed over the ``N_c = n_c / n_s``
    extended channel blocks, then each sub-frame goes through a basic
    interleaver with ``N_I = m * N_t`` inputs. Basic-interleaver row
    ``r`` carries label bit ``r // N_t`` of precoder input ``r % N_t``, so
    the first ``N_t`` rows fill all inputs on the first label bit.
    """
    if cfg.interleaver == "pr":
        return build_pr_interleaver(cfg.frame_bits, cfg.seed if rng_seed is None else rng_seed)
    seed = cfg.seed if rng_seed is None else rng_seed
    n_blocks = cfg.N_c
    n_inputs = cfg.bits_per_period
    sub_size = cfg.frame_bits // n_blocks
    _check_basic_dims(n_inputs, sub_size)
    separation = cfg.L_I if cfg.L_I is not None else separation_bound(n_inputs, sub_size)
    periods = sub_size // n_inputs
    outer = demultiplex(cfg.frame_bits, n_blocks)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    perm = np.empty(cfg.frame_bits, dtype=np.int64)
    pis = []
    for k in range(n_blocks):
        rng = np.random.default_rng(children[k])
        rows, cols, pi_s = _basic_rows_cols(n_inputs, sub_size, separation, rng, restarts)
        if rows is None:
            raise ConfigurationError(
                f"no sliding-separation permutation for N_I={n_inputs}, S_I={sub_size}, "
                f"L_I={separation} after {restarts} restarts with seed {seed!r}"
            )
        bit, prow = rows // cfg.N_t, rows % cfg.N_t
        slots = (k * periods + cols) * n_inputs + prow * cfg.m + bit
        perm[outer[k]] = slots
        pis.append(pi_s)
    return InterleaverMap(perm, n_inputs, cfg.frame_bits, separation, "optimized", seed,
                          {"pi_s": pis, "blocks": n_blocks, "sub_frame_size": sub_size})


def build_pr_interleaver(frame_size: int, rng_seed=0) -> InterleaverMap:
    """Uniformly random permutation (pseudo-random baseline)."""
    rng = np.random.default_rng(rng_seed)
    return InterleaverMap(rng.permutation(frame_size), 1, frame_size, 1, "pseudo-random",
                          rng_seed)


def window_collisions(periods: np.ndarray, window: int) -> tuple[int, int]:
    """Count pairs of bits less than ``window`` apart that share a period.

    Returns ``(colliding_pairs, max_bits_of_one_window_in_one_period)``.
    """
    periods = np.asarray(periods)
    n = periods.size
    pairs = 0
    for d in range(1, min(window, n)):
        pairs += int(np.count_nonzero(periods[d:] == periods[:-d]))
    worst = 1 if n else 0
    if pairs:
        for start in range(max(1, n - window + 1)):
            _, counts = np.unique(periods[start:start + window], return_counts=True)
            worst = max(worst, int(counts.max()))
    return pairs, worst


@dataclass(frozen=True)
class InterleaverReport:
    """Diagnostics of an interleaver against a system configuration."""

    window: int
    colliding_pairs: int
    max_shared: int
    occupancy: np.ndarray
    occupancy_ratio: float
    aligned_min: int
    aligned_max: int
    bijective: bool

    @property
    def ok(self) -> bool:
        return (self.bijective and self.colliding_pairs == 0
                and self.occupancy_ratio == 1.0 and self.aligned_min == self.aligned_max == 1)


def verify_interleaver(imap: InterleaverMap, cfg: SystemConfig) -> InterleaverReport:
    """Check non-interference and equi-distribution of ``imap`` under ``cfg``.

    * non-interference: among any ``(L_I - 1) * N_I + 1`` consecutive
      codeword bits, no two share a precoding time period;
    * occupancy: histogram of bits over (block, precoder row, label bit);
    * aligned windows: each group of ``N_c * N_I`` consecutive codeword
      bits starting at a multiple of that size, counted per (block, row,
      bit) cell (1 everywhere for an equi-distributing map).
    """
    if imap.frame_size != cfg.frame_bits:
        raise ConfigurationError("interleaver size differs from the configured frame")
    n_inputs = cfg.bits_per_period
    slots = imap.permutation
    period = slots // n_inputs
    window = (imap.separation - 1) * n_inputs + 1 if imap.kind == "optimized" else (
        (cfg.L_I or 1) - 1) * n_inputs + 1
    pairs, worst = window_collisions(period, window)

    block = period // cfg.periods_per_block
    cell = block * n_inputs + slots % n_inputs
    occ = np.bincount(cell, minlength=cfg.N_c * n_inputs)
    ratio = float(occ.max() / occ.min()) if occ.min() > 0 else float("inf")

    group = cfg.N_c * n_inputs
    counts = np.zeros((cfg.frame_bits // group, group), dtype=np.int64)
    np.add.at(counts, (np.arange(cfg.frame_bits) // group, cell), 1)
    return InterleaverReport(window, pairs, worst, occ, ratio, int(counts.min()),
                             int(counts.max()), imap.is_bijection())
