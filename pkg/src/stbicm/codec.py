"""Convolutional / turbo encoders, log-domain BCJR and weight spectra.

LLR convention throughout the package: ``L = ln P(b=0) / P(b=1)``.

Only rate ``1/N_C`` mother codes are supported (``K_C = 1``). Trellises are
always terminated to the zero state; the ``nu`` tail branches are counted
inside ``L_C``, so a frame of ``L_C`` branches carries ``L_C - nu`` free
information bits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numba as nb
import numpy as np

from .errors import ConfigurationError, ResourceError

__all__ = [
    "ConvCode",
    "Trellis",
    "TurboCode",
    "WeightSpectrum",
    "parse_generators",
    "conv_encode",
    "bcjr_decode",
    "weight_spectrum",
    "turbo_encode",
    "turbo_decode",
    "srandom_permutation",
]


def parse_generators(text) -> tuple[int, ...]:
    """Parse ``"7,5"`` / ``"(133,171)"`` / ``[7, 5]`` as octal generators."""
    if isinstance(text, str):
        parts = [p for p in text.strip().strip("()").replace(" ", "").split(",") if p]
        return tuple(int(p, 8) for p in parts)
    # integers are taken to be written in octal already, e.g. 133 -> 0o133
    return tuple(int(str(g), 8) for g in text)


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


@dataclass(frozen=True)
class Trellis:
    """Tabulated state machine of a rate-1/n code.

    ``next_state[s, u]``, ``outputs[s, u, j]`` and ``tail_input[s]`` (the
    input that drives the register towards zero).
    """

    next_state: np.ndarray
    outputs: np.ndarray
    tail_input: np.ndarray

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_out(self) -> int:
        return self.outputs.shape[2]


@dataclass(frozen=True)
class ConvCode:
    """Binary convolutional code given by octal generator polynomials.

    For a non-recursive code each generator yields one output. For a
    recursive systematic code ``generators[0]`` is the feedback polynomial
    and the outputs are the systematic bit followed by one parity bit per
    remaining generator. The most significant bit of every generator taps
    the current input.
    """

    generators: tuple[int, ...]
    recursive: bool = False
    systematic: bool = False

    def __post_init__(self):
        gens = tuple(int(g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        if not gens or any(g <= 0 for g in gens):
            raise ConfigurationError(f"invalid generators {self.generators}")
        if self.recursive:
            if len(gens) < 2:
                raise ConfigurationError("a recursive code needs feedback + >=1 feedforward")
            if not (gens[0] >> self.memory) & 1:
                raise ConfigurationError("feedback polynomial must tap the current input")
            object.__setattr__(self, "systematic", True)
        elif len(gens) < 2:
            raise ConfigurationError("need at least two generators for rate < 1")

    @classmethod
    def from_octal(cls, text, recursive: bool = False) -> "ConvCode":
        return cls(parse_generators(text), recursive=recursive)

    @property
    def memory(self) -> int:
        return max(g.bit_length() for g in self.generators) - 1

    @property
    def n_out(self) -> int:
        """``N_C``: coded bits per trellis branch."""
        return len(self.generators)

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.n_out)

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    def label(self) -> str:
        octal = ",".join(format(g, "o") for g in self.generators)
        return f"({octal})_8 {'RSC' if self.recursive else 'NRNSC'}"

    def branches(self, n_info: int) -> int:
        """``L_C`` for ``n_info`` free information bits."""
        return n_info + self.memory

    def coded_length(self, n_info: int) -> int:
        return self.n_out * self.branches(n_info)

    def info_length(self, n_coded: int) -> int:
        if n_coded % self.n_out:
            raise ConfigurationError(f"{n_coded} coded bits is not a multiple of N_C={self.n_out}")
        k = n_coded // self.n_out - self.memory
        if k <= 0:
            raise ConfigurationError(f"frame of {n_coded} bits too short for memory {self.memory}")
        return k

    def effective_rate(self, n_info: int) -> float:
        return n_info / self.coded_length(n_info)

    @cached_property
    def trellis(self) -> Trellis:
        nu = self.memory
        S = self.n_states
        nxt = np.zeros((S, 2), dtype=np.int64)
        out = np.zeros((S, 2, self.n_out), dtype=np.uint8)
        tail = np.zeros(S, dtype=np.int64)
        if self.recursive:
            fb = self.generators[0] & ((1 << nu) - 1)
            ff = self.generators[1:]
        for s in range(S):
            for u in (0, 1):
                if self.recursive:
                    a = u ^ _parity(fb & s)
                    reg = (a << nu) | s
                    bits = [u] + [_parity(g & reg) for g in ff]
                else:
                    reg = (u << nu) | s
                    bits = [_parity(g & reg) for g in self.generators]
                nxt[s, u] = reg >> 1
                out[s, u] = bits
            tail[s] = _parity(fb & s) if self.recursive else 0
        return Trellis(nxt, out, tail)


# --------------------------------------------------------------------------
# encoding
# --------------------------------------------------------------------------


@nb.njit(cache=True)
def _encode_kernel(next_state, outputs, tail_input, info, nu):
    B, K = info.shape
    n = outputs.shape[2]
    T = K + nu
    coded = np.zeros((B, T * n), dtype=np.uint8)
    for b in range(B):
        s = 0
        for t in range(T):
            if t < K:
                u = info[b, t]
            else:
                u = tail_input[s]
            for j in range(n):
                coded[b, t * n + j] = outputs[s, u, j]
            s = next_state[s, u]
    return coded


def conv_encode(code: ConvCode, info_bits) -> np.ndarray:
    """Encode ``info_bits`` (shape ``(K,)`` or ``(B, K)``) with zero termination.

    Returns ``N_C * (K + nu)`` coded bits per frame.
    """
    info = np.asarray(info_bits, dtype=np.uint8)
    single = info.ndim == 1
    info2 = np.atleast_2d(info)
    if info2.shape[1] == 0:
        raise ConfigurationError("empty information word")
    if np.any(info2 > 1):
        raise ConfigurationError("information bits must be 0/1")
    tr = code.trellis
    coded = _encode_kernel(tr.next_state, tr.outputs, tr.tail_input,
                           np.ascontiguousarray(info2), code.memory)
    return coded[0] if single else coded


# --------------------------------------------------------------------------
# BCJR
# --------------------------------------------------------------------------


@nb.njit(cache=True, inline="always")
def _maxstar(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@nb.njit(cache=True)
def _bcjr_kernel(next_state, outputs, tail_input, Lc, La, nu):
    B, T, n = Lc.shape
    S = next_state.shape[0]
    K = T - nu
    Le = np.zeros((B, T, n))
    Lapp = np.zeros((B, K))
    alpha = np.empty((T + 1, S))
    beta = np.empty((T + 1, S))
    gam = np.empty((T, S, 2))
    acc = np.empty((n, 2))  # per-output accumulators [j, bit]
    for b in range(B):
        for t in range(T):
            for s in range(S):
                for u in range(2):
                    if t >= K and u != tail_input[s]:
                        gam[t, s, u] = -np.inf
                        continue
                    g = 0.0
                    if t < K:
                        g += 0.5 * La[b, t] * (1 - 2 * u)
                    for j in range(n):
                        g += 0.5 * Lc[b, t, j] * (1 - 2 * outputs[s, u, j])
                    gam[t, s, u] = g
        for s in range(S):
            alpha[0, s] = -np.inf
            beta[T, s] = -np.inf
        alpha[0, 0] = 0.0
        beta[T, 0] = 0.0
        for t in range(T):
            for s in range(S):
                alpha[t + 1, s] = -np.inf
            for s in range(S):
                a = alpha[t, s]
                if a == -np.inf:
                    continue
                for u in range(2):
                    g = gam[t, s, u]
                    if g == -np.inf:
                        continue
                    s2 = next_state[s, u]
                    alpha[t + 1, s2] = _maxstar(alpha[t + 1, s2], a + g)
            # normalise to keep magnitudes bounded
            m = -np.inf
            for s in range(S):
                if alpha[t + 1, s] > m:
                    m = alpha[t + 1, s]
            for s in range(S):
                alpha[t + 1, s] -= m
        for t in range(T - 1, -1, -1):
            m = -np.inf
            for s in range(S):
                bsum = -np.inf
                for u in range(2):
                    g = gam[t, s, u]
                    if g == -np.inf:
                        continue
                    bsum = _maxstar(bsum, g + beta[t + 1, next_state[s, u]])
                beta[t, s] = bsum
                if bsum > m:
                    m = bsum
            for s in range(S):
                beta[t, s] -= m
        for t in range(T):
            num_u0 = -np.inf
            num_u1 = -np.inf
            acc[:, :] = -np.inf
            for s in range(S):
                a = alpha[t, s]
                if a == -np.inf:
                    continue
                for u in range(2):
                    g = gam[t, s, u]
                    if g == -np.inf:
                        continue
                    bb = beta[t + 1, next_state[s, u]]
                    if bb == -np.inf:
                        continue
                    metric = a + g + bb
                    if u == 0:
                        num_u0 = _maxstar(num_u0, metric)
                    else:
                        num_u1 = _maxstar(num_u1, metric)
                    for j in range(n):
                        c = outputs[s, u, j]
                        excl = metric - 0.5 * Lc[b, t, j] * (1 - 2 * c)
                        acc[j, c] = _maxstar(acc[j, c], excl)
            for j in range(n):
                Le[b, t, j] = acc[j, 0] - acc[j, 1]
            if t < K:
                Lapp[b, t] = num_u0 - num_u1
    return Le, Lapp


def bcjr_decode(code: ConvCode, channel_llrs, priors=None):
    """Exact symbol-wise MAP decoding on the terminated trellis.

    Parameters
    ----------
    code : ConvCode
    channel_llrs : array, shape ``(N_C * L_C,)`` or ``(B, N_C * L_C)``
        Intrinsic LLRs of the coded bits in transmission order.
    priors : array, shape ``(L_C - nu,)`` or ``(B, L_C - nu)``, optional
        A-priori LLRs of the information bits (zero if omitted).

    Returns
    -------
    extrinsic : ndarray, same shape as ``channel_llrs``
        Coded-bit APP LLR minus the bit's own channel LLR.
    info_app : ndarray
        Full APP LLRs of the information bits (prior and channel included).
    """
    Lc = np.asarray(channel_llrs, dtype=np.float64)
    single = Lc.ndim == 1
    Lc2 = np.atleast_2d(Lc)
    n = code.n_out
    if Lc2.shape[1] % n:
        raise ConfigurationError(f"LLR length {Lc2.shape[1]} not a multiple of N_C={n}")
    T = Lc2.shape[1] // n
    K = T - code.memory
    if K <= 0:
        raise ConfigurationError("LLR sequence shorter than the termination tail")
    if not np.all(np.isfinite(Lc2)):
        raise ConfigurationError("non-finite channel LLR")
    if priors is None:
        La = np.zeros((Lc2.shape[0], K))
    else:
        La = np.atleast_2d(np.asarray(priors, dtype=np.float64))
        if La.shape != (Lc2.shape[0], K):
            raise ConfigurationError(f"priors shape {La.shape} != {(Lc2.shape[0], K)}")
        if not np.all(np.isfinite(La)):
            raise ConfigurationError("non-finite prior LLR")
    tr = code.trellis
    Le, Lapp = _bcjr_kernel(tr.next_state, tr.outputs, tr.tail_input,
                            np.ascontiguousarray(Lc2.reshape(-1, T, n)),
                            np.ascontiguousarray(La), code.memory)
    Le = Le.reshape(Lc2.shape[0], -1)
    if single:
        return Le[0], Lapp[0]
    return Le, Lapp


# --------------------------------------------------------------------------
# weight spectrum
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightSpectrum:
    """Codeword weight multiplicities ``A_w`` of a terminated frame."""

    entries: dict
    w_max: int
    frame_branches: int

    @property
    def d_hmin(self) -> int:
        ws = [w for w, a in self.entries.items() if a > 0]
        if not ws:
            raise ValueError(f"no nonzero codeword of weight <= {self.w_max}")
        return min(ws)

    def __getitem__(self, w: int) -> int:
        return self.entries.get(w, 0)

    def items(self):
        return sorted((w, a) for w, a in self.entries.items() if a > 0)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["w", "A_w"])
            for w, a in self.items():
                writer.writerow([w, a])


def weight_spectrum(code: ConvCode, w_max: int, frame_branches: int,
                    max_cells: int = 50_000_000) -> WeightSpectrum:
    """Exact weight enumeration of the zero-terminated code by trellis DP.

    ``frame_branches`` is ``L_C`` (tail included). Multiplicities are exact
    Python integers.
    """
    tr = code.trellis
    S = tr.n_states
    if frame_branches <= code.memory:
        raise ConfigurationError("frame shorter than the termination tail")
    if S * (w_max + 1) * frame_branches > max_cells:
        raise ResourceError(
            f"weight enumeration needs {S * (w_max + 1) * frame_branches} cells "
            f"(cap {max_cells}); lower w_max or frame_branches"
        )
    K = frame_branches - code.memory
    wt = tr.outputs.sum(axis=2).astype(int)
    counts = np.zeros((S, w_max + 1), dtype=object)
    counts[0, 0] = 1
    for t in range(frame_branches):
        new = np.zeros_like(counts)
        for s in range(S):
            row = counts[s]
            if not any(row):
                continue
            inputs = (0, 1) if t < K else (int(tr.tail_input[s]),)
            for u in inputs:
                s2 = tr.next_state[s, u]
                d = wt[s, u]
                if d > w_max:
                    continue
                new[s2, d:] += row[: w_max + 1 - d]
        counts = new
    entries = {w: int(counts[0, w]) for w in range(1, w_max + 1) if counts[0, w]}
    return WeightSpectrum(entries, w_max, frame_branches)


# --------------------------------------------------------------------------
# turbo codes
# --------------------------------------------------------------------------


def srandom_permutation(n: int, spread: int, rng, attempts: int = 200) -> np.ndarray:
    """Classical S-random permutation (|i-j| < S => |P(i)-P(j)| >= S).

    Falls back to progressively smaller spreads if ``attempts`` restarts
    are not enough.
    """
    rng = np.random.default_rng(rng)
    while spread >= 1:
        for _ in range(attempts):
            pool = list(rng.permutation(n))
            out = []
            ok = True
            for _i in range(n):
                for idx, cand in enumerate(pool):
                    if all(abs(cand - p) >= spread for p in out[-(spread - 1):] if spread > 1):
                        out.append(cand)
                        pool.pop(idx)
                        break
                else:
                    ok = False
                    break
            if ok:
                return np.array(out, dtype=np.int64)
        spread -= 1
    return rng.permutation(n).astype(np.int64)


@dataclass(frozen=True)
class TurboCode:
    """Parallel concatenation of two identical RSC codes.

    The parity stream of the second encoder is de-interleaved with
    ``inverse(permutation)`` before multiplexing, so bit ``j`` of both
    parity streams relates to information bit ``j``. With ``punctured``
    the parity of encoder 1 is kept on even ``j`` and that of encoder 2 on
    odd ``j`` (rate ~1/2); all tail bits are transmitted.

    Codeword layout: per information position ``j`` the systematic bit
    followed by the kept parity bit(s); then the tails of encoder 1
    (systematic, parity per branch) and of encoder 2.
    """

    constituent: ConvCode
    permutation: np.ndarray = field(repr=False)
    punctured: bool = True
    deinterleave_parity2: bool = True

    def __post_init__(self):
        c = self.constituent
        if not c.recursive or c.n_out != 2:
            raise ConfigurationError("turbo constituents must be rate-1/2 RSC codes")
        perm = np.asarray(self.permutation, dtype=np.int64)
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ConfigurationError("turbo interleaver is not a bijection")
        object.__setattr__(self, "permutation", perm)

    @classmethod
    def build(cls, constituent: ConvCode, n_coded: int, rng=0, punctured: bool = True):
        """Size the turbo interleaver so the codeword has ``n_coded`` bits."""
        nu = constituent.memory
        per_info = 2 if punctured else 3
        k, rem = divmod(n_coded - 4 * nu, per_info)
        if rem or k <= 0:
            raise ConfigurationError(
                f"cannot build a turbo codeword of {n_coded} bits "
                f"({per_info} bits/info bit + {4 * nu} tail bits)"
            )
        spread = max(1, int(np.sqrt(k / 2)))
        return cls(constituent, srandom_permutation(k, spread, rng), punctured)

    @property
    def n_info(self) -> int:
        return self.permutation.size

    @property
    def memory(self) -> int:
        return self.constituent.memory

    @property
    def n_coded(self) -> int:
        return (2 if self.punctured else 3) * self.n_info + 4 * self.memory

    @property
    def rate(self) -> float:
        return self.n_info / self.n_coded

    @cached_property
    def inverse_permutation(self) -> np.ndarray:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.n_info)
        return inv

    @cached_property
    def layout(self):
        """Index arrays locating each stream inside the codeword.

        Returns a dict with ``sys``, ``par1``, ``par2`` (positions of the
        K payload bits, -1 where punctured) and tail position arrays
        ``tail1`` / ``tail2`` of shape ``(nu, 2)`` (systematic, parity).
        """
        K, nu = self.n_info, self.memory
        sys_pos = np.empty(K, dtype=np.int64)
        p1 = np.full(K, -1, dtype=np.int64)
        p2 = np.full(K, -1, dtype=np.int64)
        pos = 0
        for j in range(K):
            sys_pos[j] = pos
            pos += 1
            if not self.punctured or j % 2 == 0:
                p1[j] = pos
                pos += 1
            if not self.punctured or j % 2 == 1:
                p2[j] = pos
                pos += 1
        tail1 = np.arange(pos, pos + 2 * nu).reshape(nu, 2)
        tail2 = np.arange(pos + 2 * nu, pos + 4 * nu).reshape(nu, 2)
        return {"sys": sys_pos, "par1": p1, "par2": p2, "tail1": tail1, "tail2": tail2}


def turbo_encode(code: TurboCode, info_bits) -> np.ndarray:
    """Encode ``(K,)`` or ``(B, K)`` information bits; see :class:`TurboCode`."""
    info = np.atleast_2d(np.asarray(info_bits, dtype=np.uint8))
    single = np.asarray(info_bits).ndim == 1
    K = code.n_info
    if info.shape[1] != K:
        raise ConfigurationError(f"turbo code expects {K} info bits, got {info.shape[1]}")
    nu = code.memory
    c1 = conv_encode(code.constituent, info).reshape(info.shape[0], K + nu, 2)
    c2 = conv_encode(code.constituent, info[:, code.permutation]).reshape(info.shape[0], K + nu, 2)
    par2 = c2[:, :K, 1]
    if code.deinterleave_parity2:
        par2_aligned = np.empty_like(par2)
        par2_aligned[:, code.permutation] = par2
    else:
        par2_aligned = par2
    lay = code.layout
    out = np.zeros((info.shape[0], code.n_coded), dtype=np.uint8)
    out[:, lay["sys"]] = info
    keep1 = lay["par1"] >= 0
    keep2 = lay["par2"] >= 0
    out[:, lay["par1"][keep1]] = c1[:, :K, 1][:, keep1]
    out[:, lay["par2"][keep2]] = par2_aligned[:, keep2]
    out[:, lay["tail1"].ravel()] = c1[:, K:, :].reshape(info.shape[0], -1)
    out[:, lay["tail2"].ravel()] = c2[:, K:, :].reshape(info.shape[0], -1)
    return out[0] if single else out


def turbo_decode(code: TurboCode, channel_llrs, priors=None, n_inner: int = 4, state=None,
                 return_state: bool = False):
    """Iterative two-constituent decoding built on :func:`bcjr_decode`.

    Punctured positions enter with zero channel LLR. Returns the extrinsic
    LLRs of every transmitted coded bit (APP minus its channel LLR) and the
    information-bit APP LLRs.

    ``state`` warm-starts the extrinsic passed from the second decoder to
    the first (shape ``(B, K)``, natural order); with ``return_state`` the
    final value is returned as a third output so an outer detection loop
    can carry it across its iterations.
    """
    if n_inner < 1:
        raise ConfigurationError("n_inner must be >= 1")
    Lc = np.atleast_2d(np.asarray(channel_llrs, dtype=np.float64))
    single = np.asarray(channel_llrs).ndim == 1
    if Lc.shape[1] != code.n_coded:
        raise ConfigurationError(f"expected {code.n_coded} LLRs, got {Lc.shape[1]}")
    if not np.all(np.isfinite(Lc)):
        raise ConfigurationError("non-finite channel LLR")
    B = Lc.shape[0]
    K, nu = code.n_info, code.memory
    perm = code.permutation
    lay = code.layout
    La = np.zeros((B, K)) if priors is None else np.atleast_2d(np.asarray(priors, float))

    def gather(pos):
        out = np.zeros((B, pos.size))
        keep = pos >= 0
        out[:, keep] = Lc[:, pos[keep]]
        return out

    Lsys = Lc[:, lay["sys"]]
    Lp1 = gather(lay["par1"])
    Lp2_aligned = gather(lay["par2"])
    Lp2 = Lp2_aligned[:, perm] if code.deinterleave_parity2 else Lp2_aligned
    t1 = Lc[:, lay["tail1"]]
    t2 = Lc[:, lay["tail2"]]

    in1 = np.empty((B, K + nu, 2))
    in1[:, :K, 0] = Lsys
    in1[:, :K, 1] = Lp1
    in1[:, K:, :] = t1
    in2 = np.empty((B, K + nu, 2))
    in2[:, :K, 0] = Lsys[:, perm]
    in2[:, :K, 1] = Lp2
    in2[:, K:, :] = t2
    in1 = in1.reshape(B, -1)
    in2 = in2.reshape(B, -1)

    e21 = np.zeros((B, K)) if state is None else np.array(np.atleast_2d(state), dtype=float)
    for _ in range(n_inner):
        le1, app1 = bcjr_decode(code.constituent, in1, La + e21)
        e12 = app1 - La - e21 - Lsys
        le2, app2 = bcjr_decode(code.constituent, in2, e12[:, perm])
        e21_int = app2 - e12[:, perm] - Lsys[:, perm]
        e21 = np.empty_like(e21_int)
        e21[:, perm] = e21_int
    app = La + Lsys + e12 + e21

    le1 = le1.reshape(B, K + nu, 2)
    le2 = le2.reshape(B, K + nu, 2)
    ext = np.zeros((B, code.n_coded))
    ext[:, lay["sys"]] = app - Lsys
    keep1 = lay["par1"] >= 0
    ext[:, lay["par1"][keep1]] = le1[:, :K, 1][:, keep1]
    p2_ext = le2[:, :K, 1]
    if code.deinterleave_parity2:
        aligned = np.empty_like(p2_ext)
        aligned[:, perm] = p2_ext
        p2_ext = aligned
    keep2 = lay["par2"] >= 0
    ext[:, lay["par2"][keep2]] = p2_ext[:, keep2]
    ext[:, lay["tail1"].ravel()] = le1[:, K:, :].reshape(B, -1)
    ext[:, lay["tail2"].ravel()] = le2[:, K:, :].reshape(B, -1)
    if single:
        return (ext[0], app[0], e21[0]) if return_state else (ext[0], app[0])
    return (ext, app, e21) if return_state else (ext, app)
