"""Exhaustive APP (soft-in soft-out) detection over the precoded MIMO channel.

Bit ``q = l * m + b`` of a precoding time period is label bit ``b`` of the
symbol on precoder input ``l``. Soft values are LLRs ``ln P(0)/P(1)``;
probabilities are clipped to ``[1e-12, 1 - 1e-12]`` (LLR magnitude at most
``LLR_CLIP``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, ResourceError
from .modem import Constellation

__all__ = [
    "CandidateTable",
    "LLR_CLIP",
    "PROB_CLIP",
    "precompute_candidates",
    "candidate_symbols",
    "app_detect",
    "app_detect_llr",
    "batch_candidates",
    "batch_app_llr",
    "batch_distances",
    "prob_to_llr",
    "llr_to_prob",
]

PROB_CLIP = 1e-12
LLR_CLIP = float(np.log((1 - PROB_CLIP) / PROB_CLIP))


def prob_to_llr(p1) -> np.ndarray:
    """``P(c=1)`` -> LLR ``ln P(0)/P(1)`` with clipping."""
    p1 = np.clip(np.asarray(p1, dtype=float), PROB_CLIP, 1 - PROB_CLIP)
    return np.log1p(-p1) - np.log(p1)


def llr_to_prob(llr) -> np.ndarray:
    """LLR -> ``P(c=1)``."""
    return 1.0 / (1.0 + np.exp(np.clip(llr, -700, 700)))


def candidate_symbols(c: Constellation, n_inputs: int, cap: int = 16):
    """All ``2^(m n_inputs)`` symbol vectors and their labels."""
    q = c.m * n_inputs
    if q > cap:
        raise ResourceError(f"m*N_t = {q} exceeds the detector cap {cap} (2^{q} candidates)")
    idx = np.arange(1 << q)
    labels = ((idx[:, None] >> np.arange(q - 1, -1, -1)) & 1).astype(np.uint8)
    sym_idx = labels.reshape(-1, n_inputs, c.m).astype(np.int64) @ (
        1 << np.arange(c.m - 1, -1, -1))
    return c.points[sym_idx], labels


@dataclass(frozen=True)
class CandidateTable:
    """Noiseless received points ``z S H_k`` for every label vector."""

    points: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def n_bits(self) -> int:
        return self.labels.shape[1]


def precompute_candidates(c: Constellation, S, H_k, cap: int = 16) -> CandidateTable:
    """Enumerate ``z S H_k`` for all ``2^(m N_t)`` inputs ``z``."""
    S = np.asarray(S, dtype=complex)
    H_k = np.asarray(H_k, dtype=complex)
    Z, labels = candidate_symbols(c, S.shape[0], cap)
    return CandidateTable(Z @ S @ H_k, labels)


def app_detect_llr(y, table: CandidateTable, prior_llr, N0: float) -> np.ndarray:
    """Extrinsic LLRs of the ``m N_t`` bits of one precoding time period."""
    y = np.asarray(y, dtype=complex)
    if not np.all(np.isfinite(y)):
        raise ConfigurationError("non-finite observation")
    La = np.clip(np.asarray(prior_llr, dtype=float), -LLR_CLIP, LLR_CLIP)
    signs = 1.0 - 2.0 * table.labels
    metric = -np.sum(np.abs(y - table.points) ** 2, axis=1) / (2.0 * N0) + 0.5 * signs @ La
    out = np.empty(table.n_bits)
    for q in range(table.n_bits):
        own = 0.5 * signs[:, q] * La[q]
        m = metric - own
        zero = table.labels[:, q] == 0
        out[q] = logsumexp(m[zero]) - logsumexp(m[~zero])
    return np.clip(out, -LLR_CLIP, LLR_CLIP)


def app_detect(y, table: CandidateTable, priors, N0: float) -> np.ndarray:
    """Extrinsic probabilities ``xi(c_q = 1)`` given prior probabilities ``pi(c_q = 1)``."""
    return llr_to_prob(app_detect_llr(y, table, prob_to_llr(priors), N0))


# --------------------------------------------------------------------------
# batched kernels used by the simulator
# --------------------------------------------------------------------------


def batch_candidates(Z: np.ndarray, S: np.ndarray, Hext: np.ndarray) -> np.ndarray:
    """``(F, N_c, M, N_r)`` candidate points from ``Hext`` of shape ``(F, N_c, N_t, N_r)``."""
    ZS = Z @ S
    return np.einsum("mi,fkir->fkmr", ZS, Hext, optimize=True)


@nb.njit(cache=True)
def _distance_kernel(y, pts, block_of, inv2n0):
    F, P, R = y.shape
    M = pts.shape[2]
    D = np.empty((F, P, M))
    for f in range(F):
        for p in range(P):
            k = block_of[p]
            for x in range(M):
                acc = 0.0
                for r in range(R):
                    d = y[f, p, r] - pts[f, k, x, r]
                    acc += d.real * d.real + d.imag * d.imag
                D[f, p, x] = -acc * inv2n0
    return D


@nb.njit(cache=True)
def _app_kernel(D, labels, La, clip):
    F, P, M = D.shape
    Q = labels.shape[1]
    out = np.empty((F, P, Q))
    metric = np.empty(M)
    best = np.empty((Q, 2))
    acc = np.empty((Q, 2))
    for f in range(F):
        for p in range(P):
            gmax = -np.inf
            for q in range(Q):
                best[q, 0] = -np.inf
                best[q, 1] = -np.inf
                acc[q, 0] = 0.0
                acc[q, 1] = 0.0
            for x in range(M):
                v = D[f, p, x]
                for q in range(Q):
                    if labels[x, q] == 0:
                        v += 0.5 * La[f, p, q]
                    else:
                        v -= 0.5 * La[f, p, q]
                metric[x] = v
                if v > gmax:
                    gmax = v
                for q in range(Q):
                    c = labels[x, q]
                    if v > best[q, c]:
                        best[q, c] = v
            for x in range(M):
                e = np.exp(metric[x] - gmax)
                for q in range(Q):
                    acc[q, labels[x, q]] += e
            for q in range(Q):
                l0 = 0.0
                l1 = 0.0
                # fall back to an exact rescaled sum when the shared scale underflows
                if best[q, 0] - gmax > -600.0:
                    l0 = np.log(acc[q, 0]) + gmax
                else:
                    s = 0.0
                    for x in range(M):
                        if labels[x, q] == 0:
                            s += np.exp(metric[x] - best[q, 0])
                    l0 = np.log(s) + best[q, 0]
                if best[q, 1] - gmax > -600.0:
                    l1 = np.log(acc[q, 1]) + gmax
                else:
                    s = 0.0
                    for x in range(M):
                        if labels[x, q] == 1:
                            s += np.exp(metric[x] - best[q, 1])
                    l1 = np.log(s) + best[q, 1]
                v = l0 - l1 - La[f, p, q]
                if v > clip:
                    v = clip
                elif v < -clip:
                    v = -clip
                out[f, p, q] = v
    return out


def batch_distances(y, pts, block_of, N0: float) -> np.ndarray:
    """Gaussian log-likelihoods ``-|y - x|^2 / (2 N0)`` for every candidate.

    ``y`` is ``(F, P, N_r)``, ``pts`` ``(F, N_c, M, N_r)`` and ``block_of``
    maps each period to its extended channel block.
    """
    return _distance_kernel(np.ascontiguousarray(y), np.ascontiguousarray(pts),
                            np.ascontiguousarray(block_of, dtype=np.int64), 1.0 / (2.0 * N0))


def batch_app_llr(D, labels, prior_llr) -> np.ndarray:
    """Extrinsic LLRs ``(F, P, Q)`` from precomputed log-likelihoods ``D``."""
    La = np.clip(np.ascontiguousarray(prior_llr, dtype=np.float64), -LLR_CLIP, LLR_CLIP)
    return _app_kernel(D, np.ascontiguousarray(labels), La, LLR_CLIP)
