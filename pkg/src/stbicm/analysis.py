"""Closed-form performance analysis: Singleton bounds, coding gains, exact PEPs.

Pairwise decision variable: ``X = sum_k LLR_k`` with, given the channel,
``LLR_k ~ N(R_k / 2N0, R_k / N0)``. Averaging over Rayleigh fading gives the
two-sided Laplace transform

    phi(s) = E[exp(-s X)] = prod_v (1 + delta_v^2 s (1 - s) / (2 N0))^(-n_r lambda_v)

with poles ``beta_v = (1 +- sqrt(1 + 8 N0 / delta_v^2)) / 2``. The pairwise
error probability ``P(X < 0)`` is minus the sum of the residues of
``phi(s) / s`` at the right-half-plane poles, evaluated from the partial
fraction expansion of ``phi``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .errors import ConfigurationError
from .precode import PrecoderMatrix

__all__ = [
    "PairwiseConfig",
    "EigenSpectrum",
    "GOLDEN_ALPHA",
    "singleton_diversity",
    "singleton_table",
    "optimal_spreading",
    "eigen_spectrum",
    "merge_eigenvalues",
    "partial_fractions",
    "pep_exact",
    "pep_asymptote",
    "pep_asymptotic_gain",
    "ideal_pep",
    "optimal_precoded_gain",
    "most_even_partition",
    "precoding_gain_db",
    "gain_table",
    "golden_gain",
    "EquiDistributedModel",
    "union_bound_fer",
    "pep_monte_carlo",
]

GOLDEN_ALPHA = (0.277, 0.723)


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)).limit_denominator(10**6)


# --------------------------------------------------------------------------
# Singleton bound and spreading factor
# --------------------------------------------------------------------------


def singleton_diversity(rate, n_t: int, n_c: int, n_r: int, s: int,
                        d_hmin: int | None = None) -> int:
    """Largest post-decoding diversity with spreading ``s``.

    ``min(s n_r floor(n_c n_t (1 - R_C) / s + 1), n_t n_c n_r, s n_r d_Hmin)``;
    the last term is dropped when ``d_hmin`` is ``None``.
    """
    if s < 1 or (n_t * n_c) % s:
        raise ConfigurationError(f"s={s} must divide n_t*n_c={n_t * n_c}")
    R = _frac(rate)
    if not 0 < R < 1:
        raise ConfigurationError(f"code rate must be in (0, 1), got {rate}")
    blocks = Fraction(n_c * n_t, s) * (1 - R) + 1
    terms = [s * n_r * math.floor(blocks), n_t * n_c * n_r]
    if d_hmin is not None:
        terms.append(s * n_r * d_hmin)
    return min(terms)


def singleton_table(rate, n_r: int, n_c: int, nt_max: int, s_max: int | None = None,
                    d_hmin: int | None = None) -> dict:
    """``{(n_t, s): (diversity, full)}`` for every ``s`` dividing ``n_t n_c``."""
    s_max = s_max if s_max is not None else nt_max
    out = {}
    for n_t in range(1, nt_max + 1):
        for s in range(1, s_max + 1):
            if (n_t * n_c) % s == 0:
                d = singleton_diversity(rate, n_t, n_c, n_r, s, d_hmin)
                out[(n_t, s)] = (d, d == n_t * n_c * n_r)
    return out


def optimal_spreading(rate, n_t: int, n_c: int) -> int:
    """Smallest divisor ``s`` of ``n_t n_c`` with ``s >= R_C n_c n_t``."""
    R = _frac(rate)
    total = n_t * n_c
    for s in range(1, total + 1):
        if total % s == 0 and s >= R * total:
            return s
    return total


# --------------------------------------------------------------------------
# pairwise configurations and eigenvalue spectra
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PairwiseConfig:
    """Distances of the ``w`` differing bits and the channel state of each.

    ``states[i]`` labels the independent channel state (block, antenna or
    precoder row) carrying bit ``i``; ``None`` means every bit sees its own
    state (ergodic channel).
    """

    distances: tuple
    states: tuple | None = None

    def __post_init__(self):
        d = tuple(float(x) for x in self.distances)
        if not d or any(x <= 0 for x in d):
            raise ConfigurationError("distances must be positive")
        object.__setattr__(self, "distances", d)
        if self.states is not None:
            st = tuple(self.states)
            if len(st) != len(d):
                raise ConfigurationError("one state label per distance is required")
            object.__setattr__(self, "states", st)

    @property
    def w(self) -> int:
        return len(self.distances)

    def gamma2(self) -> dict:
        """``gamma^2`` per state: sum of the squared distances it carries."""
        if self.states is None:
            return {i: d * d for i, d in enumerate(self.distances)}
        out: dict = {}
        for st, d in zip(self.states, self.distances):
            out[st] = out.get(st, 0.0) + d * d
        return out

    def delta_lambda(self):
        """Distinct squared distances per state with their frequencies."""
        return merge_eigenvalues(list(self.gamma2().values()))


@dataclass(frozen=True)
class EigenSpectrum:
    """Eigenvalues ``theta[k, t, u]`` of the per-block distance matrices."""

    eigenvalues: np.ndarray = field(repr=False)

    def nonzero(self, rtol: float = 1e-12) -> np.ndarray:
        ev = np.real(self.eigenvalues).ravel()
        top = ev.max() if ev.size else 0.0
        return ev[ev > rtol * top]

    def delta_lambda(self):
        return merge_eigenvalues(self.nonzero())

    @property
    def trace(self) -> float:
        return float(np.real(self.eigenvalues).sum())


def merge_eigenvalues(values, rtol: float = 1e-9):
    """Group squared distances equal within ``rtol * max`` (confluent limit).

    Returns ``(delta2, lam)`` arrays sorted by value.
    """
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        raise ConfigurationError("no non-null distance")
    if vals[0] <= 0:
        raise ConfigurationError("squared distances must be positive")
    tol = rtol * vals[-1]
    groups: list[list[float]] = [[vals[0]]]
    for v in vals[1:]:
        if v - groups[-1][0] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    delta2 = np.array([np.mean(g) for g in groups])
    lam = np.array([len(g) for g in groups], dtype=np.int64)
    return delta2, lam


def eigen_spectrum(P: PrecoderMatrix | np.ndarray, gamma2, n_t: int | None = None,
                   n_s: int | None = None) -> EigenSpectrum:
    """Eigenvalues of ``Sigma_k^[t] = sum_l gamma_{k,l}^2 sum_i S_l^[t][i]* S_l^[t][i]``.

    ``gamma2`` has shape ``(N_c, N_t)`` (or ``(N_t,)`` for one block).
    ``S_l^[t][i]`` is the ``i``-th length-``n_t`` sub-part of the ``t``-th
    sub-part of row ``l``.
    """
    if isinstance(P, PrecoderMatrix):
        S, n_t, n_s = P.S, P.n_t, P.n_s
    else:
        S = np.asarray(P, dtype=complex)
        if n_t is None or n_s is None:
            raise ConfigurationError("n_t and n_s are required for a raw matrix")
    N = S.shape[0]
    g2 = np.atleast_2d(np.asarray(gamma2, dtype=float))
    if g2.shape[1] != N:
        raise ConfigurationError(f"gamma2 needs {N} entries per block")
    n_sub = N // (n_s * n_t)
    # parts[l, t, i, :] is S_l^[t][i]
    parts = S.reshape(N, n_s, n_sub, n_t)
    outer = np.einsum("ltia,ltib->ltab", parts.conj(), parts)
    sigma = np.einsum("kl,ltab->ktab", g2, outer)
    return EigenSpectrum(np.linalg.eigvalsh(sigma))


# --------------------------------------------------------------------------
# exact PEP through partial fractions
# --------------------------------------------------------------------------


def _poles(delta2, lam, n_r, N0, one, sqrt):
    """Right and left poles with multiplicities and the leading constant."""
    right, left, const = [], [], one
    for d2, l in zip(delta2, lam):
        d2 = one * d2
        mu = int(n_r * l)
        r = sqrt(1 + 8 * N0 / d2)
        right.append(((1 + r) / 2, mu))
        left.append(((1 - r) / 2, mu))
        const *= (-2 * N0 / d2) ** mu
    return right, left, const


def _laurent(pole, mu, others, const, one):
    """Coefficients ``A_i`` (``i = 1..mu``) of ``A_i / (s - pole)^i``.

    Taylor expansion of ``const * prod_q (pole + eps - q)^(-mu_q)`` around
    ``eps = 0`` through the exponential of its logarithmic series.
    """
    lead = const
    for q, mq in others:
        lead *= (pole - q) ** (-mq)
    L = [0 * one] * mu
    for j in range(1, mu):
        acc = 0 * one
        for q, mq in others:
            acc += mq * (-1) ** (j + 1) / (j * (pole - q) ** j)
        L[j] = -acc
    f = [one] + [0 * one] * (mu - 1)
    for n in range(1, mu):
        acc = 0 * one
        for j in range(1, n + 1):
            acc += j * L[j] * f[n - j]
        f[n] = acc / n
    # eps^k term multiplies (s - pole)^(k - mu) -> A_{mu - k}
    return [lead * f[mu - i] for i in range(1, mu + 1)]


def partial_fractions(delta2, lam, n_r: int, N0: float, use_mp: bool = False):
    """Full partial fraction expansion of ``phi``.

    Returns a list of ``(pole, [A_1, ..., A_mu], is_right)``.
    """
    if use_mp:
        one, sqrt = mpmath.mpf(1), mpmath.sqrt
        N0 = mpmath.mpf(N0)
    else:
        one, sqrt = 1.0, math.sqrt
    right, left, const = _poles(delta2, lam, n_r, N0, one, sqrt)
    allp = [(p, m, True) for p, m in right] + [(p, m, False) for p, m in left]
    out = []
    for idx, (p, m, is_right) in enumerate(allp):
        others = [(q, mq) for j, (q, mq, _) in enumerate(allp) if j != idx]
        out.append((p, _laurent(p, m, others, const, one), is_right))
    return out


def _pep_terms(delta2, lam, n_r, N0, use_mp):
    """Terms ``(-1)^i A_{p,i} / p^i`` over right poles (their sum is the PEP)."""
    one, sqrt = (mpmath.mpf(1), mpmath.sqrt) if use_mp else (1.0, math.sqrt)
    N0 = mpmath.mpf(N0) if use_mp else N0
    right, left, const = _poles(delta2, lam, n_r, N0, one, sqrt)
    allp = right + left
    terms = []
    for idx, (p, m) in enumerate(right):
        others = [q for j, q in enumerate(allp) if j != idx]
        A = _laurent(p, m, others, const, one)
        terms.extend((-1) ** i * A[i - 1] / p**i for i in range(1, m + 1))
    return terms


def _spec_to_delta(spec):
    if isinstance(spec, (PairwiseConfig, EigenSpectrum)):
        return spec.delta_lambda()
    delta2, lam = spec
    return merge_eigenvalues(np.repeat(np.asarray(delta2, float), np.asarray(lam, int)))


@lru_cache(maxsize=200_000)
def _pep_cached(key_d2: tuple, key_lam: tuple, n_r: int, N0: float) -> float:
    terms = _pep_terms(key_d2, key_lam, n_r, N0, False)
    total = math.fsum(terms)
    scale = math.fsum(abs(t) for t in terms)
    if math.isfinite(total) and total > 0 and scale <= 1e6 * total:
        return float(total)
    # cancellation: redo with enough extra digits
    lost = 40 if not (math.isfinite(total) and total > 0) else int(math.log10(scale / total))
    dps = 20 + lost
    for _ in range(6):
        with mpmath.workdps(dps):
            mp_terms = _pep_terms(key_d2, key_lam, n_r, N0, True)
            val = mpmath.fsum(mp_terms)
            big = mpmath.fsum(abs(t) for t in mp_terms)
            if val > 0 and big < val * mpmath.mpf(10) ** (dps - 20):
                return float(val)
        dps *= 2
    raise ArithmeticError("partial fraction evaluation did not converge")


def pep_exact(spec, n_r: int, N0: float) -> float:
    """Exact pairwise error probability for Rayleigh fading.

    ``spec`` is a :class:`PairwiseConfig` (ergodic or block-fading
    grouping), an :class:`EigenSpectrum` (precoded), or a ``(delta2,
    lam)`` pair of distinct squared distances and their multiplicities.
    """
    if not N0 > 0:
        raise ConfigurationError("N0 must be positive")
    delta2, lam = _spec_to_delta(spec)
    return _pep_cached(tuple(float(x) for x in delta2), tuple(int(x) for x in lam),
                       int(n_r), float(N0))


def pep_asymptote(spec, n_r: int, N0: float) -> float:
    """High-SNR equivalent ``C(2N-1, N) prod (2 N0 / delta^2)^(n_r lambda)``."""
    delta2, lam = _spec_to_delta(spec)
    N = int(n_r * lam.sum())
    return math.comb(2 * N - 1, N) * float(np.prod((2 * N0 / delta2) ** (n_r * lam)))


def ideal_pep(sum_d2: float, diversity_order: int, N0: float, n_t: int, n_c: int) -> float:
    """BPSK-like error probability over a diversity-``L`` Rayleigh channel.

    The squared distance ``sum_d2`` is shared equally by the ``n_t n_c``
    channel states; ``L = diversity_order``.
    """
    if sum_d2 <= 0:
        raise ConfigurationError("sum of squared distances must be positive")
    L = int(diversity_order)
    mu = (1.0 + 8.0 * N0 * n_t * n_c / sum_d2) ** -0.5
    lo, hi = (1 - mu) / 2, (1 + mu) / 2
    return lo**L * math.fsum(math.comb(L - 1 + k, k) * hi**k for k in range(L))


# --------------------------------------------------------------------------
# coding gains
# --------------------------------------------------------------------------


def optimal_precoded_gain(gamma2_states, n_s: int) -> float:
    """Best gain of an ideal precoder spanning ``n_s`` channel realizations.

    ``gamma2_states`` has shape ``(n_c, n_t)``; realizations are merged in
    consecutive groups of ``n_s``:
    ``prod_K (sum_{l in K} gamma^2 / (n_t n_s))^(1 / N_c)``.
    """
    g = np.asarray(gamma2_states, dtype=float)
    n_c, n_t = g.shape
    if n_c % n_s:
        raise ConfigurationError(f"n_s={n_s} must divide n_c={n_c}")
    Nc = n_c // n_s
    sums = g.reshape(Nc, n_s * n_t).sum(axis=1) / (n_t * n_s)
    return float(np.prod(sums) ** (1.0 / Nc))


def golden_gain(gamma2, alpha=GOLDEN_ALPHA) -> float:
    """Coding gain of the Golden code for row distances ``gamma_1..gamma_4``."""
    g1, g2, g3, g4 = (float(x) for x in gamma2)
    a1, a2 = alpha
    return math.sqrt((a1 * (g1 + g4) + a2 * (g2 + g3)) * (a1 * (g2 + g3) + a2 * (g1 + g4)))


def pep_asymptotic_gain(spec, mode: str, n_r: int = 1, n_t: int | None = None,
                        n_c: int | None = None, n_s: int = 1):
    """``(diversity, coding gain)`` of a pairwise error event.

    mode ``ergodic``: geometric mean of the ``d_k^2``;
    ``blockfading``: geometric mean of the per-state ``gamma^2``;
    ``precoded``: geometric mean of the non-null eigenvalues (``spec`` an
    :class:`EigenSpectrum`);
    ``optimal``: ideal precoder over ``n_s`` realizations (``spec`` a
    ``(n_c, n_t)`` array of ``gamma^2``);
    ``ideal``: ``sum d^2 / (n_t n_c)`` with diversity ``n_t n_c n_r``;
    ``golden``: Golden-code gain from four row ``gamma^2`` values.
    """
    if mode == "ergodic":
        d2 = np.asarray(spec.distances) ** 2
        return d2.size * n_r, float(np.exp(np.mean(np.log(d2))))
    if mode == "blockfading":
        if not isinstance(spec, PairwiseConfig) or spec.states is None:
            raise ConfigurationError("blockfading gain needs a state grouping")
        g = np.array(list(spec.gamma2().values()))
        return g.size * n_r, float(np.exp(np.mean(np.log(g))))
    if mode == "precoded":
        if not isinstance(spec, EigenSpectrum):
            raise ConfigurationError("precoded gain needs an EigenSpectrum")
        ev = spec.nonzero()
        return ev.size * n_r, float(np.exp(np.mean(np.log(ev))))
    if mode == "optimal":
        g = np.asarray(spec, dtype=float)
        return g.size * n_r, optimal_precoded_gain(g, n_s)
    if mode == "ideal":
        if n_t is None or n_c is None:
            raise ConfigurationError("ideal gain needs n_t and n_c")
        if isinstance(spec, PairwiseConfig):
            total = float(np.sum(np.square(spec.distances)))
        else:
            total = float(np.sum(spec))
        return n_t * n_c * n_r, total / (n_t * n_c)
    if mode == "golden":
        return 4 * n_r, golden_gain(spec)
    raise ConfigurationError(f"unknown gain mode {mode!r}")


def most_even_partition(w: int, parts: int) -> list[int]:
    """Split ``w`` into ``parts`` integers differing by at most one."""
    q, r = divmod(w, parts)
    return [q + 1] * r + [q] * (parts - r)


def precoding_gain_db(w: int, n_t: int) -> float:
    """Best BPSK precoding gain over an unprecoded equidistributed scheme (dB)."""
    if w % n_t == 0:
        return 0.0
    kappa = most_even_partition(w, n_t)
    geo = math.exp(sum(math.log(k) for k in kappa) / n_t)
    # the ratio is >= 1 (AM-GM); clamp rounding noise at the even partitions
    return max(0.0, 10 * math.log10((w / n_t) / geo))


def gain_table(nt_range, w_range) -> dict:
    """``{(n_t, w): gain_dB}`` for ``w >= n_t`` (cells with ``w < n_t`` absent)."""
    return {(n_t, w): precoding_gain_db(w, n_t)
            for n_t in nt_range for w in w_range if w >= n_t}


# --------------------------------------------------------------------------
# union bound
# --------------------------------------------------------------------------


@dataclass
class EquiDistributedModel:
    """Random distance configurations under ideal interleaving.

    Each of the ``w`` erroneous bits draws a distance uniformly from the
    BSK multiset ``D``; the bits are spread over ``n_states`` independent
    channel states as evenly as possible (random state order).
    ``mode="ideal"`` replaces the per-state split by the equal-eigenvalue
    limit.
    """

    distances: np.ndarray
    n_states: int
    mode: str = "blockfading"

    def sample(self, w: int, rng, n: int):
        D = np.asarray(self.distances, dtype=float)
        kappa = most_even_partition(w, self.n_states)
        out = []
        for _ in range(n):
            d2 = rng.choice(D, size=w) ** 2
            if self.mode == "ideal":
                L = min(w, self.n_states)
                out.append(((float(d2.sum()) / L,), (L,)))
                continue
            order = rng.permutation(self.n_states)
            g = np.zeros(self.n_states)
            pos = 0
            for st, k in zip(order, kappa):
                g[st] = d2[pos:pos + k].sum()
                pos += k
            d, lam = merge_eigenvalues(g[g > 0])
            out.append((tuple(np.round(d, 12)), tuple(lam)))
        return out


def union_bound_fer(spectrum, pep_fn, distance_model, N0: float, n_samples: int = 10_000,
                    rng=0) -> float:
    """``sum_w A_w E[P_w]`` with the expectation over sampled configurations.

    ``pep_fn(spec, N0)`` receives a ``(delta2, lam)`` pair.
    """
    rng = np.random.default_rng(rng)
    total = 0.0
    for w, A in spectrum.items():
        counts = Counter(distance_model.sample(w, rng, n_samples))
        mean = sum(c * pep_fn(k, N0) for k, c in counts.items()) / n_samples
        total += A * mean
    return total


# --------------------------------------------------------------------------
# Monte Carlo reference for the pairwise decision variable
# --------------------------------------------------------------------------


def pep_monte_carlo(config: PairwiseConfig, n_r: int, N0: float, n_draws: int, rng,
                    chunk: int = 200_000) -> tuple[float, float]:
    """Estimate ``P(sum_k LLR_k < 0)`` by simulating each LLR literally.

    ``LLR_k = (|eta_k + d_k h|^2 - |eta_k|^2) / (2 N0)`` with ``eta_k`` the
    noise (variance ``2 N0`` per complex entry) and ``h`` the ``n_r``
    Rayleigh gains of bit ``k``'s channel state. Returns ``(p, stderr)``.
    """
    rng = np.random.default_rng(rng)
    d = np.asarray(config.distances)
    w = d.size
    if config.states is None:
        state_idx = np.arange(w)
    else:
        labels = {s: i for i, s in enumerate(dict.fromkeys(config.states))}
        state_idx = np.array([labels[s] for s in config.states])
    n_states = int(state_idx.max()) + 1
    hits = 0
    done = 0
    sn = math.sqrt(N0)
    while done < n_draws:
        b = min(chunk, n_draws - done)
        h = (rng.standard_normal((b, n_states, n_r))
             + 1j * rng.standard_normal((b, n_states, n_r))) / math.sqrt(2)
        eta = sn * (rng.standard_normal((b, w, n_r)) + 1j * rng.standard_normal((b, w, n_r)))
        x = d[None, :, None] * h[:, state_idx, :]
        llr = (np.sum(np.abs(eta + x) ** 2, axis=2) - np.sum(np.abs(eta) ** 2, axis=2)) / (2 * N0)
        hits += int(np.count_nonzero(llr.sum(axis=1) < 0))
        done += b
    p = hits / n_draws
    return p, math.sqrt(max(p * (1 - p), 1e-300) / n_draws)
