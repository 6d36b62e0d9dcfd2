"""DNA cyclotomic linear precoders: construction, validation, row reordering, I/O.

Indexing (0-based): a row of the ``N_t x N_t`` matrix splits into ``n_s``
sub-parts ``t`` of length ``s' n_t``, each into ``s'`` sub-parts ``i`` of
length ``n_t``, each into ``n_t / s'`` nucleotides ``j`` of length ``s'``.
Column ``t*s'*n_t + i*n_t + j*s' + v`` is entry ``v`` of nucleotide
``(t, i, j)``. Every row belongs to one antenna group ``j = l2`` and is
non-null only on nucleotides of that group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from sympy import totient

from .errors import ConfigurationError

__all__ = [
    "PrecoderMatrix",
    "DnaReport",
    "inverse_totient",
    "build_dna",
    "identity_precoder",
    "validate_dna",
    "reorder_rows_for_interleaving",
    "group_factorization",
    "load_precoder",
    "save_precoder",
    "golden_precoder",
]


@dataclass(frozen=True)
class PrecoderMatrix:
    """Complex ``N_t x N_t`` precoder with its spreading dimensions.

    ``row_groups[l]`` is the antenna group (0-based ``l2``) of row ``l``;
    ``None`` for matrices without DNA structure (e.g. loaded from file).
    """

    S: np.ndarray = field(repr=False)
    n_t: int
    n_s: int
    s: int
    kind: str = "dna"
    row_groups: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        S = np.asarray(self.S, dtype=complex)
        object.__setattr__(self, "S", S)
        if self.s % self.n_s:
            raise ConfigurationError(f"n_s={self.n_s} must divide s={self.s}")
        if S.shape != (self.N_t, self.N_t):
            raise ConfigurationError(f"matrix shape {S.shape} != N_t={self.N_t} square")

    @property
    def N_t(self) -> int:
        return self.s * self.n_t

    @property
    def s_prime(self) -> int:
        return self.s // self.n_s

    @property
    def n_groups(self) -> int:
        return self.n_t // self.s_prime

    def nucleotide(self, row: int, t: int, i: int, j: int) -> np.ndarray:
        sp = self.s_prime
        start = t * sp * self.n_t + i * self.n_t + j * sp
        return self.S[row, start:start + sp]


@lru_cache(maxsize=None)
def inverse_totient(x: int) -> int:
    """Smallest positive ``n`` with Euler totient ``phi(n) = x``."""
    if x < 1:
        raise ConfigurationError(f"no totient preimage for {x}")
    if x == 1:
        return 1
    if x % 2:
        raise ConfigurationError(f"{x} is odd, hence not a totient value")
    # phi(n) >= sqrt(n / 2), so n <= 2 x^2 bounds the search
    for n in range(x + 1, 2 * x * x + 2):
        if int(totient(n)) == x:
            return n
    raise ConfigurationError(f"{x} is a nontotient; the cyclotomic phase is undefined")


def _dna_coefficients(n_t: int, n_s: int, s: int, reordered: bool):
    if n_t < 1 or s < 1 or n_s < 1:
        raise ConfigurationError("n_t, n_s and s must be positive")
    if s % n_s:
        raise ConfigurationError(f"n_s={n_s} must divide s={s}")
    sp = s // n_s
    if n_t % sp:
        raise ConfigurationError(f"s'={sp} must divide n_t={n_t}")
    N = s * n_t
    Np = s * sp
    groups = n_t // sp
    S = np.zeros((N, N), dtype=complex)
    row_groups = np.empty(N, dtype=np.int64)
    inv_big = 1.0 / inverse_totient(2 * Np)
    inv_small = 1.0 / inverse_totient(2 * sp) if sp > 1 else 0.0
    amp = 1.0 / np.sqrt(Np)
    for l2 in range(groups):
        for l1 in range(Np):
            row = l1 * groups + l2 if reordered else l2 * Np + l1
            row_groups[row] = l2
            for t in range(n_s):
                for i in range(sp):
                    for v in range(sp):
                        col = v + l2 * sp + i * n_t + t * sp * n_t
                        phase = (l1 * (inv_big + (v + i * sp + t * sp * sp) / Np)
                                 + i * (inv_small + v / sp))
                        S[row, col] = amp * np.exp(2j * np.pi * phase)
    return S, row_groups


def build_dna(n_t: int, n_s: int, s: int, reordered: bool = False) -> PrecoderMatrix:
    """Modified cyclotomic DNA precoder for ``n_t`` antennas and spreading ``s``.

    Row ``l2 * s s' + l1`` (``reordered=False``) or ``l1 * n_t/s' + l2``
    (``reordered=True``) holds, on nucleotide ``(t, i, l2)``, the entries

        exp(2 pi j [l1 (1/Phi^-1(2 s s') + (v + i s' + t s'^2)/(s s'))
                    + i (1/Phi^-1(2 s') + v/s')]) / sqrt(s s')

    and zeros elsewhere. ``s = 1`` gives the identity.
    """
    S, groups = _dna_coefficients(n_t, n_s, s, reordered)
    return PrecoderMatrix(S, n_t, n_s, s, "dna-reordered" if reordered else "dna", groups)


def identity_precoder(n_t: int, s: int = 1, n_s: int = 1) -> PrecoderMatrix:
    N = s * n_t
    groups = np.arange(N) % n_t if s // n_s == 1 else None
    return PrecoderMatrix(np.eye(N, dtype=complex), n_t, n_s, s, "identity", groups)


def reorder_rows_for_interleaving(P: PrecoderMatrix) -> PrecoderMatrix:
    """Permute rows so that ``n_t/s'`` consecutive rows hit distinct antenna groups.

    Row ``l2 * s s' + l1`` moves to position ``l1 * n_t/s' + l2``.
    """
    if P.row_groups is None or not P.kind.startswith("dna"):
        raise ConfigurationError("row reordering needs a DNA-structured precoder")
    if P.kind == "dna-reordered":
        return P
    groups, Np = P.n_groups, P.s * P.s_prime
    new = np.empty_like(P.S)
    new_groups = np.empty_like(P.row_groups)
    for l2 in range(groups):
        for l1 in range(Np):
            new[l1 * groups + l2] = P.S[l2 * Np + l1]
            new_groups[l1 * groups + l2] = P.row_groups[l2 * Np + l1]
    return PrecoderMatrix(new, P.n_t, P.n_s, P.s, "dna-reordered", new_groups)


@dataclass(frozen=True)
class DnaReport:
    """Largest absolute violation of each structural condition."""

    null_nucleotide: float
    orthogonal_nucleotide: float
    subpart_norm_spread: float
    normalization: float
    unitarity: float
    nucleotide_norm_min: float
    nucleotide_norm_max: float

    def ok(self, tol: float = 1e-12) -> bool:
        return max(self.null_nucleotide, self.orthogonal_nucleotide, self.subpart_norm_spread,
                   self.normalization, self.unitarity) <= tol

    @property
    def equal_norm(self) -> bool:
        return abs(self.nucleotide_norm_max - self.nucleotide_norm_min) < 1e-9


def _infer_groups(P: PrecoderMatrix) -> np.ndarray:
    """Antenna group of each row = the group holding most of its energy."""
    energy = np.zeros((P.N_t, P.n_groups))
    for l in range(P.N_t):
        for t in range(P.n_s):
            for i in range(P.s_prime):
                for j in range(P.n_groups):
                    energy[l, j] += np.sum(np.abs(P.nucleotide(l, t, i, j)) ** 2)
    return energy.argmax(axis=1)


def validate_dna(P: PrecoderMatrix) -> DnaReport:
    """Check the null/orthogonal nucleotide conditions and normalizations.

    * null nucleotide: largest entry on a nucleotide outside the row's group;
    * orthogonal nucleotide: largest deviation of the Gram matrix of the
      ``s'`` in-group nucleotides (per ``t``) from ``I / s``;
    * sub-part norms: spread over ``t`` of the squared norm of each row's
      ``t``-th sub-part;
    * normalization: ``| ||S||_F^2 - N_t |``;
    * unitarity: largest deviation of ``M^* M`` from ``I/s`` where ``M``
      stacks the in-group nucleotides of one row and one ``t``.
    """
    groups = P.row_groups if P.row_groups is not None else _infer_groups(P)
    sp, s = P.s_prime, P.s
    null = orth = spread = unit = 0.0
    nuc_norms = []
    for l in range(P.N_t):
        g = int(groups[l])
        sub_norms = []
        for t in range(P.n_s):
            M = np.array([P.nucleotide(l, t, i, g) for i in range(sp)])
            for i in range(sp):
                for j in range(P.n_groups):
                    if j != g:
                        nuc = P.nucleotide(l, t, i, j)
                        if nuc.size:
                            null = max(null, float(np.abs(nuc).max()))
            gram = M @ M.conj().T
            orth = max(orth, float(np.abs(gram - np.eye(sp) / s).max()))
            unit = max(unit, float(np.abs(M.conj().T @ M - np.eye(sp) / s).max()))
            nuc_norms.extend(np.real(np.diag(gram)))
            start = t * sp * P.n_t
            sub_norms.append(float(np.sum(np.abs(P.S[l, start:start + sp * P.n_t]) ** 2)))
        spread = max(spread, max(sub_norms) - min(sub_norms))
    norm = abs(float(np.sum(np.abs(P.S) ** 2)) - P.N_t)
    return DnaReport(null, orth, spread, norm, unit, float(min(nuc_norms)), float(max(nuc_norms)))


def group_factorization(P: PrecoderMatrix):
    """Row and channel-row index sets of the independent antenna groups.

    Returns a list of ``(rows, chan_rows)`` pairs, one per group ``i``.
    The extended channel ``H_k`` stacks ``s`` blocks of ``n_t`` rows, so
    group ``i`` owns channel rows ``j + u*n_t + i*s'``. For a DNA matrix
    ``(S @ H)[rows] == S[np.ix_(rows, chan_rows)] @ H[chan_rows]``.
    """
    groups = P.row_groups if P.row_groups is not None else _infer_groups(P)
    out = []
    for i in range(P.n_groups):
        rows = np.flatnonzero(groups == i)
        chan = np.array([j + u * P.n_t + i * P.s_prime
                         for u in range(P.s) for j in range(P.s_prime)])
        out.append((rows, chan))
    return out


def save_precoder(P: PrecoderMatrix, path) -> None:
    """Header ``n_t n_s s`` then one line of ``re,im`` pairs per row."""
    lines = [f"{P.n_t} {P.n_s} {P.s}"]
    for row in P.S:
        lines.append(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_precoder(text: str, origin: str) -> PrecoderMatrix:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        n_t, n_s, s = (int(v) for v in lines[0].split())
        rows = [[complex(float(a), float(b)) for a, b in (tok.split(",") for tok in ln.split())]
                for ln in lines[1:]]
        S = np.array(rows, dtype=complex)
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"malformed precoder file {origin}: {exc}") from exc
    if S.shape != (s * n_t, s * n_t):
        raise ConfigurationError(f"{origin}: matrix shape {S.shape} does not match header")
    frob = float(np.sum(np.abs(S) ** 2))
    if abs(frob - s * n_t) > 1e-9:
        raise ConfigurationError(
            f"{origin}: squared Frobenius norm {frob:.12g} differs from N_t={s * n_t}"
        )
    P = PrecoderMatrix(S, n_t, n_s, s, "file")
    return P


def load_precoder(path) -> PrecoderMatrix:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read precoder {path}: {exc}") from exc
    return _parse_precoder(text, str(path))


def golden_precoder() -> PrecoderMatrix:
    """Golden code written as a 4x4 precoder for a 2x2 channel (bundled file)."""
    text = resources.files("stbicm.data").joinpath("golden_2x2.txt").read_text()
    return _parse_precoder(text, "golden_2x2.txt")
