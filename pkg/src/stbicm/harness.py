"""Monte Carlo FER simulation of the full ST-BICM link and Gaussian-input outage.

Every frame draws its own random stream from
``SeedSequence(seed, spawn_key=(point, frame))``, so error counts depend only
on the configuration and master seed, not on chunking or the worker count.
Frames are processed in chunks of ``cfg.chunk_frames``; the stop rule is
evaluated after each chunk in chunk order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import complex_gaussian, ebn0_to_n0, extended_matrices
from .codec import ConvCode, TurboCode, bcjr_decode, conv_encode, turbo_decode, turbo_encode
from .config import SystemConfig, load_config
from .detect import batch_app_llr, batch_candidates, batch_distances, candidate_symbols
from .errors import ConfigurationError
from .interleave import build_channel_interleaver, build_pr_interleaver
from .modem import make_constellation
from .precode import (PrecoderMatrix, build_dna, golden_precoder, identity_precoder,
                      load_precoder)

__all__ = [
    "SystemConfig",
    "load_config",
    "FerRecord",
    "Link",
    "build_link",
    "run_fer",
    "outage_gaussian",
    "outage_snr",
    "emit_results",
    "load_results",
    "ebn0_at_fer",
    "diversity_estimate",
    "fit_slope",
]

EB_CONVENTION = "Eb is the received energy per information bit summed over the n_r antennas"


@dataclass
class FerRecord:
    """One grid point of a FER curve.

    ``fer_per_iteration[i]`` / ``bit_errors_per_iteration[i]`` count the
    frames (information bits) still in error after iteration ``i + 1``.
    """

    ebn0_db: float
    n0: float
    frames: int
    frame_errors: int
    bit_errors: int
    info_bits: int
    frame_errors_per_iteration: list = field(default_factory=list)
    bit_errors_per_iteration: list = field(default_factory=list)
    seed: int = 0
    point_index: int = 0
    wall_time: float = 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float("nan")

    @property
    def ber(self) -> float:
        n = self.frames * self.info_bits
        return self.bit_errors / n if n else float("nan")

    @property
    def fer_per_iteration(self) -> list:
        return [e / self.frames if self.frames else float("nan")
                for e in self.frame_errors_per_iteration]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(fer=self.fer, ber=self.ber,
                 seed_lineage={"master_seed": self.seed, "point": self.point_index,
                               "frame_stream": "SeedSequence(seed, spawn_key=(point, frame))"})
        return d


# --------------------------------------------------------------------------
# link construction
# --------------------------------------------------------------------------


def _make_precoder(cfg: SystemConfig) -> PrecoderMatrix:
    if cfg.precoder == "dna":
        if cfg.s == 1:
            return identity_precoder(cfg.n_t)
        return build_dna(cfg.n_t, cfg.n_s, cfg.s, reordered=cfg.reorder_rows)
    if cfg.precoder == "identity":
        return identity_precoder(cfg.n_t, cfg.s, cfg.n_s)
    P = golden_precoder() if cfg.precoder == "golden" else load_precoder(cfg.precoder)
    if (P.n_t, P.s) != (cfg.n_t, cfg.s):
        raise ConfigurationError(
            f"precoder {cfg.precoder!r} is for n_t={P.n_t}, s={P.s}; "
            f"config has n_t={cfg.n_t}, s={cfg.s}"
        )
    return P


@dataclass
class Link:
    """Everything fixed across frames: code, interleaver, precoder, candidates.

    With ``ideal=True`` the link is the ideal-interleaving reference: the
    same coded modulation on a ``1 x n_c n_t n_r`` quasi-static SIMO
    channel whose gain ``|h|^2 / (n_t n_c)`` is shared by every symbol.
    """

    cfg: SystemConfig
    ideal: bool = False

    def __post_init__(self):
        cfg = self.cfg
        if cfg.code_kind == "turbo":
            rsc = ConvCode.from_octal(cfg.code, recursive=True)
            self.code = TurboCode.build(rsc, cfg.frame_bits, rng=cfg.seed,
                                        punctured=cfg.turbo_punctured)
            self.n_info = self.code.n_info
        else:
            self.code = ConvCode.from_octal(cfg.code)
            self.n_info = self.code.info_length(cfg.frame_bits)
            if self.code.coded_length(self.n_info) != cfg.frame_bits:
                raise ConfigurationError("frame length does not fit the mother code")
        self.rate = self.n_info / cfg.frame_bits
        self.constellation = make_constellation(cfg.m)
        if self.ideal:
            self.imap = build_pr_interleaver(cfg.frame_bits, cfg.seed)
            self.S = np.eye(1, dtype=complex)
            self.n_inputs = 1
        else:
            self.imap = build_channel_interleaver(cfg)
            self.precoder = _make_precoder(cfg)
            self.S = self.precoder.S
            self.n_inputs = cfg.N_t
        self.Z, self.labels = candidate_symbols(self.constellation, self.n_inputs,
                                                cfg.detector_cap)
        self.periods = cfg.frame_bits // (cfg.m * self.n_inputs)

    def encode(self, info):
        if isinstance(self.code, TurboCode):
            return turbo_encode(self.code, info)
        return conv_encode(self.code, info)

    def decode(self, llr, state=None):
        """``(extrinsic, app, state)``; ``state`` carries turbo-internal extrinsics."""
        if isinstance(self.code, TurboCode):
            if not self.cfg.turbo_warm_start:
                state = None
            return turbo_decode(self.code, llr, n_inner=self.cfg.turbo_inner, state=state,
                                return_state=True)
        return bcjr_decode(self.code, llr) + (None,)

    def n0(self, ebn0_db: float) -> float:
        return ebn0_to_n0(self.cfg, ebn0_db, self.rate)

    # ----------------------------------------------------------------------

    def _draw(self, seeds, N0):
        """Info bits, candidate points, observations and block map for a chunk."""
        cfg = self.cfg
        F = len(seeds)
        info = np.empty((F, self.n_info), dtype=np.uint8)
        noise_shape = (self.periods, 1 if self.ideal else cfg.N_r)
        if self.ideal:
            chan = np.empty((F, cfg.n_c * cfg.n_t * cfg.n_r), dtype=complex)
        else:
            chan = np.empty((F, cfg.n_c, cfg.n_t, cfg.n_r), dtype=complex)
        noise = np.empty((F,) + noise_shape, dtype=complex)
        for f, ss in enumerate(seeds):
            rng = np.random.default_rng(ss)
            info[f] = rng.integers(0, 2, self.n_info, dtype=np.uint8)
            chan[f] = complex_gaussian(rng, chan.shape[1:])
            noise[f] = complex_gaussian(rng, noise_shape, 2.0 * N0)
        coded = self.encode(info)
        slots = self.imap.interleave(coded)
        z = self.constellation.map(slots.reshape(F, self.periods, self.n_inputs, cfg.m))
        if self.ideal:
            gain = np.sqrt(np.sum(np.abs(chan) ** 2, axis=1) / (cfg.n_t * cfg.n_c))
            pts = (gain[:, None, None, None] * (self.Z @ self.S)[None, None])
            block_of = np.zeros(self.periods, dtype=np.int64)
            y = gain[:, None, None] * z
        else:
            Hext = extended_matrices(chan, cfg)
            pts = batch_candidates(self.Z, self.S, Hext)
            block_of = np.arange(self.periods) // cfg.periods_per_block
            x = z @ self.S
            y = np.einsum("fpi,fpir->fpr", x, Hext[:, block_of])
        return info, pts, y + noise, block_of

    def run_chunk(self, seeds, N0):
        """Simulate the frames of ``seeds``; per-iteration error arrays ``(I, F)``."""
        cfg = self.cfg
        info, pts, y, block_of = self._draw(seeds, N0)
        F = info.shape[0]
        D = batch_distances(y, pts, block_of, N0)
        frame_err = np.zeros((cfg.iterations, F), dtype=np.int64)
        bit_err = np.zeros((cfg.iterations, F), dtype=np.int64)
        active = np.arange(F)
        prior = np.zeros((F, self.periods, self.labels.shape[1]))
        state = np.zeros((F, self.n_info))
        for it in range(cfg.iterations):
            ext_det = batch_app_llr(D[active], self.labels, prior[active])
            llr = self.imap.deinterleave(ext_det.reshape(active.size, -1))
            ext_dec, app, st = self.decode(llr, state[active])
            if st is not None:
                state[active] = st
            nerr = np.count_nonzero((app < 0) != info[active].astype(bool), axis=1)
            bit_err[it, active] = nerr
            frame_err[it, active] = nerr > 0
            if it + 1 == cfg.iterations:
                break
            prior[active] = self.imap.interleave(ext_dec).reshape(active.size, self.periods, -1)
            if cfg.early_stop:
                # genie stop: a correctly decoded frame stays correct
                active = active[nerr > 0]
                if active.size == 0:
                    break
        return frame_err, bit_err


def build_link(cfg: SystemConfig, ideal: bool = False) -> Link:
    return Link(cfg, ideal)


# --------------------------------------------------------------------------
# FER loop
# --------------------------------------------------------------------------


def _frame_seeds(seed: int, point: int, start: int, stop: int):
    return [np.random.SeedSequence(seed, spawn_key=(point, f)) for f in range(start, stop)]


def _chunk_job(args):
    link, point, start, stop, N0 = args
    return link.run_chunk(_frame_seeds(link.cfg.seed, point, start, stop), N0)


def run_fer(cfg: SystemConfig, ebn0_grid, max_frames: int | None = None,
            target_errors: int | None = None, workers: int = 1, ideal: bool = False,
            link: Link | None = None, stop_below: float | None = None,
            progress=None) -> list[FerRecord]:
    """FER/BER over an Eb/N0 grid (dB).

    Each point runs until ``target_errors`` final-iteration frame errors or
    ``max_frames`` frames (defaults from ``cfg``). With ``stop_below`` the
    sweep ends after the first point whose FER falls below it.
    """
    link = link or build_link(cfg, ideal)
    max_frames = cfg.max_frames if max_frames is None else max_frames
    target = cfg.target_errors if target_errors is None else target_errors
    chunk = cfg.chunk_frames
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    records = []
    try:
        for point, ebn0 in enumerate(ebn0_grid):
            t0 = time.perf_counter()
            N0 = link.n0(float(ebn0))
            fe = np.zeros(cfg.iterations, dtype=np.int64)
            be = np.zeros(cfg.iterations, dtype=np.int64)
            frames = 0
            while frames < max_frames and fe[-1] < target:
                wave = max(1, workers)
                jobs = []
                for w in range(wave):
                    start = frames + w * chunk
                    if start >= max_frames:
                        break
                    jobs.append((link, point, start, min(start + chunk, max_frames), N0))
                results = pool.map(_chunk_job, jobs) if pool else map(_chunk_job, jobs)
                for (start, stop), (ferr, berr) in zip(((j[2], j[3]) for j in jobs), results):
                    # merge in chunk order; later chunks of the wave are discarded
                    # once the rule is met so the result is worker-count independent
                    if fe[-1] >= target:
                        break
                    fe += ferr.sum(axis=1)
                    be += berr.sum(axis=1)
                    frames = stop
            rec = FerRecord(float(ebn0), N0, frames, int(fe[-1]), int(be[-1]), link.n_info,
                            fe.tolist(), be.tolist(), cfg.seed, point,
                            time.perf_counter() - t0)
            records.append(rec)
            if progress:
                progress(rec)
            if stop_below is not None and rec.fer < stop_below:
                break
    finally:
        if pool:
            pool.shutdown()
    return records


# --------------------------------------------------------------------------
# curve post-processing
# --------------------------------------------------------------------------


def ebn0_at_fer(records, target: float) -> float:
    """Eb/N0 where the FER curve crosses ``target`` (log-linear interpolation).

    Returns ``nan`` when the curve does not bracket the target.
    """
    pts = sorted((r.ebn0_db, r.fer) for r in records if r.frames)
    for (x0, f0), (x1, f1) in zip(pts, pts[1:]):
        if f0 >= target >= f1 and f1 > 0:
            if f0 == f1:
                return x0
            l0, l1, lt = math.log10(f0), math.log10(f1), math.log10(target)
            return x0 + (lt - l0) * (x1 - x0) / (l1 - l0)
    return float("nan")


def diversity_estimate(records, fer_high: float = 1e-2, fer_low: float = 1e-3) -> float:
    """Decades of FER per decade of SNR between two FER levels."""
    e_hi = ebn0_at_fer(records, fer_high)
    e_lo = ebn0_at_fer(records, fer_low)
    if not (math.isfinite(e_hi) and math.isfinite(e_lo)) or e_lo <= e_hi:
        return float("nan")
    return 10.0 * math.log10(fer_high / fer_low) / (e_lo - e_hi)


def fit_slope(records, min_errors: int = 100) -> float:
    """Diversity from a fit over the two lowest-FER points with enough errors."""
    good = sorted((r for r in records if r.frame_errors >= min_errors and r.fer > 0),
                  key=lambda r: r.fer)[:2]
    if len(good) < 2:
        return float("nan")
    x = np.array([r.ebn0_db for r in good]) / 10.0
    y = np.log10([r.fer for r in good])
    return float(-np.polyfit(x, y, 1)[0])


# --------------------------------------------------------------------------
# Gaussian-input outage
# --------------------------------------------------------------------------


def outage_snr(n_t: int, n_r: int, n_c: int, rate: float, snr_db, n_draws: int = 100_000,
               rng=0) -> np.ndarray:
    """``P[(1/n_c) sum_k log2 det(I + snr/n_t H_k H_k^H) < rate]`` per SNR (dB).

    ``snr`` is the received SNR per receive antenna. All grid points share
    the same channel draws.
    """
    if n_draws < 1:
        raise ConfigurationError("n_draws must be positive")
    rng = np.random.default_rng(rng)
    snr = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    out = np.zeros(snr.size)
    done = 0
    while done < n_draws:
        b = min(20_000, n_draws - done)
        H = complex_gaussian(rng, (b, n_c, n_t, n_r))
        ev = np.linalg.eigvalsh(np.conj(np.swapaxes(H, -1, -2)) @ H)
        ev = np.clip(ev, 0.0, None)
        for i, g in enumerate(snr):
            info = np.log2(1.0 + (g / n_t) * ev).sum(axis=(1, 2)) / n_c
            out[i] += np.count_nonzero(info < rate)
        done += b
    return out / n_draws


def outage_gaussian(n_t: int, n_r: int, n_c: int, rate: float, ebn0_db, n_draws: int = 100_000,
                    rng=0) -> np.ndarray:
    """Outage probability versus Eb/N0 (dB) for a rate of ``rate`` bits per use.

    Uses the simulator's normalization: the SNR per receive antenna is
    ``rate * Eb/N0 / n_r``.
    """
    if n_draws < 10_000:
        raise ConfigurationError("n_draws must be at least 10^4")
    snr_db = np.asarray(ebn0_db, dtype=float) + 10 * math.log10(rate / n_r)
    return outage_snr(n_t, n_r, n_c, rate, snr_db, n_draws, rng)


# --------------------------------------------------------------------------
# result files
# --------------------------------------------------------------------------

CSV_HEADER = ["ebn0_db", "fer", "ber", "frames", "errors", "iteration"]


def _g(x) -> str:
    return f"{x:.6g}"


def emit_results(records, path, fmt: str | None = None, cfg: SystemConfig | None = None,
                 extra: dict | None = None) -> None:
    """Write records as CSV (one row per point and iteration) or JSON."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            for it, (fe, be) in enumerate(zip(r.frame_errors_per_iteration,
                                              r.bit_errors_per_iteration), 1):
                ber = be / (r.frames * r.info_bits) if r.frames else float("nan")
                fer = fe / r.frames if r.frames else float("nan")
                w.writerow([_g(r.ebn0_db), _g(fer), _g(ber), r.frames, fe, it])
        text = buf.getvalue()
    elif fmt == "json":
        doc = {"config": cfg.to_dict() if cfg else None, "convention": EB_CONVENTION,
               "records": [r.to_dict() for r in records]}
        if extra:
            doc.update(extra)
        text = json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n"
    else:
        raise ConfigurationError(f"unknown result format {fmt!r}")
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def load_results(path):
    """Reload a JSON result file as ``(SystemConfig or None, [FerRecord])``."""
    doc = json.loads(Path(path).read_text())
    names = set(FerRecord.__dataclass_fields__)
    recs = [FerRecord(**{k: v for k, v in r.items() if k in names}) for r in doc["records"]]
    cfg = SystemConfig.from_dict(doc["config"]) if doc.get("config") else None
    return cfg, recs
