"""Command line entry point ``stbicm``.

Exit codes: 0 success, 2 configuration error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import analysis, harness, precode
from .config import load_config, rate_fraction
from .errors import ConfigurationError, ResourceError

EXIT_CONFIG = 2
EXIT_RESOURCE = 3


def parse_grid(text: str) -> np.ndarray:
    """``a:b:step`` (inclusive) or a comma list of values."""
    try:
        if ":" in text:
            a, b, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(round((b - a) / step)) + 1
            return a + step * np.arange(max(n, 0))
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigurationError(f"bad grid {text!r}: {exc}") from exc


def _write_rows(rows, header, out):
    if out:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)


def _fmt_table(rows_label, col_label, cells, rows, cols, fmt):
    width = max(6, *(len(fmt(v)) + 1 for v in cells.values())) if cells else 6
    lines = [f"{rows_label:>6}" + "".join(f"{col_label}={c}".rjust(width + 1) for c in cols)]
    for r in rows:
        line = f"{r:>6}"
        for c in cols:
            line += (fmt(cells[(r, c)]) if (r, c) in cells else "/").rjust(width + 1)
        lines.append(line)
    return "\n".join(lines)


# --------------------------------------------------------------------------


def cmd_singleton(args) -> int:
    rate = rate_fraction(args.rc)
    table = analysis.singleton_table(rate, args.nr, args.nc, args.nt_max, args.s_max,
                                     args.dhmin)
    s_cols = sorted({s for _, s in table})
    print(_fmt_table("n_t", "s", table, range(1, args.nt_max + 1), s_cols,
                     lambda v: f"{v[0]}{'*' if v[1] else ''}"))
    print("(* = full diversity n_t n_c n_r)")
    _write_rows([(nt, s, d, int(full)) for (nt, s), (d, full) in sorted(table.items())],
                ["n_t", "s", "diversity", "full"], args.csv)
    return 0


def cmd_gain_table(args) -> int:
    table = analysis.gain_table(range(2, args.nt_max + 1), range(2, args.w_max + 1))
    print(_fmt_table("n_t", "w", table, range(2, args.nt_max + 1), range(2, args.w_max + 1),
                     lambda v: f"{v:.2f}"))
    _write_rows([(nt, w, f"{g:.6f}") for (nt, w), g in sorted(table.items())],
                ["n_t", "w", "gain_db"], args.csv)
    return 0


def _pep_spec(cfg, distances, states, mode):
    if mode == "ergodic":
        return analysis.PairwiseConfig(distances)
    if states is None:
        raise ConfigurationError(f"mode {mode!r} needs --states")
    if mode == "blockfading":
        return analysis.PairwiseConfig(distances, states)
    link_p = harness._make_precoder(cfg)
    g2 = np.zeros((cfg.N_c, cfg.N_t))
    for d, st in zip(distances, states):
        if not 0 <= st < g2.size:
            raise ConfigurationError(f"state {st} outside [0, {g2.size})")
        g2[st // cfg.N_t, st % cfg.N_t] += d * d
    return analysis.eigen_spectrum(link_p, g2)


def cmd_pep(args) -> int:
    cfg = load_config(args.config)
    distances = [float(v) for v in args.distances.split(",")]
    states = [int(v) for v in args.states.split(",")] if args.states else None
    spec = _pep_spec(cfg, distances, states, args.mode)
    link = harness.build_link(cfg)
    rows = []
    print("ebn0_db,pep,asymptote")
    for e in parse_grid(args.ebn0):
        N0 = link.n0(float(e))
        p = analysis.pep_exact(spec, cfg.n_r, N0)
        a = analysis.pep_asymptote(spec, cfg.n_r, N0)
        rows.append((f"{e:.6g}", f"{p:.6g}", f"{a:.6g}"))
        print(",".join(rows[-1]))
    _write_rows(rows, ["ebn0_db", "pep", "asymptote"], args.out)
    return 0


def cmd_precoder(args) -> int:
    if args.action == "emit":
        P = precode.build_dna(args.nt, args.ns, args.s, reordered=args.reordered)
        if args.out:
            precode.save_precoder(P, args.out)
        else:
            np.set_printoptions(precision=4, suppress=True, linewidth=160)
            print(P.S)
        return 0
    if args.file:
        P = precode.load_precoder(args.file)
    else:
        P = precode.build_dna(args.nt, args.ns, args.s, reordered=args.reordered)
    rep = precode.validate_dna(P)
    for name, val in vars(rep).items():
        print(f"{name:24s} {val:.3e}")
    ok = rep.ok(args.tol)
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_outage(args) -> int:
    grid = parse_grid(args.ebn0)
    p = harness.outage_gaussian(args.nt, args.nr, args.nc, float(rate_fraction(args.rate)),
                                grid, args.draws, args.seed)
    rows = [(f"{e:.6g}", f"{v:.6g}") for e, v in zip(grid, p)]
    print("ebn0_db,outage")
    for r in rows:
        print(",".join(r))
    _write_rows(rows, ["ebn0_db", "outage"], args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.max_frames is not None:
        cfg = cfg.replace(max_frames=args.max_frames)
    grid = parse_grid(args.ebn0)

    def show(r):
        print(f"Eb/N0 {r.ebn0_db:6.2f} dB  frames {r.frames:8d}  errors {r.frame_errors:5d}  "
              f"FER {r.fer:.3e}  BER {r.ber:.3e}  ({r.wall_time:.1f} s)", flush=True)

    recs = harness.run_fer(cfg, grid, workers=args.workers, ideal=args.ideal, progress=show)
    out = Path(args.out)
    if out.suffix == ".json":
        harness.emit_results(recs, out, "json", cfg)
    else:
        harness.emit_results(recs, out, "csv")
        harness.emit_results(recs, out.with_suffix(".json"), "json", cfg)
    d = harness.diversity_estimate(recs)
    if d == d:
        print(f"diversity estimate (FER 1e-2 -> 1e-3): {d:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stbicm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo FER curve")
    s.add_argument("-c", "--config", required=True, help="JSON configuration file")
    s.add_argument("--ebn0", required=True, help="grid a:b:step or comma list (dB)")
    s.add_argument("--out", required=True, help="CSV or JSON output path")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--max-frames", type=int)
    s.add_argument("--ideal", action="store_true",
                   help="simulate the ideal-interleaving SIMO reference instead")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("singleton", help="diversity bound table")
    s.add_argument("--rc", default="1/2")
    s.add_argument("--nr", type=int, default=1)
    s.add_argument("--nc", type=int, default=1)
    s.add_argument("--nt-max", type=int, default=8)
    s.add_argument("--s-max", type=int)
    s.add_argument("--dhmin", type=int)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_singleton)

    s = sub.add_parser("gain-table", help="best linear precoding gains (dB), BPSK")
    s.add_argument("--nt-max", type=int, default=8)
    s.add_argument("--w-max", type=int, default=8)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_gain_table)

    s = sub.add_parser("pep", help="exact pairwise error probability versus Eb/N0")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("--ebn0", default="0:20:2")
    s.add_argument("--distances", required=True, help="comma list of BSK distances")
    s.add_argument("--states", help="comma list of channel state indices, one per distance")
    s.add_argument("--mode", choices=["ergodic", "blockfading", "precoded"], default="ergodic")
    s.add_argument("--out")
    s.set_defaults(func=cmd_pep)

    s = sub.add_parser("precoder", help="emit or check a DNA precoder")
    s.add_argument("action", choices=["emit", "check"])
    s.add_argument("--nt", type=int, default=2)
    s.add_argument("--ns", type=int, default=1)
    s.add_argument("--s", type=int, default=2)
    s.add_argument("--reordered", action="store_true")
    s.add_argument("--file", help="check a matrix file instead of building one")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--out")
    s.set_defaults(func=cmd_precoder)

    s = sub.add_parser("outage", help="Gaussian-input outage probability")
    s.add_argument("--nt", type=int, default=2)
    s.add_argument("--nr", type=int, default=1)
    s.add_argument("--nc", type=int, default=1)
    s.add_argument("--rate", default="2", help="bits per channel use")
    s.add_argument("--ebn0", default="0:20:1")
    s.add_argument("--draws", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_outage)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
