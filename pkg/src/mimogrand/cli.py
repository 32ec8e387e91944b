"""Command line entry point: ``mimogrand <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace

import numpy as np

from . import error_model as em
from .modulation import build_gray_qam
from .sim_harness import (ConfigError, SimConfig, census_csv, od_csv, run_campaign,
                          run_od_study, run_structure_census)

log = logging.getLogger("mimogrand")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _load_config(args) -> SimConfig:
    cfg = SimConfig.from_json(args.config) if args.config else SimConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "decoders", None):
        overrides["decoders"] = tuple(d.strip() for d in args.decoders.split(",") if d.strip())
    if getattr(args, "eb_n0", None):
        overrides["eb_n0_grid_db"] = tuple(_float_list(args.eb_n0))
    if getattr(args, "trials", None):
        overrides["trials_per_point"] = args.trials
    return replace(cfg, **overrides) if overrides else cfg


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    log.info("simulate: %s", cfg)
    result = run_campaign(cfg, workers=args.threads)
    if result.resampled_channels:
        log.warning("%d ill-conditioned channel draws were resampled", result.resampled_channels)
    _emit(result.to_csv(), args.out)
    return 0


def cmd_census(args) -> int:
    cfg = replace(_load_config(args), pch=True, array_gain=False)
    if args.L is not None:
        m = cfg.bits_per_symbol
        cfg = replace(cfg, n=args.L * m, k=args.k if args.k else cfg.k, n_r=max(cfg.n_r, args.L))
    elif args.k is not None:
        cfg = replace(cfg, k=args.k)
    points = run_structure_census(cfg, args.codewords)
    for pt in points:
        log.info("Eb/N0 %g dB: %d of %d words had errors outside E1/E2", pt.eb_n0_db, pt.other, pt.codewords)
    _emit(census_csv(points), args.out)
    return 0


def cmd_od_study(args) -> int:
    n_t_list = _int_list(args.n_t)
    n_r_list = _int_list(args.n_r)
    rows = run_od_study(n_t_list, n_r_list, args.samples, args.seed if args.seed is not None else 1)
    _emit(od_csv(rows), args.out)
    return 0


def cmd_tables(args) -> int:
    grid = np.arange(args.snr_min, args.snr_max + args.step / 2, args.step)
    tables = em.ranking_tables(args.L, args.M, [float(s) for s in grid], args.w_th)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["snr_db", "rank", "l1", "l2", "probability"])
    for t in tables:
        for rank, (s, p) in enumerate(t.entries, start=1):
            writer.writerow([f"{t.snr_db:g}", rank, s.l1, s.l2, f"{p:.6e}"])
    _emit(buf.getvalue(), args.out)
    lam = em.structure_bits(args.w_th)
    v = len(tables[0].entries)
    tau = em.tables_needed(tables)
    print(f"lambda={lam} bits, v={v}, tau={tau}, total={em.lookup_memory_bits(args.w_th, v, tau)} bits",
          file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_dump_constellation(args) -> int:
    c = build_gray_qam(args.M)
    print(c.dump().rstrip())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mimogrand", description="Symbol-level GRAND over massive MIMO")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, decoders=True):
        sp.add_argument("--config", help="JSON file with SimConfig fields")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--out", help="CSV output path (default: stdout)")
        sp.add_argument("--eb-n0", help="comma separated Eb/N0 grid in dB (overrides config)")
        if decoders:
            sp.add_argument("--decoders", help="comma separated: bit,bit-sorted,symbol,symbol-sorted,uncoded")

    sp = sub.add_parser("simulate", help="BLER and query-count sweep")
    common(sp)
    sp.add_argument("--trials", type=int, help="trial cap per grid point (overrides config)")
    sp.add_argument("--threads", type=int, default=1, help="worker processes; never changes results")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("census", help="measured vs predicted error-structure frequencies")
    common(sp, decoders=False)
    sp.add_argument("--codewords", type=int, default=100_000)
    sp.add_argument("--L", type=int, help="symbols per codeword (sets n = L log2 M)")
    sp.add_argument("-k", type=int, help="message length")
    sp.set_defaults(func=cmd_census)

    sp = sub.add_parser("od-study", help="orthogonality defect vs receive antennas")
    sp.add_argument("--n-t", default="2,4")
    sp.add_argument("--n-r", default="4,8,16,32,64")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_od_study)

    sp = sub.add_parser("tables", help="structure ranking tables and memory footprint")
    sp.add_argument("--L", type=int, default=32)
    sp.add_argument("--M", type=int, default=16)
    sp.add_argument("--w-th", type=int, default=4)
    sp.add_argument("--snr-min", type=float, default=9.0)
    sp.add_argument("--snr-max", type=float, default=27.0)
    sp.add_argument("--step", type=float, default=1.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("dump-constellation", help="print the Gray QAM label grid")
    sp.add_argument("--M", type=int, default=16)
    sp.set_defaults(func=cmd_dump_constellation)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
