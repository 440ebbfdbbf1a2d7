"""Command-line entry point: ``p6dma {power-sweep,user-sweep,single}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import BACKEND
from .config import load_config
from .harness import SCHEMES, emit, run_experiment, summarize, write_rows
from .polarization import QuantizationConfig

KIND_OF = {"power-sweep": "power_sweep", "user-sweep": "user_sweep", "single": "single"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="p6dma", description="Rotatable polarforming array experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in KIND_OF:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML experiment configuration")
        s.add_argument("--scheme", action="append", choices=SCHEMES,
                       help="scheme to run (repeatable; default all)")
        s.add_argument("--seed", type=int, help="first trial seed")
        s.add_argument("--trials", type=int, help="number of paired seeds")
        s.add_argument("--grid", type=float, nargs="+", help="sweep values (dBm or mean users)")
        s.add_argument("--out", help="result file (default stdout)")
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--bits-phase", type=int, help="phase bits for every quantization")
        s.add_argument("--bits-amp", type=int, help="amplitude bits for every quantization")
        s.add_argument("--full-scale", action="store_true", help="N = 64, mean users = 30")
        s.add_argument("--trace", help="write the joint scheme's solver trace (first instance) here")
        s.add_argument("--telemetry", help="write the joint scheme's swarm telemetry (first instance) here")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    log = logging.getLogger("p6dma")
    rc = load_config(args.config, full_scale=args.full_scale)
    if args.full_scale:
        # the preset wins over file values for the two scale parameters
        rc = replace(rc, scenario=replace(rc.scenario, num_bs_antennas=64, mean_users=30.0))
    spec = replace(rc.experiment, kind=KIND_OF[args.command])
    if args.scheme:
        spec = replace(spec, schemes=tuple(dict.fromkeys(args.scheme)))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.trials is not None:
        spec = replace(spec, trials=args.trials)
    if args.grid:
        spec = replace(spec, grid=tuple(args.grid))
    if args.bits_phase is not None or args.bits_amp is not None:
        qs = tuple(QuantizationConfig(args.bits_phase if args.bits_phase is not None else q.phase_bits,
                                      args.bits_amp if args.bits_amp is not None else q.amplitude_bits)
                   for q in spec.quantizations)
        spec = replace(spec, quantizations=tuple(dict.fromkeys(qs)))
    out = args.out or spec.output
    log.info("backend=%s kind=%s schemes=%s grid=%s trials=%d", BACKEND, spec.kind, spec.schemes, spec.grid,
             spec.trials)

    def progress(row):
        log.info("%s sweep=%g seed=%d rate=%.4f (%.0f ms)", row.scheme, row.sweep, row.seed, row.rate, row.ms)

    rows = run_experiment(spec, rc.scenario, rc.solver, rc.pso, progress=progress, trace_path=args.trace,
                          telemetry_path=args.telemetry)
    if out:
        try:
            emit(rows, out, args.format)
        except OSError as exc:
            print(f"p6dma: {exc}", file=sys.stderr)
            return 1
    else:
        write_rows(rows, sys.stdout, args.format)
    for (scheme, sweep), mean in summarize(rows).items():
        log.info("mean %-20s sweep=%-8g rate=%.4f", scheme, sweep, mean)
    return 0


if __name__ == "__main__":
    sys.exit(main())
