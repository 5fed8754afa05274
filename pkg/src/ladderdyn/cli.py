"""Command line entry point: ``ladderdyn <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import LadderError

SUBCOMMANDS = {
    "trace": "trace",
    "typicality": "typicality",
    "wmatrix": "transition-matrix",
    "driftdiff": "drift-diffusion",
    "scaling": "scaling",
}


def _add_run_flags(p):
    p.add_argument("-c", "--config", required=True, help="YAML config, or a report.json to rerun")
    p.add_argument("-o", "--out", help="output directory (overrides output_dir)")
    p.add_argument("-w", "--workers", type=int, help="worker processes")
    p.add_argument("--seed", type=int, help="override root_seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="ladderdyn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        _add_run_flags(sub.add_parser(name, help=f"run a '{kind}' experiment"))
    p = sub.add_parser("align", help="time-shift alignment of trace CSV files")
    p.add_argument("traces", nargs="+", help="trace CSV files (first one stays fixed)")
    p.add_argument("-o", "--out", help="write shifts JSON here")
    p.add_argument("--max-shift", type=float, help="largest shift tried (time units)")
    return parser


def _align(args):
    from .analysis import alignment_residual, time_shift_align
    from .observables import ObservableTrace

    traces = [ObservableTrace.from_csv(p) for p in args.traces]
    dts = {round(tr.times[1] - tr.times[0], 12) for tr in traces}
    if len(dts) != 1:
        raise LadderError(f"traces use different output grids: {sorted(dts)}")
    dt = dts.pop()
    series = [np.array(tr.mean_x) for tr in traces]
    shifts = time_shift_align(series, dt, max_shift=args.max_shift)
    result = {
        "files": args.traces,
        "dt_out": dt,
        "shifts": shifts.tolist(),
        "residual_rms": alignment_residual(series, shifts, dt),
    }
    text = json.dumps(result, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "align":
            _align(args)
            return 0
        from .experiment import load_config, run_experiment

        kind = SUBCOMMANDS[args.command]
        cfg = load_config(args.config, workers=args.workers, root_seed=args.seed)
        if cfg.kind != kind:
            from .errors import SchemaError

            raise SchemaError(f"config kind '{cfg.kind}' does not match subcommand "
                              f"'{args.command}'", path="kind")
        report = run_experiment(cfg, args.out)
        out = Path(args.out or cfg.output_dir)
        print(f"wrote {out / 'report.json'} ({len(report['results'])} result groups)")
        return 0
    except LadderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
