"""Command-line entry point: ``bregdecomp <mode> [--config PATH] ...``."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import FORMATS, MODES, OutputConfig, load_config, parse_config
from .errors import ConfigError
from .harness import CONVENTION_NOTICE, run_pipeline, write_report

_HELP = {
    "gaussian-demo": "closed-form penalty curves of the Gaussian toy",
    "decompose": "decompose a target's regret against two constraint sets",
    "estimate": "estimate components from a 2x2 toggle sample file",
    "calibrate": "fit monotone penalty curves from graded observations",
    "simulate": "simulate a 2x2 toggle experiment and estimate on it",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bregdecomp", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True, metavar="MODE")
    for mode in MODES:
        p = sub.add_parser(mode, help=_HELP[mode])
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        p.add_argument("--out", help="output directory; without it the report goes to stdout")
        p.add_argument("--format", choices=FORMATS, help="json report, or csv tables as well")
        if mode == "estimate":
            p.add_argument("--samples", help="sample file (overrides samples_csv)")
        if mode == "calibrate":
            p.add_argument("--graded", help="graded observation file (overrides graded_csv)")
        if mode in ("estimate", "simulate"):
            p.add_argument("--convention", choices=("sequential", "baseline"))
    return parser


def _config_from_args(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "samples", None):
        overrides["samples_csv"] = args.samples
    if getattr(args, "graded", None):
        overrides["graded_csv"] = args.graded
    if args.config:
        cfg = load_config(args.config, mode=args.mode, overrides=overrides)
    else:
        cfg = parse_config(overrides, mode=args.mode, path="arguments")
    if getattr(args, "convention", None):
        cfg = dataclasses.replace(cfg, estimation=dataclasses.replace(cfg.estimation, convention=args.convention))
    out = OutputConfig(args.out if args.out is not None else cfg.output.dir,
                       args.format if args.format is not None else cfg.output.format)
    return dataclasses.replace(cfg, output=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.mode in ("estimate", "simulate") and cfg.estimation.convention is None:
        print(f"note: {CONVENTION_NOTICE}", file=sys.stderr)
    try:
        report = run_pipeline(cfg)
    except (ValueError, RuntimeError, NotImplementedError, OSError) as exc:
        print(f"error ({cfg.mode}): {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if cfg.output.dir:
        for path in write_report(report, cfg.output.dir, cfg.output.format):
            print(path)
    elif cfg.output.format == "csv" and report.tables:
        name = next(n for n in report.tables if n != "samples") if len(report.tables) > 1 else next(iter(report.tables))
        sys.stdout.write(report.tables[name].to_csv_string())
    else:
        sys.stdout.write(report.to_json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
