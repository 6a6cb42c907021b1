"""Command line front-end: ``lenspdma {run,validate,report,preset}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, PRESETS, dump_preset, from_mapping, load_config
from .results import SchemaError, format_table, merge_results, read_result, write_result

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("lenspdma")


def _cmd_run(args) -> int:
    try:
        if args.config:
            cfg = load_config(args.config, seed=args.seed, trials=args.trials)
        else:
            cfg = from_mapping({"preset": args.preset}, seed=args.seed, trials=args.trials)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .linksim import run_experiment

    out = Path(args.out or cfg.output_path)
    fmt = args.format or cfg.output_format
    try:
        result = run_experiment(cfg)
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    write_result(result, out, fmt)
    failed = sum(r.failures for r in result.rows)
    if failed:
        log.warning("%d trial evaluations failed; see the 'errors' column", failed)
    print(f"wrote {len(result.rows)} rows to {out} (config sha256 {cfg.digest[:12]})")
    return EXIT_OK


def _cmd_validate(args, response=None) -> int:
    from .validation import ORACLES, run_oracles

    names = args.only or None
    if names:
        unknown = [n for n in names if n not in ORACLES]
        if unknown:
            print(f"unknown oracle(s): {', '.join(unknown)}", file=sys.stderr)
            return EXIT_CONFIG
    results = run_oracles(names, response=response)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_ORACLE


def _cmd_report(args) -> int:
    try:
        results = [read_result(p) for p in args.files]
        header, table = merge_results(results, [Path(p).stem for p in args.files])
    except (SchemaError, OSError, ValueError, KeyError) as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = format_table(header, table)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_preset(args) -> int:
    sys.stdout.write(dump_preset(args.name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lenspdma", description="Lens-array PDMA link simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo sweep")
    run.add_argument("--config", help="YAML experiment file (default: the preset)")
    run.add_argument("--preset", default="paper-defaults", choices=sorted(PRESETS))
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--out")
    run.add_argument("--format", choices=("csv", "jsonl"))

    val = sub.add_parser("validate", help="run the oracle suite")
    val.add_argument("--only", nargs="*", help="subset of oracle names")

    rep = sub.add_parser("report", help="merge result files on the sweep axis")
    rep.add_argument("files", nargs="*")
    rep.add_argument("--out")

    pre = sub.add_parser("preset", help="print a preset as YAML")
    pre.add_argument("name", nargs="?", default="paper-defaults", choices=sorted(PRESETS))
    return p


def main(argv=None, response=None) -> int:
    """Entry point. ``response`` overrides the lens response used by ``validate``."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args, response)
    if args.command == "report":
        return _cmd_report(args)
    return _cmd_preset(args)


if __name__ == "__main__":
    sys.exit(main())
