"""Command line entry point: ``isogeom {expect,simulate,bounds,selftest}``.

Exit codes: 0 pass, 1 statistical failure, 2 config error, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path

from . import harness as hs

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isogeom", description="Closed-form expectations and Monte Carlo checks for random polynomials on homogeneous manifolds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, help="override master_seed")
    common.add_argument("--threads", type=_positive, help="worker threads (default: $ISOGEOM_THREADS, else all cores)")
    common.add_argument("--out", type=Path, help="output directory (default: the config's output key)")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="what to print on stdout")
    common.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    for name, text in (("expect", "tabulate closed forms"), ("simulate", "Monte Carlo vs closed form"), ("bounds", "L^a and sup bounds")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config", type=Path, required=True)
    p = sub.add_parser("selftest", parents=[common], help="reduced invariant suites")
    p.add_argument("--config", type=Path, help="ignored; accepted for symmetry")
    return parser


def _emit(args, cfg, name, doc, csv_text, figure=None) -> Path:
    out = Path(args.out or cfg.output)
    json_text = hs.to_json(doc)
    hs.write_outputs(out, name, json_text, csv_text)
    if figure is not None and not args.no_figures:
        figure(out)
    sys.stdout.write(json_text if args.format == "json" else csv_text)
    return out


def cmd_expect(args) -> int:
    cfg = hs.load_config(args.config, args.seed)
    rows = hs.expectation_rows(cfg)
    doc = {"command": "expect", "config": cfg.canonical(), "config_hash": cfg.config_hash, "rows": rows}

    def figure(out):
        from . import plotting

        plotting.expectation_figure(cfg, out / "expect.png")

    _emit(args, cfg, "expect", doc, hs.rows_csv(rows, hs.EXPECT_COLUMNS), figure)
    return EXIT_PASS


def cmd_simulate(args) -> int:
    cfg = hs.load_config(args.config, args.seed)
    result = hs.simulate(cfg, args.threads)

    def figure(out):
        from . import plotting

        plotting.simulation_figure(result, out / "simulate.png")
        if cfg.quantity in ("zeros", "level_measure", "excursion", "leray_shell", "leray_coarea"):
            plotting.level_set_figure(cfg, hs.draw(cfg, 0), out / "level_set.png")

    _emit(args, cfg, "simulate", result.document(), hs.reports_csv(result.reports), figure)
    for rep in result.reports:
        logging.info("%s t=%s mean=%.6g se=%.3g cf=%.6g z=%.2f %s", rep.quantity, rep.t_scaled, rep.mean, rep.stderr, rep.closed_form.value, rep.z, rep.verdict)
    return EXIT_PASS if result.passed else EXIT_FAIL


def cmd_bounds(args) -> int:
    cfg = hs.load_config(args.config, args.seed)
    result = hs.bounds(cfg, args.threads)

    def figure(out):
        from . import plotting

        plotting.bounds_figure(result, out / "bounds.png")

    _emit(args, cfg, "bounds", result.document(), hs.rows_csv(result.rows, hs.BOUNDS_COLUMNS), figure)
    return EXIT_PASS if result.passed else EXIT_FAIL


def cmd_selftest(args) -> int:
    counts = (1, 4, 16)
    suites = hs.selftest(counts)
    for suite in suites:
        print(f"{suite.name:<12} {'pass' if suite.passed else 'FAIL'}")
        for failure in suite.failures:
            print(f"    {failure}")
    return EXIT_PASS if all(s.passed for s in suites) else EXIT_FAIL


COMMANDS = {"expect": cmd_expect, "simulate": cmd_simulate, "bounds": cmd_bounds, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except hs.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except hs.TrialFailure as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
