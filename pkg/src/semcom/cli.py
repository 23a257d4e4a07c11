"""Command-line experiment runner.

Subcommands: ``prepare``, ``train``, ``sweep``, ``plot``, ``gradcheck``.
Settings come from an INI file (``--config``) and ``--set key=value``
overrides.  Exit codes: 0 success, 1 usage/configuration, 2 data,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiment, gradsuite
from .corpus import DataError
from .experiment import ConfigError, ExperimentConfig, ResultsParseError
from .trainer import NumericalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parse_set(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_ini(args.config) if args.config else ExperimentConfig()
    overrides = _parse_set(args.set)
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    return cfg.with_overrides(overrides)


def cmd_prepare(args) -> int:
    manifest = experiment.prepare(load_config(args))
    c = manifest["counts"]
    print(f"train {c['train']}  test {c['test']}  out-of-window {c['out_of_window']}  "
          f"vocab {manifest['vocab_size']}  hash {manifest['config_hash']}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args)
    result = experiment.train_model(cfg)
    last = result.history[-1]["loss"] if result.history else float("nan")
    print(f"{len(result.history)} steps, last loss {last:.4f}, "
          f"checkpoint {experiment.Layout(cfg.output_dir).checkpoint}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    rows = experiment.sweep(cfg)
    print(f"{len(rows)} rows -> {experiment.Layout(cfg.output_dir).results}")
    return EXIT_OK


def cmd_plot(args) -> int:
    cfg = load_config(args)
    layout = experiment.Layout(cfg.output_dir)
    csv_path = args.results or layout.results
    for path in experiment.plot_results(csv_path, layout.path("plots"), cfg.schemes):
        print(path)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = gradsuite.run_suite(seed=args.seed)
    failed = 0
    for r in results:
        status = "ok" if r.passed else "FAIL"
        failed += not r.passed
        print(f"{status:4} {r.name:<28} rel err {r.error:.2e} (tol {r.tolerance:.0e})")
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semcom", description="Semantic communication experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    handlers = {"prepare": (cmd_prepare, "filter and split the corpus, build the vocabulary"),
                "train": (cmd_train, "train the transceiver"),
                "sweep": (cmd_sweep, "evaluate all schemes over the SNR sweep"),
                "plot": (cmd_plot, "render score-vs-SNR plots")}
    for name, (fn, help_text) in handlers.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", help="INI config file")
        p.add_argument("-o", "--output-dir", help="override output_dir")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
        if name == "plot":
            p.add_argument("--results", help="results CSV (default: the run's results.csv)")
        p.set_defaults(func=fn)
    g = sub.add_parser("gradcheck", help="finite-difference check of every differentiable operation")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ResultsParseError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
