"""Command line: fedorl {gen-env, gen-data, train, sweep, verify-theory} --config PATH."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import experiment
from .config import load_config
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_THEORY, EXIT_RUNTIME = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    # usage errors share the config-error exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedorl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [("gen-env", "write the MDP as JSON"),
                            ("gen-data", "write per-agent JSONL datasets and a manifest"),
                            ("train", "run federated training and write round reports"),
                            ("sweep", "run training across the configured sweep axis"),
                            ("verify-theory", "run the bound and improvement checks")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--output-dir", help="overrides output_dir from the config")
        p.add_argument("--seed", type=int, help="overrides dataset and federation seeds")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers (sweep, verify-theory)")
    return parser


def _configure_logging():
    level = os.environ.get("FEDORL_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
        if cfg.sweep is not None:
            cfg = replace(cfg, sweep=replace(cfg.sweep, seeds=(args.seed,)))
    out_dir = args.output_dir or cfg.output_dir
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")

    if args.command == "gen-env":
        print(experiment.gen_env(cfg, out_dir))
    elif args.command == "gen-data":
        print(experiment.gen_data(cfg, out_dir))
    elif args.command == "train":
        for res in experiment.train(cfg, out_dir):
            print(f"strategy={res.strategy} final_global_return={res.final_global_return:.6g} "
                  f"rounds_to_95={res.rounds_to_95}")
    elif args.command == "sweep":
        print(experiment.sweep(cfg, out_dir, args.jobs))
    else:
        ok, reports = experiment.verify_theory(cfg, out_dir, args.jobs)
        for name, rep in reports.items():
            if "violations" in rep:
                print(f"{name}: trials={rep['trials']} violations={rep['violations']} "
                      f"worst_ratio={rep['worst_ratio']}")
            else:
                print(f"{name}: eligible={rep['eligible']} strict={rep['strict']} rate={rep['rate']}")
        return EXIT_OK if ok else EXIT_THEORY
    return EXIT_OK


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        logging.getLogger("fedorl").debug("traceback", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
