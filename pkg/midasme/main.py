"""
Main command line entry point
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from midasme import __version__
from midasme.cli.commands import run_diagnose, run_fit, run_simulate
from midasme.cli.run_config import load_config
from midasme.core.exceptions import ConfigError, IngestionError, MidasError, NumericalError
from midasme.core.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midasme",
        description="ADL-MIDAS estimation with measurement error correction: "
                    "Monte Carlo grids, large-sample diagnostics and CSV fits",
    )
    parser.add_argument("config", help="run configuration file (key = value lines)")
    parser.add_argument("--out-dir", help="override out_dir from the configuration")
    parser.add_argument("--threads", type=int, help="override the worker count")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, execute the configured mode and return the exit code"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.out_dir:
            overrides["out_dir"] = args.out_dir
        if args.threads:
            overrides["threads"] = args.threads
        if overrides:
            cfg = cfg.model_validate({**cfg.model_dump(), **overrides})

        if cfg.mode == "simulate":
            rows = run_simulate(cfg)
            failed = [r for r in rows if r.failed]
            if failed:
                for row in failed:
                    logger.error(f"[{row.scenario_id}] {row.estimator}: "
                                 f"{row.failure_rate:.0%} of replications failed")
                return EXIT_NUMERICAL
        elif cfg.mode == "diagnose":
            run_diagnose(cfg)
        else:
            sys.stdout.write(run_fit(cfg))
        return EXIT_OK

    except ConfigError as e:
        logger.error(f"Configuration error in {args.config}: {e}")
        return EXIT_INVALID
    except ValidationError as e:
        logger.error(f"Validation error: {e}")
        return EXIT_INVALID
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except (IngestionError, MidasError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
