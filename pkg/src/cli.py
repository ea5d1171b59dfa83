"""Command-line frontend of the secure compilation lab."""

from __future__ import annotations

import argparse
import logging
import sys

from pydantic import ValidationError

import config
from asm import AsmSyntaxError
from backtranslation import BacktranslationError
from commands import EXIT_USAGE, CommandError, checks, programs, traces
from compiler import LinkError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seclab", description="Run, compile and check SafeP and Mach programs."
    )
    parser.add_argument("--log-level", default=config.LOG_LEVEL)
    subparsers = parser.add_subparsers(dest="command", required=True)
    programs.register(subparsers)
    traces.register(subparsers)
    checks.register(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    logger.debug("running %s in %s", args.command, config.ENVIRONMENT)
    try:
        return args.func(args)
    except CommandError as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except (ValidationError, AsmSyntaxError, LinkError, BacktranslationError, ValueError, OSError) as e:
        # Tracebacks only while developing
        logger.debug("%s failed", args.command, exc_info=config.IS_DEVELOPMENT)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
