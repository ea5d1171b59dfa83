"""Subcommand groups of the command-line frontend."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import config
from compiler import compile_program
from models.program import Program, load_program
from models.renaming import load_table
from models.trace import dump_trace, load_trace
from relations import Renaming, parse_renaming
from source_lang import SourceProgram
from target_lang import MachProgram
from traces import Trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


class CommandError(Exception):
    """A command failure carrying its process exit code."""

    def __init__(self, exit_code: int, detail: str):
        super().__init__(detail)
        self.exit_code = exit_code
        self.detail = detail

    def with_detail(self, extra: str) -> CommandError:
        return CommandError(self.exit_code, f"{self.detail}: {extra}")


def add_fuel(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--fuel", type=int, default=config.FUEL, help="step budget (LAB_FUEL)"
    )


def add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format",
        choices=("json", "asm"),
        default=None,
        help="input format of Mach programs; guessed from the suffix by default",
    )


def emit(text: str, out: str | None) -> None:
    """Writes the primary artifact to a file or stdout."""
    if out:
        Path(out).write_text(text)
        logger.info("wrote %s", out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def read_program(path: str, fmt: str | None = None) -> Program:
    return load_program(path, fmt)


def read_mach(path: str, fmt: str | None = None, stack_size: int | None = None) -> MachProgram:
    """Reads a Mach program, compiling it first when the file holds source."""
    program = load_program(path, fmt)
    if isinstance(program, SourceProgram):
        return compile_program(program, stack_size)
    return program


def read_trace(path: str) -> Trace:
    return load_trace(path)


def write_trace(trace: Trace, out: str | None, elide_memory: bool = False) -> None:
    emit(dump_trace(trace, elide_memory), out)


def read_renaming(text: str) -> Renaming:
    """Parses a renaming flag; `table:FILE` reads a block table file."""
    kind, _, arg = text.strip().partition(":")
    if kind == "table":
        return load_table(arg)
    return parse_renaming(text)
