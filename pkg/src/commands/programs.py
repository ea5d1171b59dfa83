"""Program commands: run, compile, link, split, export-corpus."""

from __future__ import annotations

import argparse
import logging
import sys

import source_lang
import target_lang
from asm import print_asm
from commands import (
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VIOLATION,
    CommandError,
    add_fuel,
    add_format,
    emit,
    read_mach,
    read_program,
    write_trace,
)
from compiler import LinkError, compile_program, link, split
from corpus import export_corpus
from models.program import dump_program
from outcomes import Stuck, describe
from source_lang import SourceProgram
from target_lang import Instrument

logger = logging.getLogger(__name__)

ERROR_NOT_SOURCE = CommandError(EXIT_USAGE, "Expected a source program")
ERROR_INVALID_PROGRAM = CommandError(EXIT_USAGE, "Program is not well-formed")
ERROR_LINK_FAILED = CommandError(EXIT_USAGE, "Program parts do not link")
ERROR_MIXED_LANGUAGES = CommandError(EXIT_USAGE, "Cannot link programs of different languages")


def _well_formed(program) -> None:
    if isinstance(program, SourceProgram):
        errors = source_lang.well_formed(program)
    else:
        errors = target_lang.well_formed(program)
    if errors:
        raise ERROR_INVALID_PROGRAM.with_detail("; ".join(errors))


def run_source(args: argparse.Namespace) -> int:
    """
    Runs a whole source program and writes its interaction trace.

    Returns:
        int: 0 unless --fail-on-stuck is given and the run got stuck.
    """
    program = read_program(args.program)
    if not isinstance(program, SourceProgram):
        raise ERROR_NOT_SOURCE
    _well_formed(program)
    result = source_lang.run(program, args.fuel)
    print(
        f"{describe(result.outcome)} after {result.steps} steps, {len(result.trace)} events",
        file=sys.stderr,
    )
    write_trace(result.trace, args.trace, args.elide_memory)
    if args.fail_on_stuck and isinstance(result.outcome, Stuck):
        return EXIT_VIOLATION
    return EXIT_OK


def run_mach(args: argparse.Namespace) -> int:
    program = read_mach(args.program, args.format)
    _well_formed(program)
    instrument = Instrument(args.instrument)
    result = target_lang.run(program, args.fuel, instrument)
    print(
        f"{describe(result.outcome)} after {result.steps} steps, {len(result.trace)} events",
        file=sys.stderr,
    )
    write_trace(result.trace, args.trace, args.elide_memory)
    if args.fail_on_stuck and isinstance(result.outcome, Stuck):
        return EXIT_VIOLATION
    return EXIT_OK


def compile_command(args: argparse.Namespace) -> int:
    program = read_program(args.program)
    if not isinstance(program, SourceProgram):
        raise ERROR_NOT_SOURCE
    _well_formed_part(program)
    compiled = compile_program(program, args.stack_size)
    emit(print_asm(compiled) if args.asm else dump_program(compiled), args.out)
    return EXIT_OK


def _well_formed_part(program: SourceProgram) -> None:
    errors = source_lang.well_formed(program, partial=True)
    if errors:
        raise ERROR_INVALID_PROGRAM.with_detail("; ".join(errors))


def link_command(args: argparse.Namespace) -> int:
    first = read_program(args.first, args.format)
    second = read_program(args.second, args.format)
    if type(first) is not type(second):
        raise ERROR_MIXED_LANGUAGES
    try:
        program = link(first, second)
    except LinkError as e:
        raise ERROR_LINK_FAILED.with_detail(str(e)) from e
    emit(dump_program(program), args.out)
    return EXIT_OK


def split_command(args: argparse.Namespace) -> int:
    program = read_program(args.program, args.format)
    comps = {program.intf.resolve(token) for token in args.components.split(",")}
    part, rest = split(program, comps)
    emit(dump_program(part), args.out_part)
    if args.out_rest:
        emit(dump_program(rest), args.out_rest)
    return EXIT_OK


def export_corpus_command(args: argparse.Namespace) -> int:
    for path in export_corpus(args.directory, args.size):
        print(path, file=sys.stderr)
    return EXIT_OK


def register(subparsers) -> None:
    p = subparsers.add_parser("run-source", help="run a whole source program")
    p.add_argument("program")
    add_fuel(p)
    p.add_argument("--trace", help="trace output file (stdout by default)")
    p.add_argument("--no-mem", "--elide-memory", dest="elide_memory", action="store_true")
    p.add_argument("--fail-on-stuck", action="store_true")
    p.set_defaults(func=run_source)

    p = subparsers.add_parser("run-mach", help="run a whole Mach program")
    p.add_argument("program")
    add_fuel(p)
    add_format(p)
    p.add_argument(
        "--instrument", choices=[i.value for i in Instrument], default=Instrument.DATA_FLOW.value
    )
    p.add_argument("--trace")
    p.add_argument("--no-mem", "--elide-memory", dest="elide_memory", action="store_true")
    p.add_argument("--fail-on-stuck", action="store_true")
    p.set_defaults(func=run_mach)

    p = subparsers.add_parser("compile", help="compile a source program or part")
    p.add_argument("program")
    p.add_argument("--stack-size", type=int, default=None)
    p.add_argument("--asm", action="store_true", help="print assembly instead of JSON")
    p.add_argument("-o", "--out")
    p.set_defaults(func=compile_command)

    p = subparsers.add_parser("link", help="link two program parts")
    p.add_argument("first")
    p.add_argument("second")
    add_format(p)
    p.add_argument("-o", "--out")
    p.set_defaults(func=link_command)

    p = subparsers.add_parser("split", help="split a program along components")
    p.add_argument("program")
    p.add_argument("--components", required=True, help="comma-separated ids or names")
    add_format(p)
    p.add_argument("--out-part")
    p.add_argument("--out-rest")
    p.set_defaults(func=split_command)

    p = subparsers.add_parser("export-corpus", help="write the shipped examples")
    p.add_argument("directory")
    p.add_argument("--size", type=int, default=None, help="Net iobuffer words")
    p.set_defaults(func=export_corpus_command)
