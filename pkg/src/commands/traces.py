"""Trace commands: strip-df, backtranslate, check-trace-rel, check-safety."""

from __future__ import annotations

import argparse
import logging
import sys

import config
from backtranslation import BacktranslationError, backtranslate_program
from commands import (
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VIOLATION,
    CommandError,
    add_format,
    emit,
    read_mach,
    read_program,
    read_renaming,
    read_trace,
    write_trace,
)
from corpus import net_library, net_main
from interface import Interface
from models.program import dump_program
from relations import find_shift, trace_related
from traces import NowriteProperty, remove_df

logger = logging.getLogger(__name__)

ERROR_INVALID_TRACE = CommandError(EXIT_USAGE, "Trace cannot be back-translated")
ERROR_INVALID_LOCATION = CommandError(EXIT_USAGE, "Locations are written COMP:BLOCK:OFFSET")
ERROR_NOT_RELATED = CommandError(EXIT_VIOLATION, "Traces are not related")
ERROR_UNSAFE = CommandError(EXIT_VIOLATION, "Safety property violated")


def strip_df(args: argparse.Namespace) -> int:
    write_trace(remove_df(read_trace(args.trace)), args.out, args.elide_memory)
    return EXIT_OK


def backtranslate_command(args: argparse.Namespace) -> int:
    """Writes the source program replaying a data-flow trace of a Mach program."""
    program = read_mach(args.program, args.format)
    trace = read_trace(args.trace)
    try:
        bt = backtranslate_program(trace, program)
    except BacktranslationError as e:
        raise ERROR_INVALID_TRACE.with_detail(str(e)) from e
    emit(dump_program(bt.program), args.out)
    return EXIT_OK


def check_trace_rel(args: argparse.Namespace) -> int:
    first, second = read_trace(args.first), read_trace(args.second)
    if args.ren == "auto":
        ren = find_shift(first, second, config.SHIFT_BOUND)
        if ren is None:
            raise ERROR_NOT_RELATED.with_detail(f"no shift within {config.SHIFT_BOUND}")
    else:
        ren = read_renaming(args.ren)
        if not trace_related(ren, first, second):
            raise ERROR_NOT_RELATED.with_detail(ren.describe())
    print(f"related under {ren.describe()}", file=sys.stderr)
    return EXIT_OK


def _names(args: argparse.Namespace) -> Interface:
    if args.program:
        return read_program(args.program, args.format).intf
    return net_main(1).intf.merge(net_library("benign", 1).intf)


def _location(intf: Interface, text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ERROR_INVALID_LOCATION.with_detail(text)
    try:
        return intf.resolve(parts[0]), int(parts[1]), int(parts[2])
    except ValueError as e:
        raise ERROR_INVALID_LOCATION.with_detail(str(e)) from e


def check_safety(args: argparse.Namespace) -> int:
    """
    Evaluates nowrite on a trace.

    Component names resolve through --program, or through the Net example
    (Main, Net) when no program is given.
    """
    intf = _names(args)
    loc = _location(intf, args.loc)
    main = intf.resolve(args.main) if args.main else loc[0]
    prop = NowriteProperty(loc, main, intf.resolve(args.lib), args.proc)
    if not prop.holds(read_trace(args.trace)):
        raise ERROR_UNSAFE.with_detail(
            f"{args.lib}.{args.proc} changes {args.loc}"
        )
    print("nowrite holds", file=sys.stderr)
    return EXIT_OK


def register(subparsers) -> None:
    p = subparsers.add_parser("strip-df", help="project a data-flow trace to interactions")
    p.add_argument("trace")
    p.add_argument("-o", "--out")
    p.add_argument("--no-mem", "--elide-memory", dest="elide_memory", action="store_true")
    p.set_defaults(func=strip_df)

    p = subparsers.add_parser("backtranslate", help="build a source program replaying a trace")
    p.add_argument("trace")
    p.add_argument(
        "--intf",
        "--program",
        dest="program",
        required=True,
        help="the Mach program that produced it",
    )
    add_format(p)
    p.add_argument("-o", "--out")
    p.set_defaults(func=backtranslate_command)

    p = subparsers.add_parser("check-trace-rel", help="check two traces are related")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--ren", default="identity", help="identity, shift:K, table:FILE or auto")
    p.set_defaults(func=check_trace_rel)

    p = subparsers.add_parser("check-safety", help="evaluate a safety property on a trace")
    p.add_argument("property", choices=("nowrite",))
    p.add_argument("trace")
    p.add_argument("--loc", required=True, help="protected location COMP:BLOCK:OFFSET")
    p.add_argument("--main", default=None, help="calling component (the location's owner)")
    p.add_argument("--lib", default="Net")
    p.add_argument("--proc", default="receive")
    p.add_argument("--program", default=None, help="program whose names to resolve")
    add_format(p)
    p.set_defaults(func=check_safety)
