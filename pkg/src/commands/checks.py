"""Property check commands: enrichment, back-translation, recomposition,
the turn-taking witness and the robust-safety pipeline."""

from __future__ import annotations

import argparse
import logging
import sys

import config
import harness
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
    read_renaming,
)
from corpus import NET_KINDS, net_context, net_main, net_safety
from models.report import Status, Verdict
from source_lang import SourceProgram

logger = logging.getLogger(__name__)

ERROR_CHECK_FAILED = CommandError(EXIT_VIOLATION, "Check failed")
ERROR_NOT_SOURCE_PART = CommandError(EXIT_USAGE, "The program part must be a source program")


def _report(model, out: str | None, verdict: Verdict) -> int:
    emit(model.model_dump_json(indent=1), out)
    print(f"{verdict.check}: {verdict.status.value} {verdict.detail}", file=sys.stderr)
    if verdict.status is Status.FAILED:
        raise ERROR_CHECK_FAILED.with_detail(verdict.check)
    return EXIT_OK


def check_enrichment_command(args: argparse.Namespace) -> int:
    verdict = harness.check_enrichment(read_mach(args.program, args.format), args.fuel)
    return _report(verdict, args.report, verdict)


def check_backtranslation_command(args: argparse.Namespace) -> int:
    verdict = harness.check_backtranslation(read_mach(args.program, args.format), args.fuel)
    return _report(verdict, args.report, verdict)


def check_recomposition_command(args: argparse.Namespace) -> int:
    """Either the turn-taking witness or a recomposition of four given parts."""
    if args.example:
        witness = harness.check_naive_relation_fails(fuel=args.fuel)
        return _report(witness, args.report, witness.verdict)
    if len(args.parts) != 4:
        raise CommandError(EXIT_USAGE, "expected P1 C1 P2 C2, or --example turn-taking")
    p1, c1, p2, c2 = (read_mach(path, args.format, args.stack_size) for path in args.parts)
    ren1 = read_renaming(args.ren1) if args.ren1 else None
    ren2 = read_renaming(args.ren2) if args.ren2 else None
    report = harness.check_recomposition(p1, c1, p2, c2, args.fuel, ren1, ren2)
    if report.verdict.status is Status.SKIPPED:
        logger.warning("recomposition skipped: %s", report.verdict.detail)
    return _report(report, args.report, report.verdict)


def rsp_test_command(args: argparse.Namespace) -> int:
    """Runs the pipeline on the Net example or on generated cases."""
    if args.net:
        ps = net_main(args.size)
        result = harness.rsp_pipeline(
            ps, net_context(args.net, args.size), args.fuel, args.stack_size, net_safety(args.size)
        )
        for name, holds in result.nowrite.items():
            print(f"nowrite on {name}: {holds}", file=sys.stderr)
        return _report(result, args.report, result.verdict)
    if args.program and args.context:
        ps = read_program(args.program)
        if not isinstance(ps, SourceProgram):
            raise ERROR_NOT_SOURCE_PART
        ct = read_mach(args.context, args.format)
        result = harness.rsp_pipeline(ps, ct, args.fuel, args.stack_size)
        return _report(result, args.report, result.verdict)
    cfg = harness.GenConfig(fuel=args.fuel, stack_size=args.stack_size or config.STACK_SIZE)
    report = harness.rsp_test(args.seed, args.cases, cfg, args.workers)
    emit(report.model_dump_json(indent=1), args.report)
    print(
        f"rsp-test: {report.passed} passed, {report.failed} failed, {report.skipped} skipped",
        file=sys.stderr,
    )
    if not report.ok:
        seeds = ", ".join(str(r.seed) for r in report.results if r.status is Status.FAILED)
        raise ERROR_CHECK_FAILED.with_detail(f"failing seeds {seeds}")
    return EXIT_OK


def register(subparsers) -> None:
    p = subparsers.add_parser("check-enrichment", help="compare data-flow and plain traces")
    p.add_argument("program")
    add_fuel(p)
    add_format(p)
    p.add_argument("-o", "--report")
    p.set_defaults(func=check_enrichment_command)

    p = subparsers.add_parser("check-backtranslation", help="back-translate and replay a run")
    p.add_argument("program")
    add_fuel(p)
    add_format(p)
    p.add_argument("-o", "--report")
    p.set_defaults(func=check_backtranslation_command)

    p = subparsers.add_parser("check-recomposition", help="recompose P1 with C2 and monitor it")
    p.add_argument("parts", nargs="*", metavar="PART", help="P1 C1 P2 C2")
    p.add_argument("--example", choices=("turn-taking",), default=None)
    p.add_argument("--ren1", default=None)
    p.add_argument("--ren2", default=None)
    p.add_argument("--stack-size", type=int, default=None)
    add_fuel(p)
    add_format(p)
    p.add_argument("-o", "--report")
    p.set_defaults(func=check_recomposition_command)

    p = subparsers.add_parser("rsp-test", help="run the robust-safety pipeline")
    p.add_argument("--seed", type=int, default=config.SEED)
    p.add_argument("--cases", type=int, default=10)
    p.add_argument("--workers", type=int, default=config.WORKERS)
    p.add_argument("--net", choices=NET_KINDS, default=None, help="run on the Net example")
    p.add_argument("--size", type=int, default=None, help="Net iobuffer words")
    p.add_argument("--program", default=None, help="source program part")
    p.add_argument("--context", default=None, help="Mach context")
    p.add_argument("--stack-size", type=int, default=None)
    add_fuel(p)
    add_format(p)
    p.add_argument("-o", "--report")
    p.set_defaults(func=rsp_test_command)
