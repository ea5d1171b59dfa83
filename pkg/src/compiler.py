"""SafeP to Mach code generation, and linking and splitting of program parts."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TypeVar

import config
from interface import MAIN_PROC, Interface, procedure_id, procedure_table
from memory import RUNTIME_BLOCK, BinaryOperator, Int, Value, code_ptr, data_ptr
from registers import Register
from source_lang import (
    Alloc as SAlloc,
    Arg,
    Assign,
    BinOp as SBinOp,
    Call as SCall,
    CallPtr,
    Deref,
    Exit,
    Expr,
    FunPtr,
    If,
    Local,
    Seq,
    SourceProgram,
    Val,
)
from target_lang import (
    CALL_FLAG_CELL,
    SAVED_SP_CELL,
    Alloc,
    BinOp,
    Bnz,
    Call,
    Const,
    Halt,
    Instr,
    Jal,
    Jump,
    JumpFunPtr,
    Label,
    Load,
    MachProgram,
    Mov,
    PtrOfLabel,
    Return,
    Store,
)

logger = logging.getLogger(__name__)

COM = Register.COM
R1 = Register.R1
AUX1 = Register.AUX1
AUX2 = Register.AUX2
SP = Register.SP
RA = Register.RA
ARG = Register.ARG


class LinkError(Exception):
    """Raised when two program parts cannot be linked."""


@dataclass
class CodegenCtx:
    """
    Per-component code generation state.

    Attributes:
        comp (int): Component being compiled.
        proc_table (dict[int, tuple[str, ...]]): Procedure ids of the program.
        counter (int): Next fresh label number, shared by all procedures of
                       the component so labels stay unique component-wide.
    """

    comp: int
    proc_table: dict[int, tuple[str, ...]] = field(default_factory=dict)
    counter: int = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"$L{self.counter}"

    def runtime_cell(self, cell: int) -> Value:
        return data_ptr(self.comp, RUNTIME_BLOCK, cell)


def entry_label(proc: str) -> str:
    return f"$entry.{proc}"


def push(r: Register) -> list[Instr]:
    return [Store(SP, r), Const(Int(1), R1), BinOp(BinaryOperator.ADD, SP, R1, SP)]


def pop(r: Register) -> list[Instr]:
    return [Const(Int(1), R1), BinOp(BinaryOperator.SUB, SP, R1, SP), Load(SP, r)]


def _set_call_flag(ctx: CodegenCtx, scratch: Register) -> list[Instr]:
    return [
        Const(ctx.runtime_cell(CALL_FLAG_CELL), AUX1),
        Const(Int(1), scratch),
        Store(AUX1, scratch),
    ]


def compile_expr(ctx: CodegenCtx, e: Expr) -> list[Instr]:
    """
    Compiles an expression; its value ends up in r_COM.

    Temporaries live on the stack in block −1, addressed by r_SP.
    """
    c = ctx.comp
    match e:
        case Val(v):
            return [Const(v, COM)]
        case Arg():
            return [Mov(ARG, COM)]
        case Local():
            return [Const(data_ptr(c, 0, 0), COM)]
        case FunPtr(proc):
            return [Const(code_ptr(c, procedure_id(ctx.proc_table, c, proc)), COM)]
        case SBinOp(op, e1, e2):
            return [
                *compile_expr(ctx, e1),
                *push(COM),
                *compile_expr(ctx, e2),
                *pop(AUX1),
                BinOp(op, AUX1, COM, COM),
            ]
        case Seq(e1, e2):
            return compile_expr(ctx, e1) + compile_expr(ctx, e2)
        case If(cond, then, orelse):
            l_then, l_end = ctx.fresh(), ctx.fresh()
            return [
                *compile_expr(ctx, cond),
                Bnz(COM, l_then),
                *compile_expr(ctx, orelse),
                PtrOfLabel(l_end, R1),
                Jump(R1),
                Label(l_then),
                *compile_expr(ctx, then),
                Label(l_end),
            ]
        case SAlloc(size):
            return [*compile_expr(ctx, size), Alloc(COM, COM)]
        case Deref(addr):
            return [*compile_expr(ctx, addr), Load(COM, COM)]
        case Assign(addr, value):
            return [
                *compile_expr(ctx, value),
                *push(COM),
                *compile_expr(ctx, addr),
                Mov(COM, AUX1),
                *pop(COM),
                Store(AUX1, COM),
            ]
        case SCall(callee, proc, arg) if callee == c:
            return [
                *compile_expr(ctx, arg),
                *push(ARG),
                *_set_call_flag(ctx, AUX2),
                Jal(entry_label(proc)),
                *pop(ARG),
            ]
        case SCall(callee, proc, arg):
            return [
                *compile_expr(ctx, arg),
                *push(ARG),
                Const(ctx.runtime_cell(SAVED_SP_CELL), AUX1),
                Store(AUX1, SP),
                Call(callee, proc),
                Const(ctx.runtime_cell(SAVED_SP_CELL), AUX1),
                Load(AUX1, SP),
                *pop(ARG),
            ]
        case CallPtr(fn, arg):
            l_ret = ctx.fresh()
            return [
                *compile_expr(ctx, arg),
                *push(COM),
                *compile_expr(ctx, fn),
                Mov(COM, AUX2),
                *pop(COM),
                *push(ARG),
                *_set_call_flag(ctx, R1),
                PtrOfLabel(l_ret, RA),
                JumpFunPtr(AUX2),
                Label(l_ret),
                *pop(ARG),
            ]
        case Exit():
            return [Const(Int(0), COM), Halt()]
    raise ValueError(f"cannot compile {e!r}")


def compile_proc(ctx: CodegenCtx, proc: str, body: Expr) -> list[Instr]:
    """
    Compiles one procedure with its single entry point.

    The entry tests the call flag of the runtime block: internal callers set
    it before jumping, cross-component callers never do. External entries
    reload the stack pointer saved in the runtime block and leave through
    Return (Halt for main); internal ones jump back through r_RA.
    """
    l_int, l_body, l_ret = f"$int.{proc}", f"$body.{proc}", f"$ret.{proc}"
    leave = Halt() if proc == MAIN_PROC else Return()
    return [
        Label(entry_label(proc)),
        Const(ctx.runtime_cell(CALL_FLAG_CELL), AUX1),
        Load(AUX1, AUX2),
        Bnz(AUX2, l_int),
        Const(ctx.runtime_cell(SAVED_SP_CELL), AUX1),
        Load(AUX1, SP),
        Const(Int(0), RA),
        Const(Int(0), AUX2),
        PtrOfLabel(l_body, R1),
        Jump(R1),
        Label(l_int),
        Const(Int(0), AUX2),
        Store(AUX1, AUX2),
        Const(Int(1), AUX2),
        Label(l_body),
        *push(AUX2),
        *push(RA),
        Mov(COM, ARG),
        *compile_expr(ctx, body),
        *pop(RA),
        *pop(AUX2),
        Bnz(AUX2, l_ret),
        Const(ctx.runtime_cell(SAVED_SP_CELL), AUX1),
        Store(AUX1, SP),
        leave,
        Label(l_ret),
        Jump(RA),
    ]


def compile_program(program: SourceProgram, stack_size: int | None = None) -> MachProgram:
    """
    Compiles a (possibly partial) source program.

    Args:
        program (SourceProgram): A well-formed program or program part.
        stack_size (int | None): Words in each component's runtime block,
                                 config.STACK_SIZE by default.

    Returns:
        MachProgram: Same interface and static buffers, one runtime block
                     per component.
    """
    stack_size = config.STACK_SIZE if stack_size is None else stack_size
    table = procedure_table(program.procs)
    ctxs = {c: CodegenCtx(c, table) for c in program.intf}
    procs = {}
    for comp, proc in sorted(program.procs):
        ctx = ctxs.setdefault(comp, CodegenCtx(comp, table))
        procs[(comp, proc)] = tuple(compile_proc(ctx, proc, program.procs[(comp, proc)]))
    logger.debug(
        "compiled %s procedures, %s instructions",
        len(procs),
        sum(len(code) for code in procs.values()),
    )
    return MachProgram(
        program.intf,
        procs,
        {c: program.buffer(c) for c in program.buffers},
        {c: stack_size for c in program.intf},
    )


Program = TypeVar("Program", SourceProgram, MachProgram)


def _rebuild(program: Program, intf: Interface, procs, buffers, runtime) -> Program:
    if isinstance(program, MachProgram):
        return MachProgram(intf, procs, buffers, runtime)
    return SourceProgram(intf, procs, buffers)


def link(p1: Program, p2: Program) -> Program:
    """
    Links two program parts of the same language into a whole program.

    Raises:
        LinkError: On overlapping components, unresolved imports or a main
                   count other than one.
    """
    if type(p1) is not type(p2):
        raise LinkError("cannot link a source part with a machine part")
    try:
        intf = p1.intf.merge(p2.intf)
    except ValueError as e:
        raise LinkError(str(e)) from e
    procs = {**p1.procs, **p2.procs}
    errors = intf.violations(procedure_table(procs))
    if errors:
        raise LinkError("; ".join(errors))
    runtime = {**getattr(p1, "runtime", {}), **getattr(p2, "runtime", {})}
    return _rebuild(p1, intf, procs, {**p1.buffers, **p2.buffers}, runtime)


def split(program: Program, comps) -> tuple[Program, Program]:
    """Partitions a program into the given components and the others."""
    keep = set(comps)

    def part(inside: bool) -> Program:
        chosen = {c for c in program.intf if (c in keep) == inside}
        return _rebuild(
            program,
            program.intf.restrict(chosen),
            {k: v for k, v in program.procs.items() if k[0] in chosen},
            {c: v for c, v in program.buffers.items() if c in chosen},
            {c: v for c, v in getattr(program, "runtime", {}).items() if c in chosen},
        )

    return part(True), part(False)
