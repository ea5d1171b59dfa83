"""SafeP: a safe imperative source language with a continuation-passing
small-step semantics that emits interaction events."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Mapping, Union

from interface import MAIN_PROC, Interface, procedure_id, procedure_table
from memory import (
    BinaryOperator,
    Int,
    Memory,
    MemoryFault,
    Permission,
    Ptr,
    Value,
    alloc,
    code_ptr,
    data_ptr,
    eval_binop,
    initial_memory,
    load,
    store,
)
from outcomes import Done, OutOfFuel, RunResult, Stuck
from traces import CallEvent, InteractionEvent, RetEvent, Trace

logger = logging.getLogger(__name__)


# Expressions


@dataclass(frozen=True, slots=True)
class Val:
    v: Value


@dataclass(frozen=True, slots=True)
class Arg:
    pass


@dataclass(frozen=True, slots=True)
class Local:
    pass


@dataclass(frozen=True, slots=True)
class BinOp:
    op: BinaryOperator
    e1: Expr
    e2: Expr


@dataclass(frozen=True, slots=True)
class Seq:
    e1: Expr
    e2: Expr


@dataclass(frozen=True, slots=True)
class If:
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True, slots=True)
class Alloc:
    size: Expr


@dataclass(frozen=True, slots=True)
class Deref:
    addr: Expr


@dataclass(frozen=True, slots=True)
class Assign:
    """`addr := value`; the value is evaluated first."""

    addr: Expr
    value: Expr


@dataclass(frozen=True, slots=True)
class Call:
    comp: int
    proc: str
    arg: Expr


@dataclass(frozen=True, slots=True)
class CallPtr:
    """`*[fn](arg)`; the argument is evaluated first."""

    fn: Expr
    arg: Expr


@dataclass(frozen=True, slots=True)
class FunPtr:
    proc: str


@dataclass(frozen=True, slots=True)
class Exit:
    pass


Expr = Union[
    Val, Arg, Local, BinOp, Seq, If, Alloc, Deref, Assign, Call, CallPtr, FunPtr, Exit
]

ARG = Arg()
LOCAL = Local()
EXIT = Exit()


def seq_all(exprs: list[Expr]) -> Expr:
    """Sequences expressions as a balanced tree of Seq nodes."""
    if not exprs:
        return Val(Int(0))
    if len(exprs) == 1:
        return exprs[0]
    mid = len(exprs) // 2
    return Seq(seq_all(exprs[:mid]), seq_all(exprs[mid:]))


def local_plus(offset: int) -> Expr:
    if offset == 0:
        return LOCAL
    return BinOp(BinaryOperator.ADD, LOCAL, Val(Int(offset)))


def subexpressions(e: Expr) -> Iterator[Expr]:
    """Yields e and all its subexpressions without recursion."""
    todo = [e]
    while todo:
        cur = todo.pop()
        yield cur
        match cur:
            case BinOp(_, e1, e2) | Seq(e1, e2) | Assign(e1, e2) | CallPtr(e1, e2):
                todo.extend((e2, e1))
            case If(c, t, f):
                todo.extend((f, t, c))
            case Alloc(x) | Deref(x) | Call(_, _, x):
                todo.append(x)


# Continuations


@dataclass(frozen=True, slots=True)
class Kstop:
    pass


@dataclass(frozen=True, slots=True)
class Kbinop1:
    op: BinaryOperator
    e2: Expr
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kbinop2:
    op: BinaryOperator
    v1: Value
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kseq:
    e2: Expr
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kif:
    then: Expr
    orelse: Expr
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kalloc:
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kderef:
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kassign1:
    addr: Expr
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kassign2:
    value: Value
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kcall:
    comp: int
    proc: str
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kcallptr1:
    fn: Expr
    k: Continuation


@dataclass(frozen=True, slots=True)
class Kcallptr2:
    arg: Value
    k: Continuation


Continuation = Union[
    Kstop,
    Kbinop1,
    Kbinop2,
    Kseq,
    Kif,
    Kalloc,
    Kderef,
    Kassign1,
    Kassign2,
    Kcall,
    Kcallptr1,
    Kcallptr2,
]

KSTOP = Kstop()


# Programs and states


@dataclass(frozen=True)
class SourceProgram:
    """
    A (possibly partial) source program.

    Attributes:
        intf (Interface): Interface of every defined component.
        procs (Mapping[tuple[int, str], Expr]): Procedure bodies.
        buffers (Mapping[int, tuple[Value, ...]]): Initial static block contents.
    """

    intf: Interface
    procs: Mapping[tuple[int, str], Expr]
    buffers: Mapping[int, tuple[Value, ...]] = field(default_factory=dict)

    @cached_property
    def proc_table(self) -> dict[int, tuple[str, ...]]:
        return procedure_table(self.procs)

    def comps(self) -> frozenset[int]:
        return self.intf.comps()

    def buffer(self, comp: int) -> tuple[Value, ...]:
        return tuple(self.buffers.get(comp, ()))


@dataclass(frozen=True, slots=True)
class Frame:
    comp: int
    arg: Value
    k: Continuation
    below: Frame | None
    depth: int


@dataclass(frozen=True, slots=True)
class SourceState:
    cur: int
    stack: Frame | None
    mem: Memory
    k: Continuation
    e: Expr
    arg: Value

    @property
    def component(self) -> int:
        return self.cur

    @property
    def stack_depth(self) -> int:
        return 0 if self.stack is None else self.stack.depth


def _push(stack: Frame | None, comp: int, arg: Value, k: Continuation) -> Frame:
    depth = 1 if stack is None else stack.depth + 1
    return Frame(comp, arg, k, stack, depth)


def well_formed(program: SourceProgram, partial: bool = False) -> list[str]:
    """
    Lists the reasons a program cannot run.

    Args:
        program (SourceProgram): The program to check.
        partial (bool): Accept program parts (no main, imports from absent
                        components).

    Returns:
        list[str]: Violations; empty iff the program is well-formed.
    """
    intf = program.intf
    table = program.proc_table
    errors = intf.violations(table, partial)
    for comp, proc in program.procs:
        if comp not in intf:
            errors.append(f"procedure {comp}.{proc} belongs to no declared component")
    for comp, cells in program.buffers.items():
        if comp not in intf:
            errors.append(f"buffer for undeclared component {comp}")
        if any(isinstance(v, Ptr) for v in cells):
            errors.append(f"static buffer of component {comp} contains a pointer")
    for (comp, proc), body in program.procs.items():
        for e in subexpressions(body):
            match e:
                case Val(Ptr()):
                    errors.append(f"{comp}.{proc}: pointer literal")
                case Call(callee, name, _):
                    if callee == comp:
                        if name not in table.get(comp, ()):
                            errors.append(f"{comp}.{proc}: call to undefined {name}")
                    elif not intf.imports(comp, callee, name):
                        errors.append(
                            f"{comp}.{proc}: call to unimported {callee}.{name}"
                        )
                case FunPtr(name):
                    if name not in table.get(comp, ()):
                        errors.append(f"{comp}.{proc}: pointer to undefined {name}")
    return errors


def initial_state(program: SourceProgram) -> SourceState:
    """
    Builds the state that starts running main.

    Raises:
        ValueError: If there is no unique main.
    """
    main = program.intf.main_component()
    if main is None or (main, MAIN_PROC) not in program.procs:
        raise ValueError("program has no unique main procedure")
    mem = initial_memory({c: program.buffer(c) for c in program.intf})
    return SourceState(main, None, mem, KSTOP, program.procs[(main, MAIN_PROC)], Int(0))


StepResult = Union[tuple[SourceState, Union[InteractionEvent, None]], Stuck, Done]


def _return(s: SourceState, v: Value) -> StepResult:
    frame = s.stack
    if frame is None:
        return Done(v)
    if frame.comp == s.cur:
        return SourceState(s.cur, frame.below, s.mem, frame.k, Val(v), frame.arg), None
    event = RetEvent(s.mem, s.cur, frame.comp, v)
    return SourceState(frame.comp, frame.below, s.mem, frame.k, Val(v), frame.arg), event


def _call(
    program: SourceProgram, s: SourceState, callee: int, proc: str, k, v: Value
) -> StepResult:
    body = program.procs.get((callee, proc))
    if body is None:
        return Stuck(f"no procedure {callee}.{proc}")
    stack = _push(s.stack, s.cur, s.arg, k)
    if callee == s.cur:
        return SourceState(s.cur, stack, s.mem, KSTOP, body, v), None
    if not program.intf.imports(s.cur, callee, proc):
        return Stuck(f"{callee}.{proc} is not imported by {s.cur}")
    event = CallEvent(s.mem, s.cur, callee, proc, v)
    return SourceState(callee, stack, s.mem, KSTOP, body, v), event


def _continue(program: SourceProgram, s: SourceState, v: Value) -> StepResult:
    k = s.k

    def to(k2, e2, mem=s.mem):
        return SourceState(s.cur, s.stack, mem, k2, e2, s.arg), None

    match k:
        case Kstop():
            return _return(s, v)
        case Kbinop1(op, e2, k2):
            return to(Kbinop2(op, v, k2), e2)
        case Kbinop2(op, v1, k2):
            result = eval_binop(op, v1, v)
            if result is None:
                return Stuck(f"{op.value} undefined on {v1} and {v}")
            return to(k2, Val(result))
        case Kseq(e2, k2):
            return to(k2, e2)
        case Kif(then, orelse, k2):
            if not isinstance(v, Int):
                return Stuck(f"if on non-integer {v}")
            return to(k2, then if v.value != 0 else orelse)
        case Kalloc(k2):
            if not isinstance(v, Int) or v.value <= 0:
                return Stuck(f"alloc of invalid size {v}")
            mem, ptr = alloc(s.mem, s.cur, v.value)
            return to(k2, Val(Ptr(ptr)), mem)
        case Kderef(k2):
            if not isinstance(v, Ptr):
                return Stuck(f"dereference of non-pointer {v}")
            try:
                return to(k2, Val(load(s.mem, v.ptr)))
            except MemoryFault as e:
                return Stuck(str(e))
        case Kassign1(addr, k2):
            return to(Kassign2(v, k2), addr)
        case Kassign2(value, k2):
            if not isinstance(v, Ptr):
                return Stuck(f"assignment through non-pointer {v}")
            try:
                return to(k2, Val(value), store(s.mem, v.ptr, value))
            except MemoryFault as e:
                return Stuck(str(e))
        case Kcall(callee, proc, k2):
            return _call(program, s, callee, proc, k2, v)
        case Kcallptr1(fn, k2):
            return to(Kcallptr2(v, k2), fn)
        case Kcallptr2(arg, k2):
            names = program.proc_table.get(s.cur, ())
            if (
                not isinstance(v, Ptr)
                or v.ptr.perm is not Permission.CODE
                or v.ptr.comp != s.cur
                or v.ptr.offset != 0
                or not 0 <= v.ptr.block < len(names)
            ):
                return Stuck(f"call through invalid function pointer {v}")
            return to(Kcall(s.cur, names[v.ptr.block], k2), Val(arg))
    return Stuck(f"unknown continuation {k!r}")


def step(program: SourceProgram, s: SourceState) -> StepResult:
    """
    Performs one reduction step.

    Returns:
        The next state with the emitted event (or None), Stuck when no rule
        applies, or Done when the program terminated.
    """
    e = s.e
    if isinstance(e, Val):
        return _continue(program, s, e.v)

    def to(k2, e2):
        return SourceState(s.cur, s.stack, s.mem, k2, e2, s.arg), None

    match e:
        case Arg():
            return to(s.k, Val(s.arg))
        case Local():
            return to(s.k, Val(data_ptr(s.cur, 0, 0)))
        case FunPtr(proc):
            if proc not in program.proc_table.get(s.cur, ()):
                return Stuck(f"no procedure {proc} in component {s.cur}")
            pid = procedure_id(program.proc_table, s.cur, proc)
            return to(s.k, Val(code_ptr(s.cur, pid)))
        case BinOp(op, e1, e2):
            return to(Kbinop1(op, e2, s.k), e1)
        case Seq(e1, e2):
            return to(Kseq(e2, s.k), e1)
        case If(cond, then, orelse):
            return to(Kif(then, orelse, s.k), cond)
        case Alloc(size):
            return to(Kalloc(s.k), size)
        case Deref(addr):
            return to(Kderef(s.k), addr)
        case Assign(addr, value):
            return to(Kassign1(addr, s.k), value)
        case Call(callee, proc, arg):
            return to(Kcall(callee, proc, s.k), arg)
        case CallPtr(fn, arg):
            return to(Kcallptr1(fn, s.k), arg)
        case Exit():
            return Done(Int(0))
    return Stuck(f"unknown expression {e!r}")


Monitor = Callable[[SourceState, Union[InteractionEvent, None]], None]


def run(
    program: SourceProgram, fuel: int, monitor: Monitor | None = None
) -> RunResult:
    """
    Runs a whole program for at most `fuel` steps.

    Args:
        program (SourceProgram): A well-formed whole program.
        fuel (int): Step budget.
        monitor (Monitor | None): Called after every step with the new state
                                  and the emitted event.

    Returns:
        RunResult: The interaction trace, the outcome and the last state.
    """
    s = initial_state(program)
    if monitor is not None:
        monitor(s, None)
    events: list[InteractionEvent] = []
    steps = 0
    while True:
        if steps >= fuel:
            outcome = OutOfFuel()
            break
        result = step(program, s)
        if isinstance(result, (Done, Stuck)):
            outcome = result
            break
        s, event = result
        steps += 1
        if event is not None:
            events.append(event)
        if monitor is not None:
            monitor(s, event)
    logger.debug("source run: %s events, %s steps, %s", len(events), steps, outcome)
    return RunResult(Trace(tuple(events)), outcome, s, steps)
