"""Data-flow back-translation: builds a source program that replays a machine
data-flow trace event by event, plus the monitor that checks it does."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

from interface import Interface, procedure_table
from memory import (
    ERROR,
    RUNTIME_BLOCK,
    STATIC_BLOCK,
    BinaryOperator,
    Int,
    Memory,
    MemoryFault,
    Permission,
    Pointer,
    Ptr,
    Value,
    load,
)
from registers import INITIAL_REGISTERS, Register, RegisterFile
from source_lang import (
    LOCAL,
    Alloc,
    Arg,
    Assign,
    BinOp,
    Call,
    Deref,
    Exit,
    Expr,
    FunPtr,
    If,
    Seq,
    SourceProgram,
    SourceState,
    Val,
    local_plus,
    seq_all,
)
from target_lang import STACK_BASE, MachProgram, initial_target_memory
from traces import (
    CallEvent,
    DfAlloc,
    DfBinOp,
    DfCall,
    DfConst,
    DfEvent,
    DfLoad,
    DfMov,
    DfRet,
    DfStore,
    RetEvent,
    Trace,
    holder,
    owner,
    regs_after,
    shared_blocks,
)

logger = logging.getLogger(__name__)

COUNTER = 0
EXTCALL = 1
REG_BASE = 2
INIT = 9
STATIC = 10
RUNTIME_MIRROR = 11


class BacktranslationError(Exception):
    """Raised on a trace no machine run can produce."""


def reg_offset(r: Register) -> int:
    return REG_BASE + int(r)


def metadata_size(runtime_size: int) -> int:
    return RUNTIME_MIRROR + runtime_size


def metadata_buffer(runtime_size: int) -> tuple[Value, ...]:
    """
    Initial source block 0 of a back-translated component.

    The counter, INIT flag and static mirror pointer start at 0, EXTCALL at 1,
    the register slots mirror the initial register file, and the runtime
    mirror holds the initial call flag; the saved stack pointer is written
    by the prelude since buffers cannot hold pointers.
    """
    cells = [ERROR] * metadata_size(runtime_size)
    cells[COUNTER] = Int(0)
    cells[EXTCALL] = Int(1)
    for r in Register:
        cells[reg_offset(r)] = INITIAL_REGISTERS[r]
    cells[INIT] = Int(0)
    cells[STATIC] = Int(0)
    if runtime_size > 1:
        cells[RUNTIME_MIRROR + 1] = Int(0)
    return tuple(cells)


def mirror_value(v: Value) -> Value:
    """The source value standing for a target value."""
    if isinstance(v, Ptr) and v.ptr.perm is Permission.DATA:
        p = v.ptr
        if p.block == RUNTIME_BLOCK:
            return Ptr(Pointer(Permission.DATA, p.comp, 0, RUNTIME_MIRROR + p.offset))
        return Ptr(Pointer(Permission.DATA, p.comp, p.block + 1, p.offset))
    return v


def _slot(r: Register) -> Expr:
    return local_plus(reg_offset(r))


def _get(r: Register) -> Expr:
    return Deref(_slot(r))


def _set(offset: int, value: Expr) -> Expr:
    return Assign(local_plus(offset), value)


def _plus(e: Expr, offset: int) -> Expr:
    return e if offset == 0 else BinOp(BinaryOperator.ADD, e, Val(Int(offset)))


def invalidate_metadata() -> Expr:
    """Resets every register slot except r_COM."""
    return seq_all([_set(reg_offset(r), Val(ERROR)) for r in Register if r != Register.COM])


def expr_of_constval(comp: int, v: Value, reg: RegisterFile, rd: Register, names) -> Expr:
    """
    A source expression computing the mirror of a constant loaded into rd.

    Raises:
        BacktranslationError: If no machine instruction of `comp` can load v.
    """
    if not isinstance(v, Ptr):
        return Val(v)
    p = v.ptr
    if p.comp == comp and p.perm is Permission.CODE and 0 <= p.block < len(names):
        return _plus(FunPtr(names[p.block]), p.offset)
    if p.comp == comp and p.perm is Permission.DATA and p.block == 0:
        return _plus(Deref(local_plus(STATIC)), p.offset)
    if p.comp == comp and p.perm is Permission.DATA and p.block == RUNTIME_BLOCK:
        return local_plus(RUNTIME_MIRROR + p.offset)
    for r in Register:
        if r != rd and reg[r] == v:
            return _get(r)
    raise BacktranslationError(f"component {comp} cannot produce constant {v}")


def expr_of_event(event: DfEvent, names: tuple[str, ...]) -> Expr:
    """
    The fragment replaying one event in the component owning it.

    Every fragment but the return ends with a tail call into the component
    so the next event is dispatched.
    """
    comp = owner(event)
    again = Call(comp, names[0], Val(Int(0)))
    match event:
        case DfConst(_, reg, _, v, rd):
            row = _set(reg_offset(rd), expr_of_constval(comp, v, reg, rd, names))
        case DfMov(_, _, _, rs, rd):
            row = _set(reg_offset(rd), _get(rs))
        case DfBinOp(_, _, _, op, r1, r2, rd):
            row = _set(reg_offset(rd), BinOp(op, _get(r1), _get(r2)))
        case DfLoad(_, _, _, rp, rd):
            row = _set(reg_offset(rd), Deref(_get(rp)))
        case DfStore(_, _, _, rp, rs):
            row = Assign(_get(rp), _get(rs))
        case DfAlloc(_, _, _, rp, rsize):
            row = _set(reg_offset(rp), Alloc(_get(rsize)))
        case DfCall(_, _, _, callee, proc, _):
            return seq_all(
                [
                    _set(EXTCALL, Val(Int(1))),
                    _set(reg_offset(Register.COM), Call(callee, proc, _get(Register.COM))),
                    invalidate_metadata(),
                    _set(EXTCALL, Val(Int(0))),
                    again,
                ]
            )
        case DfRet():
            return Seq(_set(EXTCALL, Val(Int(1))), _get(Register.COM))
        case _:
            raise BacktranslationError(f"not a data-flow event: {event!r}")
    return Seq(row, again)


def _dispatch(rows: list[Expr], lo: int, hi: int) -> Expr:
    if lo == hi:
        if lo == len(rows):
            return Exit()
        return Seq(_set(COUNTER, Val(Int(lo + 1))), rows[lo])
    mid = (lo + hi) // 2
    return If(
        BinOp(BinaryOperator.LEQ, Deref(LOCAL), Val(Int(mid))),
        _dispatch(rows, lo, mid),
        _dispatch(rows, mid + 1, hi),
    )


def prelude(buffer: tuple[Value, ...], has_runtime: bool) -> Expr:
    """Allocates the static mirror, fills it, and sets the saved stack pointer."""
    steps: list[Expr] = [
        _set(INIT, Val(Int(1))),
        _set(STATIC, Alloc(Val(Int(max(len(buffer), 1))))),
    ]
    for offset, v in enumerate(buffer):
        if v != ERROR:
            steps.append(Assign(_plus(Deref(local_plus(STATIC)), offset), Val(v)))
    if has_runtime:
        steps.append(_set(RUNTIME_MIRROR, local_plus(RUNTIME_MIRROR + STACK_BASE)))
    return seq_all(steps)


@dataclass(frozen=True)
class Backtranslation:
    """
    A back-translated program with what its monitor needs.

    Attributes:
        program (SourceProgram): The source program.
        trace (Trace): The data-flow trace it replays.
        dispatch_roots (dict[int, Expr]): Dispatch expression of each component.
        initial_memory (Memory): Memory of the target run before any event.
    """

    program: SourceProgram
    trace: Trace
    dispatch_roots: dict[int, Expr]
    initial_memory: Memory
    runtime: Mapping[int, int] = field(default_factory=dict)


def attribute(trace: Trace, intf: Interface) -> list[int]:
    """
    Owners of the events, checking that control flows as a machine run would.

    Raises:
        BacktranslationError: On a foreign component or a broken control flow.
    """
    owners = []
    current = intf.main_component()
    for i, event in enumerate(trace):
        if isinstance(event, (CallEvent, RetEvent)):
            raise BacktranslationError(f"event {i} is not a data-flow event")
        comp = owner(event)
        if comp not in intf:
            raise BacktranslationError(f"event {i} belongs to unknown component {comp}")
        if comp != current:
            raise BacktranslationError(
                f"event {i} is emitted by {comp} while {current} has control"
            )
        owners.append(comp)
        current = holder(event)
    return owners


def backtranslate(
    trace: Trace,
    intf: Interface,
    buffers: Mapping[int, tuple[Value, ...]],
    runtime: Mapping[int, int] | None = None,
    procedures: Mapping[int, tuple[str, ...]] | None = None,
) -> Backtranslation:
    """
    Builds a source program replaying a data-flow trace.

    Args:
        trace (Trace): A data-flow trace produced by a machine run.
        intf (Interface): Interface of the machine program.
        buffers (Mapping[int, tuple[Value, ...]]): Target static buffers.
        runtime (Mapping[int, int] | None): Target runtime block sizes.
        procedures (Mapping[int, tuple[str, ...]] | None): Target procedure
            names; defaults to the exported ones (and main).

    Returns:
        Backtranslation: The program and its monitoring data.

    Raises:
        BacktranslationError: If the trace cannot come from a machine run,
            or shares an empty static block.
    """
    runtime = dict(runtime or {})
    if intf.main_component() is None:
        raise BacktranslationError("interface has no unique main component")
    owners = attribute(trace, intf)
    shared = shared_blocks(trace)
    for comp in intf:
        # Source allocations are never empty, so an empty static block has no mirror
        if not buffers.get(comp) and (comp, STATIC_BLOCK) in shared:
            raise BacktranslationError(f"the empty static block of {comp} is shared")
    if procedures is None:
        procedures = {}
        for comp in intf:
            procedures[comp] = intf[comp].exports
    table = procedure_table((c, p) for c in intf for p in procedures.get(c, ()))
    procs: dict[tuple[int, str], Expr] = {}
    roots: dict[int, Expr] = {}
    new_buffers = {}
    for comp in intf:
        names = table.get(comp, ())
        if not names:
            raise BacktranslationError(f"component {comp} has no procedure to mirror")
        rows = [expr_of_event(e, names) for e, o in zip(trace, owners) if o == comp]
        dispatch = _dispatch(rows, 0, len(rows))
        roots[comp] = dispatch
        entry = seq_all(
            [
                _set(reg_offset(Register.COM), Arg()),
                invalidate_metadata(),
                _set(EXTCALL, Val(Int(0))),
            ]
        )
        init = prelude(tuple(buffers.get(comp, ())), comp in runtime)
        body = Seq(
            If(Deref(local_plus(INIT)), Val(Int(0)), init),
            Seq(If(Deref(local_plus(EXTCALL)), entry, Val(Int(0))), dispatch),
        )
        for name in names:
            procs[(comp, name)] = body
        new_buffers[comp] = metadata_buffer(runtime.get(comp, 0))
    program = SourceProgram(intf, procs, new_buffers)
    logger.debug("back-translated %s events into %s procedures", len(trace), len(procs))
    initial = initial_target_memory(
        {c: tuple(buffers.get(c, ())) for c in intf}, runtime
    )
    return Backtranslation(program, trace, roots, initial, runtime)


def backtranslate_program(trace: Trace, program: MachProgram) -> Backtranslation:
    """Back-translates a trace of `program`, mirroring all its procedures."""
    return backtranslate(
        trace,
        program.intf,
        {c: program.buffer(c) for c in program.intf},
        program.runtime,
        program.proc_table,
    )


# Mimicking monitor


def _load(mem: Memory, comp: int, block: int, offset: int) -> Value | None:
    try:
        return load(mem, Pointer(Permission.DATA, comp, block, offset))
    except MemoryFault:
        return None


def _component_blocks(mem: Memory, comp: int) -> dict:
    cmem = mem.comps.get(comp)
    return dict(cmem.blocks) if cmem is not None else {}


def _mirror_problems(comp: int, target: Memory, source: Memory) -> list[str]:
    problems = []
    expected = set()
    for block_id, block in _component_blocks(target, comp).items():
        cells = block.cells()
        if block_id == RUNTIME_BLOCK:
            for o, v in enumerate(cells):
                if _load(source, comp, 0, RUNTIME_MIRROR + o) != mirror_value(v):
                    problems.append(f"runtime cell {comp}:{o} not mirrored")
                    break
            continue
        expected.add(block_id + 1)
        mirror = source.block(comp, block_id + 1)
        if mirror is None:
            problems.append(f"block {comp}:{block_id} has no mirror")
        elif mirror.size != max(block.size, 1 if block_id == 0 else 0):
            problems.append(f"block {comp}:{block_id} mirrored with size {mirror.size}")
        elif any(mirror.get(o) != mirror_value(v) for o, v in enumerate(cells)):
            problems.append(f"block {comp}:{block_id} not mirrored")
    present = set(_component_blocks(source, comp)) - {0}
    if present != expected:
        problems.append(
            f"component {comp} has blocks {sorted(present)}, expected {sorted(expected)}"
        )
    return problems


def mimicking_problems(
    bt: Backtranslation,
    last: DfEvent | None,
    nxt: DfEvent | None,
    counts: Mapping[int, int],
    state: SourceState,
) -> list[str]:
    """
    Compares a source state at a dispatch point with the target after `last`.

    Checks the register slots of the running component, the memory mirror
    of every initialized component, the event counters, and that the running
    component owns the next event.
    """
    problems = []
    regs = INITIAL_REGISTERS if last is None else regs_after(last)
    cur = state.cur
    for r in Register:
        if _load(state.mem, cur, 0, reg_offset(r)) != mirror_value(regs[r]):
            problems.append(f"slot {r.label} of {cur} does not mirror {regs[r]}")
    target = bt.initial_memory if last is None else last.mem
    for comp in bt.program.intf:
        if _load(state.mem, comp, 0, INIT) == Int(1):
            problems.extend(_mirror_problems(comp, target, state.mem))
        elif _component_blocks(target, comp) != _component_blocks(bt.initial_memory, comp):
            problems.append(f"component {comp} changed before its first entry")
        counter = _load(state.mem, comp, 0, COUNTER)
        if counter != Int(counts.get(comp, 0)):
            problems.append(
                f"counter of {comp} is {counter}, expected {counts.get(comp, 0)}"
            )
    if nxt is not None and owner(nxt) != cur:
        problems.append(f"next event belongs to {owner(nxt)}, not {cur}")
    return problems


def check_mimicking_state(
    bt: Backtranslation,
    prefix: Trace,
    suffix: Trace,
    state: SourceState,
    counts: Mapping[int, int] | None = None,
) -> bool:
    """
    Whether `state`, at a dispatch point, mimics the target after `prefix`.

    `counts` holds the number of `prefix` events per component when the
    caller already tracks it.
    """
    if counts is None:
        counts = {}
        for event in prefix:
            counts[owner(event)] = counts.get(owner(event), 0) + 1
    last = prefix[len(prefix) - 1] if len(prefix) else None
    nxt = suffix[0] if len(suffix) else None
    return not mimicking_problems(bt, last, nxt, counts, state)


class MimickingMonitor:
    """
    Source-run monitor asserting lock-step mimicking at every dispatch point.

    The i-th time a dispatch expression is about to run, the first i events
    have been replayed.
    """

    def __init__(self, bt: Backtranslation):
        self.bt = bt
        self.roots = {id(root) for root in bt.dispatch_roots.values()}
        self.boundary = 0
        self.counts: dict[int, int] = {}
        self.violations: list[tuple[int, list[str]]] = []

    def __call__(self, state: SourceState, event) -> None:
        if id(state.e) not in self.roots:
            return
        trace = self.bt.trace
        i = self.boundary
        if i > len(trace):
            self.violations.append((i, ["dispatch reached after the trace was replayed"]))
            return
        last = trace[i - 1] if i > 0 else None
        nxt = trace[i] if i < len(trace) else None
        if not check_mimicking_state(self.bt, trace[:i], trace[i:], state, self.counts):
            problems = mimicking_problems(self.bt, last, nxt, self.counts, state)
            logger.error("mimicking violated at boundary %s: %s", i, problems[0])
            self.violations.append((i, problems))
        if nxt is not None:
            self.counts[owner(nxt)] = self.counts.get(owner(nxt), 0) + 1
        self.boundary += 1

    @property
    def ok(self) -> bool:
        return not self.violations
