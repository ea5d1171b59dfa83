"""Interaction and data-flow events, traces, shared-memory reachability and
trace-level safety predicates."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Union

from memory import (
    BinaryOperator,
    Memory,
    MemoryFault,
    Permission,
    Pointer,
    Ptr,
    Value,
    eval_binop,
    filter_blocks,
    load,
)
from registers import Register, RegisterFile, write

logger = logging.getLogger(__name__)

Location = tuple[int, int, int]
BlockId = tuple[int, int]


@dataclass(frozen=True, slots=True)
class CallEvent:
    mem: Memory
    caller: int
    callee: int
    proc: str
    arg: Value


@dataclass(frozen=True, slots=True)
class RetEvent:
    mem: Memory
    prev: int
    next: int
    val: Value


@dataclass(frozen=True, slots=True)
class DfCall:
    mem: Memory
    reg: RegisterFile
    caller: int
    callee: int
    proc: str
    arg: Value


@dataclass(frozen=True, slots=True)
class DfRet:
    mem: Memory
    reg: RegisterFile
    prev: int
    next: int
    val: Value


@dataclass(frozen=True, slots=True)
class DfConst:
    mem: Memory
    reg: RegisterFile
    cur: int
    value: Value
    rd: Register


@dataclass(frozen=True, slots=True)
class DfMov:
    mem: Memory
    reg: RegisterFile
    cur: int
    rs: Register
    rd: Register


@dataclass(frozen=True, slots=True)
class DfBinOp:
    """Carries the register file before the operation."""

    mem: Memory
    reg: RegisterFile
    cur: int
    op: BinaryOperator
    r1: Register
    r2: Register
    rd: Register


@dataclass(frozen=True, slots=True)
class DfLoad:
    mem: Memory
    reg: RegisterFile
    cur: int
    rp: Register
    rd: Register


@dataclass(frozen=True, slots=True)
class DfStore:
    """Carries the memory after the store."""

    mem: Memory
    reg: RegisterFile
    cur: int
    rp: Register
    rs: Register


@dataclass(frozen=True, slots=True)
class DfAlloc:
    mem: Memory
    reg: RegisterFile
    cur: int
    rp: Register
    rsize: Register


InteractionEvent = Union[CallEvent, RetEvent]
DfEvent = Union[DfCall, DfRet, DfConst, DfMov, DfBinOp, DfLoad, DfStore, DfAlloc]
Event = Union[InteractionEvent, DfEvent]

EVENT_KINDS: dict[type, str] = {
    CallEvent: "Call",
    RetEvent: "Ret",
    DfCall: "dfCall",
    DfRet: "dfRet",
    DfConst: "Const",
    DfMov: "Mov",
    DfBinOp: "BinOp",
    DfLoad: "Load",
    DfStore: "Store",
    DfAlloc: "Alloc",
}


def kind(event: Event) -> str:
    return EVENT_KINDS[type(event)]


def is_border(event: Event) -> bool:
    return isinstance(event, (CallEvent, RetEvent, DfCall, DfRet))


def owner(event: DfEvent) -> int:
    """The component responsible for emitting a data-flow event."""
    if isinstance(event, DfCall):
        return event.caller
    if isinstance(event, DfRet):
        return event.prev
    return event.cur


def holder(event: DfEvent) -> int:
    """The component holding the registers once the event happened."""
    if isinstance(event, DfCall):
        return event.callee
    if isinstance(event, DfRet):
        return event.next
    return event.cur


def regs_after(event: DfEvent) -> RegisterFile:
    """The register file right after the event."""
    if isinstance(event, DfBinOp):
        result = eval_binop(event.op, event.reg[event.r1], event.reg[event.r2])
        if result is None:
            raise ValueError("binop event on undefined operands")
        return write(event.reg, event.rd, result)
    return event.reg


def _data_pointers(values: Iterable[Value]) -> Iterator[Pointer]:
    for v in values:
        if isinstance(v, Ptr) and v.ptr.perm is Permission.DATA:
            yield v.ptr


def _close(mem: Memory, shared: set[BlockId]) -> None:
    todo = list(shared)
    while todo:
        comp, block_id = todo.pop()
        block = mem.block(comp, block_id)
        if block is None:
            continue
        for ptr in _data_pointers(block.cells()):
            loc = (ptr.comp, ptr.block)
            if loc not in shared:
                shared.add(loc)
                todo.append(loc)


@dataclass(frozen=True)
class Trace:
    """An immutable sequence of events; the same type holds both alphabets."""

    events: tuple[Event, ...] = ()

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Trace(self.events[index])
        return self.events[index]

    def append(self, event: Event) -> Trace:
        return Trace(self.events + (event,))

    @cached_property
    def shared(self) -> tuple[frozenset[BlockId], ...]:
        """
        Shared blocks after each event.

        Entry i holds the blocks transitively reachable, at the memory of
        event i, from pointers passed on events 0..i, together with every
        block shared earlier.
        """
        acc: set[BlockId] = set()
        result = []
        for event in self.events:
            if isinstance(event, (CallEvent, DfCall)):
                passed = event.arg
            elif isinstance(event, (RetEvent, DfRet)):
                passed = event.val
            else:
                result.append(frozenset(acc))
                continue
            for ptr in _data_pointers((passed,)):
                acc.add((ptr.comp, ptr.block))
            _close(event.mem, acc)
            result.append(frozenset(acc))
        return tuple(result)

    def shared_at(self, i: int) -> frozenset[BlockId]:
        """Shared blocks after the first i events."""
        return self.shared[i - 1] if i > 0 else frozenset()


def remove_df(trace: Trace) -> Trace:
    """Projects a data-flow trace to its interaction events."""
    events = []
    for event in trace:
        if isinstance(event, DfCall):
            events.append(
                CallEvent(event.mem, event.caller, event.callee, event.proc, event.arg)
            )
        elif isinstance(event, DfRet):
            events.append(RetEvent(event.mem, event.prev, event.next, event.val))
        elif isinstance(event, (CallEvent, RetEvent)):
            events.append(event)
    return Trace(tuple(events))


def shared_blocks(trace: Trace) -> frozenset[BlockId]:
    return trace.shared_at(len(trace))


def shared_proj(mem: Memory, shared: Iterable[BlockId]) -> Memory:
    keep = set(shared)
    return filter_blocks(mem, lambda c, b: (c, b) in keep)


def private_proj(mem: Memory, shared: Iterable[BlockId]) -> Memory:
    keep = set(shared)
    return filter_blocks(mem, lambda c, b: (c, b) not in keep)


def match_events(e1: InteractionEvent, e2: InteractionEvent) -> bool:
    match e1, e2:
        case CallEvent(), CallEvent():
            return (e1.caller, e1.callee, e1.proc) == (e2.caller, e2.callee, e2.proc)
        case RetEvent(), RetEvent():
            return (e1.prev, e1.next) == (e2.prev, e2.next)
    return False


def well_bracketed(trace: Trace) -> bool:
    """Checks that every return answers the pending call."""
    pending: list[tuple[int, int]] = []
    for event in remove_df(trace) if _has_df(trace) else trace:
        if isinstance(event, CallEvent):
            pending.append((event.caller, event.callee))
        elif isinstance(event, RetEvent):
            if not pending or pending[-1] != (event.next, event.prev):
                return False
            pending.pop()
    return True


def _has_df(trace: Trace) -> bool:
    return any(not isinstance(e, (CallEvent, RetEvent)) for e in trace)


def find_matching_ret(trace: Trace, i: int) -> int | None:
    """Index of the return answering the call at index i, if any."""
    depth = 0
    for j in range(i + 1, len(trace)):
        event = trace[j]
        if isinstance(event, CallEvent):
            depth += 1
        elif isinstance(event, RetEvent):
            if depth == 0:
                return j
            depth -= 1
    return None


def _load_or_none(mem: Memory, loc: Location) -> Value | None:
    comp, block_id, offset = loc
    try:
        return load(mem, Pointer(Permission.DATA, comp, block_id, offset))
    except MemoryFault:
        return None


def check_safety_nowrite(
    trace: Trace, balance_loc: Location, main: int, lib: int, proc: str
) -> bool:
    """
    Checks that no call from `main` to `lib.proc` changes a location.

    Args:
        trace (Trace): An interaction trace.
        balance_loc (Location): The protected (component, block, offset).
        main (int): Calling component.
        lib (int): Called component.
        proc (str): Called procedure.

    Returns:
        bool: False iff some matched call returns with a different value at
              the location. Calls without a return in the trace are ignored.
    """
    for i, event in enumerate(trace):
        if not isinstance(event, CallEvent):
            continue
        if (event.caller, event.callee, event.proc) != (main, lib, proc):
            continue
        j = find_matching_ret(trace, i)
        if j is None:
            continue
        before = _load_or_none(event.mem, balance_loc)
        after = _load_or_none(trace[j].mem, balance_loc)
        if before != after:
            logger.info(
                "nowrite violated by call %s: %s became %s", i, before, after
            )
            return False
    return True


@dataclass(frozen=True, slots=True)
class NowriteProperty:
    """A location a library procedure must leave untouched."""

    balance_loc: Location
    main: int
    lib: int
    proc: str

    def holds(self, trace: Trace) -> bool:
        if _has_df(trace):
            trace = remove_df(trace)
        return check_safety_nowrite(trace, self.balance_loc, self.main, self.lib, self.proc)
