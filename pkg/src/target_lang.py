"""Mach: an assembly-like target with unstructured jumps, a register file and a
protected cross-component call stack, emitting data-flow events."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Union

from interface import MAIN_PROC, Interface, procedure_id, procedure_table
from memory import (
    RUNTIME_BLOCK,
    BinaryOperator,
    Block,
    ERROR,
    Int,
    Memory,
    MemoryFault,
    Permission,
    Pointer,
    Ptr,
    Value,
    alloc,
    data_ptr,
    eval_binop,
    initial_memory,
    load,
    store,
)
from outcomes import Done, OutOfFuel, RunResult, Stuck
from registers import INITIAL_REGISTERS, Register, RegisterFile, invalidate, write
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
)

logger = logging.getLogger(__name__)

SAVED_SP_CELL = 0
CALL_FLAG_CELL = 1
STACK_BASE = 2


class Instrument(enum.Enum):
    DATA_FLOW = "df"
    INTERACTION = "interaction"


# Instructions


@dataclass(frozen=True, slots=True)
class Const:
    imm: Value
    rd: Register


@dataclass(frozen=True, slots=True)
class Mov:
    rs: Register
    rd: Register


@dataclass(frozen=True, slots=True)
class BinOp:
    op: BinaryOperator
    r1: Register
    r2: Register
    rd: Register


@dataclass(frozen=True, slots=True)
class Label:
    name: str


@dataclass(frozen=True, slots=True)
class PtrOfLabel:
    name: str
    rd: Register


@dataclass(frozen=True, slots=True)
class Load:
    rp: Register
    rd: Register


@dataclass(frozen=True, slots=True)
class Store:
    rp: Register
    rs: Register


@dataclass(frozen=True, slots=True)
class Alloc:
    rp: Register
    rsize: Register


@dataclass(frozen=True, slots=True)
class Bnz:
    r: Register
    name: str


@dataclass(frozen=True, slots=True)
class Jump:
    r: Register


@dataclass(frozen=True, slots=True)
class JumpFunPtr:
    r: Register


@dataclass(frozen=True, slots=True)
class Jal:
    name: str


@dataclass(frozen=True, slots=True)
class Call:
    comp: int
    proc: str


@dataclass(frozen=True, slots=True)
class Return:
    pass


@dataclass(frozen=True, slots=True)
class Nop:
    pass


@dataclass(frozen=True, slots=True)
class Halt:
    pass


Instr = Union[
    Const,
    Mov,
    BinOp,
    Label,
    PtrOfLabel,
    Load,
    Store,
    Alloc,
    Bnz,
    Jump,
    JumpFunPtr,
    Jal,
    Call,
    Return,
    Nop,
    Halt,
]


# Programs and states


@dataclass(frozen=True)
class MachProgram:
    """
    A (possibly partial) machine program.

    Attributes:
        intf (Interface): Interface of every defined component.
        procs (Mapping[tuple[int, str], tuple[Instr, ...]]): Procedure code.
        buffers (Mapping[int, tuple[Value, ...]]): Initial static block contents.
        runtime (Mapping[int, int]): Size of the reserved runtime block of
                                     each compiled component.
    """

    intf: Interface
    procs: Mapping[tuple[int, str], tuple[Instr, ...]]
    buffers: Mapping[int, tuple[Value, ...]] = field(default_factory=dict)
    runtime: Mapping[int, int] = field(default_factory=dict)

    @cached_property
    def proc_table(self) -> dict[int, tuple[str, ...]]:
        return procedure_table(self.procs)

    @cached_property
    def code(self) -> dict[tuple[int, int], tuple[Instr, ...]]:
        """Code indexed by (component, procedure id)."""
        table = self.proc_table
        return {
            (comp, procedure_id(table, comp, name)): tuple(instrs)
            for (comp, name), instrs in self.procs.items()
        }

    @cached_property
    def labels(self) -> dict[tuple[int, str], Pointer]:
        """Label positions, resolved component-wide."""
        result = {}
        for (comp, pid), instrs in self.code.items():
            for i, instr in enumerate(instrs):
                if isinstance(instr, Label):
                    result.setdefault(
                        (comp, instr.name), Pointer(Permission.CODE, comp, pid, i + 1)
                    )
        return result

    @property
    def has_main(self) -> bool:
        main = self.intf.main_component()
        return main is not None and (main, MAIN_PROC) in self.procs

    def comps(self) -> frozenset[int]:
        return self.intf.comps()

    def buffer(self, comp: int) -> tuple[Value, ...]:
        return tuple(self.buffers.get(comp, ()))


@dataclass(frozen=True, slots=True)
class ReturnFrame:
    pc: Pointer
    below: ReturnFrame | None
    depth: int


@dataclass(frozen=True, slots=True)
class MachState:
    stack: ReturnFrame | None
    mem: Memory
    reg: RegisterFile
    pc: Pointer

    @property
    def component(self) -> int:
        return self.pc.comp

    @property
    def stack_depth(self) -> int:
        return 0 if self.stack is None else self.stack.depth


def runtime_block(comp: int, size: int) -> Block:
    """Initial runtime block: saved stack pointer, call flag, then the stack."""
    cells = [ERROR] * size
    cells[SAVED_SP_CELL] = data_ptr(comp, RUNTIME_BLOCK, STACK_BASE)
    cells[CALL_FLAG_CELL] = Int(0)
    return Block.of(cells)


def initial_target_memory(
    buffers: Mapping[int, tuple[Value, ...]], runtime: Mapping[int, int]
) -> Memory:
    mem = initial_memory(buffers)
    for comp, size in sorted(runtime.items()):
        mem = mem.with_block(comp, RUNTIME_BLOCK, runtime_block(comp, size))
    return mem


def initial_program_memory(program: MachProgram) -> Memory:
    return initial_target_memory(
        {c: program.buffer(c) for c in program.intf}, program.runtime
    )


def valid_immediate(program: MachProgram, comp: int, v: Value) -> bool:
    """Integers, Error, own code pointers, and own static or runtime block pointers."""
    if not isinstance(v, Ptr):
        return True
    p = v.ptr
    if p.comp != comp:
        return False
    if p.perm is Permission.CODE:
        return True
    return p.block == 0 or (p.block == RUNTIME_BLOCK and comp in program.runtime)


def well_formed(program: MachProgram, partial: bool = False) -> list[str]:
    """
    Lists the reasons a machine program cannot run.

    Args:
        program (MachProgram): The program.
        partial (bool): Accept program parts.

    Returns:
        list[str]: Violations, empty when well-formed.
    """
    intf = program.intf
    errors = intf.violations(program.proc_table, partial)
    for comp, cells in program.buffers.items():
        if any(isinstance(v, Ptr) for v in cells):
            errors.append(f"static buffer of component {comp} contains a pointer")
    for comp, size in program.runtime.items():
        if size <= STACK_BASE:
            errors.append(f"runtime block of component {comp} is too small")
    seen: dict[int, set[str]] = {}
    for (comp, proc), instrs in program.procs.items():
        if comp not in intf:
            errors.append(f"procedure {comp}.{proc} belongs to no declared component")
        labels = seen.setdefault(comp, set())
        for instr in instrs:
            if isinstance(instr, Label):
                if instr.name in labels:
                    errors.append(f"label {instr.name} defined twice in {comp}")
                labels.add(instr.name)
    for (comp, proc), instrs in program.procs.items():
        for instr in instrs:
            match instr:
                case Const(imm, _) if not valid_immediate(program, comp, imm):
                    errors.append(f"{comp}.{proc}: invalid immediate {imm}")
                case PtrOfLabel(name, _) | Bnz(_, name) | Jal(name):
                    if name not in seen.get(comp, ()):
                        errors.append(f"{comp}.{proc}: undefined label {name}")
                case Call(callee, name) if not intf.imports(comp, callee, name):
                    errors.append(f"{comp}.{proc}: call to unimported {callee}.{name}")
    return errors


def fetch(program: MachProgram, pc: Pointer) -> Instr:
    """
    Returns the instruction at pc.

    Raises:
        MemoryFault: On a DATA pc, unknown procedure or offset out of range.
    """
    if pc.perm is not Permission.CODE:
        raise MemoryFault(f"pc {pc} is not a code pointer")
    code = program.code.get((pc.comp, pc.block))
    if code is None:
        raise MemoryFault(f"no procedure at {pc}")
    if not 0 <= pc.offset < len(code):
        raise MemoryFault(f"pc {pc} outside procedure code")
    return code[pc.offset]


def find_label(program: MachProgram, pc: Pointer, name: str) -> Pointer | None:
    """Pointer to the instruction following `Label name` in pc's component."""
    return program.labels.get((pc.comp, name))


def entry(program: MachProgram, comp: int, proc: str) -> Pointer | None:
    if (comp, proc) not in program.procs:
        return None
    return Pointer(Permission.CODE, comp, procedure_id(program.proc_table, comp, proc), 0)


def initial_state(program: MachProgram) -> MachState:
    main = program.intf.main_component()
    pc = entry(program, main, MAIN_PROC) if main is not None else None
    if pc is None:
        raise ValueError("program has no unique main procedure")
    return MachState(None, initial_program_memory(program), INITIAL_REGISTERS, pc)


StepResult = Union[tuple[MachState, Union[DfEvent, None]], Stuck, Done]


def _code_target(v: Value, comp: int) -> Pointer | None:
    if isinstance(v, Ptr) and v.ptr.perm is Permission.CODE and v.ptr.comp == comp:
        return v.ptr
    return None


def step(program: MachProgram, s: MachState) -> StepResult:
    """
    Performs one machine step.

    Returns:
        The next state with the emitted data-flow event (or None), Stuck when
        a premise fails, or Done on Halt.
    """
    try:
        instr = fetch(program, s.pc)
    except MemoryFault as e:
        return Stuck(str(e))
    comp = s.pc.comp
    reg = s.reg
    nxt = s.pc.shifted(1)

    def to(pc=nxt, reg=reg, mem=s.mem, stack=s.stack):
        return MachState(stack, mem, reg, pc)

    match instr:
        case Nop() | Label():
            return to(), None
        case Const(imm, rd):
            reg2 = write(reg, rd, imm)
            return to(reg=reg2), DfConst(s.mem, reg2, comp, imm, rd)
        case Mov(rs, rd):
            reg2 = write(reg, rd, reg[rs])
            return to(reg=reg2), DfMov(s.mem, reg2, comp, rs, rd)
        case BinOp(op, r1, r2, rd):
            v = eval_binop(op, reg[r1], reg[r2])
            if v is None:
                return Stuck(f"{op.value} undefined on {reg[r1]} and {reg[r2]}")
            return to(reg=write(reg, rd, v)), DfBinOp(s.mem, reg, comp, op, r1, r2, rd)
        case PtrOfLabel(name, rd):
            target = find_label(program, s.pc, name)
            if target is None:
                return Stuck(f"unknown label {name}")
            reg2 = write(reg, rd, Ptr(target))
            return to(reg=reg2), DfConst(s.mem, reg2, comp, Ptr(target), rd)
        case Jal(name):
            target = find_label(program, s.pc, name)
            if target is None:
                return Stuck(f"unknown label {name}")
            ra = Ptr(nxt)
            reg2 = write(reg, Register.RA, ra)
            return to(pc=target, reg=reg2), DfConst(s.mem, reg2, comp, ra, Register.RA)
        case Jump(r):
            target = _code_target(reg[r], comp)
            if target is None:
                return Stuck(f"jump to {reg[r]} leaves component {comp}")
            return to(pc=target), None
        case JumpFunPtr(r):
            target = _code_target(reg[r], comp)
            if target is None or target.offset != 0:
                return Stuck(f"invalid function pointer {reg[r]}")
            return to(pc=target), None
        case Bnz(r, name):
            v = reg[r]
            if not isinstance(v, Int):
                return Stuck(f"branch on non-integer {v}")
            if v.value == 0:
                return to(), None
            target = find_label(program, s.pc, name)
            if target is None:
                return Stuck(f"unknown label {name}")
            return to(pc=target), None
        case Load(rp, rd):
            p = reg[rp]
            if not isinstance(p, Ptr):
                return Stuck(f"load through non-pointer {p}")
            try:
                v = load(s.mem, p.ptr)
            except MemoryFault as e:
                return Stuck(str(e))
            reg2 = write(reg, rd, v)
            return to(reg=reg2), DfLoad(s.mem, reg2, comp, rp, rd)
        case Store(rp, rs):
            p = reg[rp]
            if not isinstance(p, Ptr):
                return Stuck(f"store through non-pointer {p}")
            try:
                mem2 = store(s.mem, p.ptr, reg[rs])
            except MemoryFault as e:
                return Stuck(str(e))
            return to(mem=mem2), DfStore(mem2, reg, comp, rp, rs)
        case Alloc(rp, rsize):
            size = reg[rsize]
            if not isinstance(size, Int) or size.value <= 0:
                return Stuck(f"alloc of invalid size {size}")
            mem2, ptr = alloc(s.mem, comp, size.value)
            reg2 = write(reg, rp, Ptr(ptr))
            return to(reg=reg2, mem=mem2), DfAlloc(mem2, reg2, comp, rp, rsize)
        case Call(callee, proc):
            if callee == comp:
                return Stuck(f"call to own component {comp}")
            if not program.intf.imports(comp, callee, proc):
                return Stuck(f"{callee}.{proc} is not imported by {comp}")
            target = entry(program, callee, proc)
            if target is None:
                return Stuck(f"no procedure {callee}.{proc}")
            reg2 = invalidate(reg)
            depth = 1 if s.stack is None else s.stack.depth + 1
            stack = ReturnFrame(nxt, s.stack, depth)
            event = DfCall(s.mem, reg2, comp, callee, proc, reg[Register.COM])
            return to(pc=target, reg=reg2, stack=stack), event
        case Return():
            if s.stack is None:
                return Stuck("return with an empty call stack")
            target = s.stack.pc
            if target.comp == comp:
                return Stuck("return into the same component")
            reg2 = invalidate(reg)
            event = DfRet(s.mem, reg2, comp, target.comp, reg[Register.COM])
            return to(pc=target, reg=reg2, stack=s.stack.below), event
        case Halt():
            return Done(reg[Register.COM])
    return Stuck(f"unknown instruction {instr!r}")


def _interaction_event(s: MachState, s2: MachState, instr: Instr) -> CallEvent | RetEvent | None:
    """Interaction event of a step, computed from the states alone."""
    if isinstance(instr, Call):
        return CallEvent(s.mem, s.pc.comp, instr.comp, instr.proc, s.reg[Register.COM])
    if isinstance(instr, Return):
        return RetEvent(s.mem, s.pc.comp, s2.pc.comp, s.reg[Register.COM])
    return None


Monitor = Callable[[MachState, Union[DfEvent, None]], None]


def run(
    program: MachProgram,
    fuel: int,
    instrument: Instrument = Instrument.DATA_FLOW,
    monitor: Monitor | None = None,
) -> RunResult:
    """
    Runs a whole machine program for at most `fuel` steps.

    Args:
        program (MachProgram): A well-formed whole program.
        fuel (int): Step budget.
        instrument (Instrument): DATA_FLOW records every data-flow event,
                                 INTERACTION only the calls and returns.
        monitor (Monitor | None): Called on the initial state, then after every
                                  step with the emitted data-flow event.

    Returns:
        RunResult: The trace, the outcome and the last state.
    """
    s = initial_state(program)
    if monitor is not None:
        monitor(s, None)
    events = []
    steps = 0
    while True:
        if steps >= fuel:
            outcome = OutOfFuel()
            break
        result = step(program, s)
        if isinstance(result, (Done, Stuck)):
            outcome = result
            break
        s2, event = result
        if instrument is Instrument.DATA_FLOW:
            if event is not None:
                events.append(event)
        else:
            interaction = _interaction_event(s, s2, fetch(program, s.pc))
            if interaction is not None:
                events.append(interaction)
        s = s2
        steps += 1
        if monitor is not None:
            monitor(s, event)
    logger.debug("machine run: %s events, %s steps, %s", len(events), steps, outcome)
    return RunResult(Trace(tuple(events)), outcome, s, steps)
