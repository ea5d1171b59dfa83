"""Program generators and the property checks: enrichment, back-translation,
compiler correctness, recomposition with the turn-taking monitor and the
robust-safety pipeline."""

from __future__ import annotations

import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

from pydantic import BaseModel, field_validator

import config
import source_lang
import target_lang
from backtranslation import (
    Backtranslation,
    BacktranslationError,
    MimickingMonitor,
    backtranslate_program,
)
from compiler import LinkError, compile_program, link, split
from corpus import turn_taking_example
from interface import MAIN_PROC, ComponentInterface, Interface
from memory import (
    BinaryOperator,
    Int,
    MemoryFault,
    Permission,
    Pointer,
    data_ptr,
    load,
    store,
)
from models.report import (
    NaiveWitnessReport,
    PipelineReport,
    RecompositionReport,
    RspCase,
    RspTestReport,
    Status,
    Verdict,
)
from outcomes import Done, OutOfFuel, RunResult, Stuck, describe
from registers import Register
from relations import (
    IDENTITY,
    Composed,
    RelParams,
    Renaming,
    Sided,
    Shift,
    find_sided,
    mem_rel_border,
    mem_rel_naive,
    mem_rel_pc,
    mem_rel_tt,
    rel_symmetry_check,
    state_rel_tt,
    trace_related,
)
from source_lang import (
    ARG,
    EXIT,
    LOCAL,
    Alloc,
    Assign,
    BinOp,
    Call,
    CallPtr,
    Deref,
    Expr,
    FunPtr,
    If,
    Seq,
    SourceProgram,
    Val,
    local_plus,
    seq_all,
)
from target_lang import Instrument, MachProgram, MachState
from traces import NowriteProperty, Trace, match_events, remove_df, shared_blocks

logger = logging.getLogger(__name__)

# Static block layout of generated components: cells 0..3 hold integers,
# 4 a freshly allocated pointer, 5 a stashed argument, 6 the stash flag.
STATIC_WORDS = 8
FRESH_SLOT = 4
STASH_SLOT = 5
FLAG_SLOT = 6
SHARED_WORDS = 4

_PROC_NAME = re.compile(r"^p(\d+)_(ptr|int)$")

ADD = BinaryOperator.ADD
SUB = BinaryOperator.SUB


class GenConfig(BaseModel):
    """
    Generator and check settings; every generated artifact is a function of it.

    Attributes:
        seed (int): Random seed.
        components (int): Components of generated programs, at least 2.
        procedures (int): Procedures per component.
        max_depth (int): Maximal depth of generated integer expressions.
        code_length (int): Maximal statements per procedure body.
        share_probability (float): Chance that a generated call passes a pointer.
        fuel (int): Step budget of the checked runs.
        stack_size (int): Runtime block size of compiled components.
    """

    seed: int = config.SEED
    components: int = 3
    procedures: int = 2
    max_depth: int = 2
    code_length: int = 4
    share_probability: float = 0.5
    fuel: int = config.FUEL
    stack_size: int = config.STACK_SIZE

    @field_validator("components")
    @classmethod
    def validate_components(cls, v: int) -> int:
        if v < 2:
            raise ValueError("programs need at least two components")
        return v

    @field_validator("procedures", "max_depth", "code_length", "fuel")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("bounds must be positive")
        return v

    @field_validator("stack_size")
    @classmethod
    def validate_stack_size(cls, v: int) -> int:
        if v < 16:
            raise ValueError("stack size must be at least 16 words")
        return v

    @field_validator("share_probability")
    @classmethod
    def validate_probability(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("share probability must lie in [0, 1]")
        return v


# Generators


@dataclass(frozen=True)
class _ProcInfo:
    comp: int
    name: str
    rank: int
    takes_ptr: bool


def _proc_info(comp: int, name: str) -> _ProcInfo | None:
    m = _PROC_NAME.match(name)
    if m is None:
        return None
    return _ProcInfo(comp, name, int(m.group(1)), m.group(2) == "ptr")


def _callees(intf: Interface, me: _ProcInfo, procs: list[_ProcInfo]) -> list[_ProcInfo]:
    """Higher-ranked procedures `me` may call, internal or imported."""
    result = []
    for p in procs:
        if p.rank <= me.rank or p.name == MAIN_PROC:
            continue
        if p.comp == me.comp or intf.imports(me.comp, p.comp, p.name):
            result.append(p)
    return result


class _SourceGen:
    def __init__(self, rng: random.Random, cfg: GenConfig, intf: Interface, procs: list[_ProcInfo]):
        self.rng = rng
        self.cfg = cfg
        self.intf = intf
        self.procs = procs

    def const(self) -> Expr:
        return Val(Int(self.rng.randint(-3, 20)))

    def ptr_base(self, me: _ProcInfo) -> Expr:
        if me.takes_ptr and self.rng.random() < 0.5:
            return ARG
        return LOCAL

    def cell(self, me: _ProcInfo) -> Expr:
        offset = self.rng.randrange(SHARED_WORDS)
        base = self.ptr_base(me)
        return base if offset == 0 else BinOp(ADD, base, Val(Int(offset)))

    def int_expr(self, me: _ProcInfo, depth: int) -> Expr:
        choice = self.rng.randrange(5 if depth > 0 else 3)
        match choice:
            case 0:
                return self.const()
            case 1:
                return ARG if not me.takes_ptr else self.const()
            case 2:
                return Deref(self.cell(me))
            case 3:
                op = self.rng.choice([ADD, SUB, BinaryOperator.MUL, BinaryOperator.EQ])
                return BinOp(op, self.int_expr(me, depth - 1), self.int_expr(me, depth - 1))
        cond = BinOp(BinaryOperator.LEQ, self.int_expr(me, depth - 1), self.const())
        return If(cond, self.int_expr(me, depth - 1), self.int_expr(me, depth - 1))

    def fresh_block(self) -> Expr:
        slot = local_plus(FRESH_SLOT)
        init = [
            Assign(BinOp(ADD, Deref(slot), Val(Int(i))), self.const())
            for i in range(SHARED_WORDS)
        ]
        return seq_all([Assign(slot, Alloc(Val(Int(SHARED_WORDS)))), *init, Deref(slot)])

    def call(self, me: _ProcInfo, callees: list[_ProcInfo]) -> Expr:
        ptr_callees = [p for p in callees if p.takes_ptr]
        int_callees = [p for p in callees if not p.takes_ptr]
        depth = self.cfg.max_depth
        if ptr_callees and (not int_callees or self.rng.random() < self.cfg.share_probability):
            target = self.rng.choice(ptr_callees)
            arg = self.fresh_block() if self.rng.random() < 0.4 else self.ptr_base(me)
            return Call(target.comp, target.name, arg)
        target = self.rng.choice(int_callees)
        if target.comp == me.comp and self.rng.random() < 0.3:
            return CallPtr(FunPtr(target.name), self.int_expr(me, depth))
        return Call(target.comp, target.name, self.int_expr(me, depth))

    def statement(self, me: _ProcInfo, callees: list[_ProcInfo], calls_left: int) -> tuple[Expr, bool]:
        depth = self.cfg.max_depth
        roll = self.rng.random()
        if callees and calls_left > 0 and roll < 0.45:
            return self.call(me, callees), True
        if me.takes_ptr and roll < 0.6:
            stash = Seq(
                Assign(local_plus(STASH_SLOT), ARG),
                Assign(local_plus(FLAG_SLOT), Val(Int(1))),
            )
            return stash, False
        if roll < 0.7:
            offset = self.rng.randrange(SHARED_WORDS)
            target = BinOp(ADD, Deref(local_plus(STASH_SLOT)), Val(Int(offset)))
            write = If(
                Deref(local_plus(FLAG_SLOT)),
                Assign(target, self.int_expr(me, depth)),
                Val(Int(0)),
            )
            return write, False
        if roll < 0.72:
            return If(BinOp(BinaryOperator.EQ, self.int_expr(me, depth), self.const()), EXIT, Val(Int(0))), False
        return Assign(self.cell(me), self.int_expr(me, depth)), False

    def body(self, me: _ProcInfo) -> Expr:
        callees = _callees(self.intf, me, self.procs)
        statements = []
        calls_left = 2
        for _ in range(self.rng.randint(1, self.cfg.code_length)):
            stmt, is_call = self.statement(me, callees, calls_left)
            calls_left -= is_call
            statements.append(stmt)
        if me.name == MAIN_PROC and callees and calls_left == 2:
            statements.append(self.call(me, callees))
        statements.append(self.int_expr(me, self.cfg.max_depth))
        return seq_all(statements)


def _layout(cfg: GenConfig, rng: random.Random) -> list[_ProcInfo]:
    """Ranks and kinds of all procedures; main has rank 0 in component 0."""
    slots = [c for c in range(cfg.components) for _ in range(cfg.procedures)]
    slots.remove(0)
    rng.shuffle(slots)
    procs = [_ProcInfo(0, MAIN_PROC, 0, False)]
    for rank, comp in enumerate(slots, start=1):
        kind = "ptr" if rng.random() < cfg.share_probability else "int"
        procs.append(_ProcInfo(comp, f"p{rank}_{kind}", rank, kind == "ptr"))
    return procs


def gen_source_program(cfg: GenConfig) -> SourceProgram:
    """
    Generates a whole, well-formed source program.

    Calls only go to procedures of higher rank, so runs terminate. Pointer
    procedures stash their argument and later write through the stash.
    """
    rng = random.Random(f"source-{cfg.seed}")
    procs = _layout(cfg, rng)
    intf = Interface(
        {
            c: ComponentInterface(
                tuple(p.name for p in procs if p.comp == c),
                tuple((p.comp, p.name) for p in procs if p.comp != c and p.name != MAIN_PROC),
            )
            for c in range(cfg.components)
        }
    )
    gen = _SourceGen(rng, cfg, intf, procs)
    bodies = {(p.comp, p.name): gen.body(p) for p in procs}
    buffers = {c: (Int(0),) * STATIC_WORDS for c in range(cfg.components)}
    program = SourceProgram(intf, bodies, buffers)
    logger.debug("generated source program %s with %s procedures", cfg.seed, len(bodies))
    return program


class _MachGen:
    def __init__(self, rng: random.Random, comp: int):
        self.rng = rng
        self.comp = comp
        self.labels = 0

    def label(self) -> str:
        self.labels += 1
        return f"g{self.labels}"

    def static(self, slot: int):
        return data_ptr(self.comp, 0, slot)

    def const(self) -> Int:
        return Int(self.rng.randint(-3, 20))

    def stash(self) -> list:
        """Stashes r_COM, raises the flag and writes through r_COM."""
        T = target_lang
        return [
            T.Const(self.static(STASH_SLOT), Register.AUX1),
            T.Store(Register.AUX1, Register.COM),
            T.Const(Int(1), Register.R1),
            T.Const(self.static(FLAG_SLOT), Register.AUX1),
            T.Store(Register.AUX1, Register.R1),
            T.Const(Int(self.rng.randrange(SHARED_WORDS)), Register.AUX2),
            T.BinOp(ADD, Register.COM, Register.AUX2, Register.AUX1),
            T.Const(self.const(), Register.R1),
            T.Store(Register.AUX1, Register.R1),
        ]

    def if_flag(self, body: list) -> list:
        T = target_lang
        l_do, l_skip = self.label(), self.label()
        return [
            T.Const(self.static(FLAG_SLOT), Register.AUX1),
            T.Load(Register.AUX1, Register.AUX2),
            T.Bnz(Register.AUX2, l_do),
            T.PtrOfLabel(l_skip, Register.R1),
            T.Jump(Register.R1),
            T.Label(l_do),
            *body,
            T.Label(l_skip),
        ]

    def write_through_stash(self) -> list:
        T = target_lang
        return self.if_flag(
            [
                T.Const(self.static(STASH_SLOT), Register.AUX1),
                T.Load(Register.AUX1, Register.AUX1),
                T.Const(Int(self.rng.randrange(SHARED_WORDS)), Register.AUX2),
                T.BinOp(ADD, Register.AUX1, Register.AUX2, Register.AUX1),
                T.Const(self.const(), Register.R1),
                T.Store(Register.AUX1, Register.R1),
            ]
        )

    def fresh_block(self) -> list:
        """Allocates and fills a block, leaving its pointer in r_COM."""
        T = target_lang
        code = [
            T.Const(Int(SHARED_WORDS), Register.R1),
            T.Alloc(Register.AUX1, Register.R1),
            T.Const(self.static(FRESH_SLOT), Register.AUX2),
            T.Store(Register.AUX2, Register.AUX1),
        ]
        for _ in range(SHARED_WORDS):
            code += [
                T.Const(self.const(), Register.R1),
                T.Store(Register.AUX1, Register.R1),
                T.Const(Int(1), Register.R1),
                T.BinOp(ADD, Register.AUX1, Register.R1, Register.AUX1),
            ]
        code += [
            T.Const(self.static(FRESH_SLOT), Register.AUX2),
            T.Load(Register.AUX2, Register.COM),
        ]
        return code

    def call(self, callee: _ProcInfo) -> list:
        T = target_lang
        if not callee.takes_ptr:
            return [T.Const(self.const(), Register.COM), T.Call(callee.comp, callee.name)]
        if self.rng.random() < 0.5:
            return [*self.fresh_block(), T.Call(callee.comp, callee.name)]
        forward = [
            T.Const(self.static(STASH_SLOT), Register.AUX1),
            T.Load(Register.AUX1, Register.COM),
            T.Call(callee.comp, callee.name),
        ]
        return self.if_flag(forward)


def gen_mach_context(cfg: GenConfig, intf: Interface) -> MachProgram:
    """
    Generates Mach code for every component of a context interface.

    The code stashes pointer arguments, writes through them before and after
    calling back, passes fresh or stashed blocks to pointer procedures and
    only calls procedures of higher rank.
    """
    rng = random.Random(f"context-{cfg.seed}")
    known = [
        info
        for c in intf
        for p in intf[c].exports
        if (info := _proc_info(c, p)) is not None
    ]
    imported = [
        info
        for c in intf
        for callee, p in intf[c].imports
        if (info := _proc_info(callee, p)) is not None
    ]
    T = target_lang
    procs = {}
    for comp in intf:
        gen = _MachGen(rng, comp)
        for name in intf[comp].exports:
            me = _proc_info(comp, name) or _ProcInfo(comp, name, 0, False)
            callees = [
                p
                for p in known + imported
                if p.rank > me.rank
                and (p.comp == comp or intf.imports(comp, p.comp, p.name))
                and p.comp != comp
            ]
            code = gen.stash() if me.takes_ptr else []
            for _ in range(rng.randint(1, max(1, cfg.code_length // 2))):
                roll = rng.random()
                if callees and roll < 0.5:
                    code += gen.call(rng.choice(callees))
                else:
                    code += gen.write_through_stash()
            code += [T.Const(gen.const(), Register.COM), T.Return()]
            procs[(comp, name)] = tuple(code)
    buffers = {c: (Int(0),) * STATIC_WORDS for c in intf}
    return MachProgram(intf, procs, buffers)


def _choose_part(cfg: GenConfig, program: SourceProgram) -> set[int]:
    rng = random.Random(f"split-{cfg.seed}")
    comps = sorted(program.intf)
    part = {0} | {c for c in comps[1:-1] if rng.random() < 0.3}
    return part


def gen_rsp_case(cfg: GenConfig) -> tuple[SourceProgram, MachProgram]:
    """A source program part with main and a generated Mach context for it."""
    program = gen_source_program(cfg)
    ps, cs = split(program, _choose_part(cfg, program))
    return ps, gen_mach_context(cfg, cs.intf)


def gen_mach_program(cfg: GenConfig) -> MachProgram:
    """A whole Mach program: a compiled part linked with a generated context."""
    ps, ct = gen_rsp_case(cfg)
    return link(compile_program(ps, cfg.stack_size), ct)


# Helpers


def _complete(*results: RunResult) -> bool:
    return not any(isinstance(r.outcome, OutOfFuel) for r in results)


def related_prefix(ren: Renaming, t1: Trace, t2: Trace, complete: bool) -> bool:
    """
    Relates two traces, or their common prefix when a run was cut by fuel.
    """
    if not complete:
        n = min(len(t1), len(t2))
        t1, t2 = t1[:n], t2[:n]
    return trace_related(ren, t1, t2)


def backtranslation_fuel(bt: Backtranslation) -> int:
    """Source steps enough to replay the trace, including the preludes."""
    words = sum(len(b) for b in bt.program.buffers.values())
    return 200 * (len(bt.trace) + 1) + 20 * words + 1000


# Checks


def check_enrichment(program: MachProgram, fuel: int) -> Verdict:
    """The data-flow trace projects to the interaction-only trace."""
    df = target_lang.run(program, fuel, Instrument.DATA_FLOW)
    plain = target_lang.run(program, fuel, Instrument.INTERACTION)
    projected = remove_df(df.trace)
    if projected != plain.trace:
        n = next(
            (i for i, (a, b) in enumerate(zip(projected, plain.trace)) if a != b),
            min(len(projected), len(plain.trace)),
        )
        logger.error("enrichment differs at event %s", n)
        return Verdict.failed(
            "enrichment", f"remove_df(T) differs from the interaction trace at event {n}"
        )
    return Verdict.passed(
        "enrichment", f"{len(df.trace)} data-flow events, {len(plain.trace)} interaction events"
    )


def run_backtranslation(
    program: MachProgram, df_trace: Trace
) -> tuple[Verdict, Backtranslation | None, RunResult | None]:
    """Back-translates a data-flow trace, replays it under the mimicking monitor."""
    try:
        bt = backtranslate_program(df_trace, program)
    except BacktranslationError as e:
        return Verdict.failed("backtranslation", str(e)), None, None
    errors = source_lang.well_formed(bt.program)
    if errors:
        return Verdict.failed("backtranslation", "; ".join(errors)), bt, None
    monitor = MimickingMonitor(bt)
    result = source_lang.run(bt.program, backtranslation_fuel(bt), monitor)
    if not isinstance(result.outcome, Done):
        return (
            Verdict.failed(
                "backtranslation", f"replay ended with {describe(result.outcome)}"
            ),
            bt,
            result,
        )
    if not monitor.ok:
        boundary, problems = monitor.violations[0]
        return (
            Verdict.failed(
                "backtranslation",
                f"mimicking violated at boundary {boundary}: {problems[0]}",
                counterexample={"boundary": boundary, "problems": problems},
            ),
            bt,
            result,
        )
    if monitor.boundary != len(df_trace) + 1:
        return (
            Verdict.failed(
                "backtranslation",
                f"replay stopped after {monitor.boundary} of {len(df_trace) + 1} boundaries",
            ),
            bt,
            result,
        )
    if not trace_related(Shift(1), remove_df(df_trace), result.trace):
        return (
            Verdict.failed("backtranslation", "replayed trace is not shift:1 related"),
            bt,
            result,
        )
    return (
        Verdict.passed(
            "backtranslation",
            f"{len(df_trace)} events replayed in {result.steps} steps",
            renamings={"remove_df(T1)~t_backtr": Shift(1).describe()},
        ),
        bt,
        result,
    )


def check_backtranslation(program: MachProgram, fuel: int) -> Verdict:
    """Runs a Mach program, back-translates its trace and checks the replay."""
    df = target_lang.run(program, fuel, Instrument.DATA_FLOW)
    verdict, _, _ = run_backtranslation(program, df.trace)
    return verdict


def check_compiler(
    program: SourceProgram, fuel: int, stack_size: int | None = None
) -> Verdict:
    """Differential run of a whole source program against its compilation."""
    compiled = compile_program(program, stack_size)
    src = source_lang.run(program, fuel)
    tgt = target_lang.run(compiled, fuel * 20, Instrument.INTERACTION)
    stuck = isinstance(src.outcome, Stuck) or isinstance(tgt.outcome, Stuck)
    complete = _complete(src, tgt) and not stuck
    if not related_prefix(IDENTITY, src.trace, tgt.trace, complete):
        return Verdict.failed(
            "compiler",
            f"source trace ({len(src.trace)} events) and compiled trace "
            f"({len(tgt.trace)} events) are not related",
        )
    if complete and isinstance(src.outcome, Done) and src.outcome != tgt.outcome:
        return Verdict.failed(
            "compiler", f"source {describe(src.outcome)}, compiled {describe(tgt.outcome)}"
        )
    return Verdict.passed("compiler", f"{len(src.trace)} events related")


# Recomposition


def _interaction(event):
    return remove_df(Trace((event,)))[0]


def _is_border(program: MachProgram, state: MachState) -> bool:
    try:
        instr = target_lang.fetch(program, state.pc)
    except MemoryFault:
        return False
    return isinstance(instr, (target_lang.Call, target_lang.Return))


@dataclass
class TernaryRun:
    """
    Drives the recomposed run alongside the two runs it is built from.

    Schedule: at each turn the run whose executing side was discarded from the
    recomposed program is first drained to its next interaction; then the
    recomposed run and its retained partner step in lock-step until they
    reach the interaction; then all three take the interaction step. The
    memory relations are sampled after every step.
    """

    w12: MachProgram
    w1: MachProgram
    w2: MachProgram
    params: RelParams
    on_sample: Callable[[TernaryRun], None] | None = None
    s12: MachState = field(init=False)
    s1: MachState = field(init=False)
    s2: MachState = field(init=False)
    steps: int = 0
    borders: int = 0
    naive_failures: int = 0
    pc_failures: int = 0
    tt_failures: int = 0
    violations: list[str] = field(default_factory=list)
    ended: str = ""

    def __post_init__(self):
        self.s12 = target_lang.initial_state(self.w12)
        self.s1 = target_lang.initial_state(self.w1)
        self.s2 = target_lang.initial_state(self.w2)

    def _program(self, name: str) -> MachProgram:
        return {"s12": self.w12, "s1": self.w1, "s2": self.w2}[name]

    def _advance(self, name: str):
        result = target_lang.step(self._program(name), getattr(self, name))
        if isinstance(result, (Done, Stuck)):
            return result
        state, event = result
        setattr(self, name, state)
        self.steps += 1
        return event

    def _violate(self, message: str) -> None:
        logger.error("recomposition step %s: %s", self.steps, message)
        self.violations.append(f"step {self.steps}: {message}")

    def sample(self, at_border: bool = False) -> None:
        p, s12, s1, s2 = self.params, self.s12, self.s1, self.s2
        if not mem_rel_tt(p, s12, s1, s2):
            self.tt_failures += 1
            self._violate("mem_rel_tt does not hold")
        if not rel_symmetry_check(p, s12, s1, s2):
            self._violate("mem_rel_tt is not symmetric")
        if not mem_rel_naive(p, s12, s1, s2):
            self.naive_failures += 1
        if not mem_rel_pc(p, s12, s1, s2):
            self.pc_failures += 1
        if at_border:
            if not mem_rel_border(p, s12, s1, s2):
                self._violate("mem_rel_border does not hold after an interaction")
            if not state_rel_tt(p, s12, s1, s2, at_border=True):
                self._violate("states are not related after an interaction")
        if self.on_sample is not None:
            self.on_sample(self)

    def _finish(self, reason: str) -> None:
        self.ended = reason
        logger.debug("ternary run ended after %s steps: %s", self.steps, reason)

    def run(self, budget: int) -> None:
        self.sample(at_border=True)
        while not self.ended:
            in_part = self.s12.component in self.params.part
            partner, discarded = ("s1", "s2") if in_part else ("s2", "s1")
            while not _is_border(self._program(discarded), getattr(self, discarded)):
                if self.steps >= budget:
                    return self._finish("budget exhausted")
                outcome = self._advance(discarded)
                if isinstance(outcome, (Done, Stuck)):
                    return self._finish(f"{discarded} ended: {describe(outcome)}")
                self.sample()
            while not _is_border(self.w12, self.s12):
                if self.steps >= budget:
                    return self._finish("budget exhausted")
                r12 = self._advance("s12")
                rp = self._advance(partner)
                done12 = isinstance(r12, (Done, Stuck))
                if done12 or isinstance(rp, (Done, Stuck)):
                    if type(r12) is not type(rp) or not done12:
                        self._violate(
                            f"s12 and {partner} diverge: {r12!r} against {rp!r}"
                        )
                    return self._finish(f"s12 ended: {describe(r12) if done12 else 'diverged'}")
                if self.s12.pc != getattr(self, partner).pc:
                    self._violate(f"s12 and {partner} left lock-step")
                    return self._finish("lock-step lost")
                self.sample()
            results = {name: self._advance(name) for name in ("s12", partner, discarded)}
            stopped = [n for n, r in results.items() if isinstance(r, (Done, Stuck))]
            if stopped:
                if ("s12" in stopped) != (partner in stopped):
                    self._violate(f"interaction step diverges: {results}")
                return self._finish(f"{', '.join(stopped)} stopped at an interaction")
            e12, e1, e2 = (_interaction(results[n]) for n in ("s12", "s1", "s2"))
            if not (match_events(e12, e1) and match_events(e12, e2)):
                self._violate("interaction events do not match")
                return self._finish("events differ")
            self.params = self.params.extend(e12, e1, e2)
            self.borders += 1
            self.sample(at_border=True)


def _recomposition(
    p1: MachProgram,
    c1: MachProgram,
    p2: MachProgram,
    c2: MachProgram,
    fuel: int,
    ren1: Renaming | None = None,
    ren2: Renaming | None = None,
    fuel2: int | None = None,
    on_sample: Callable[[TernaryRun], None] | None = None,
) -> tuple[RecompositionReport, dict[str, Trace], TernaryRun | None]:
    fuel2 = fuel if fuel2 is None else fuel2
    name = "recomposition"
    try:
        w1, w2, w12 = link(p1, c1), link(p2, c2), link(p1, c2)
    except LinkError as e:
        return RecompositionReport(verdict=Verdict.skipped(name, f"parts do not link: {e}")), {}, None
    part, context = p1.comps(), c1.comps()
    r1 = target_lang.run(w1, fuel, Instrument.INTERACTION)
    r2 = target_lang.run(w2, fuel2, Instrument.INTERACTION)
    base_complete = _complete(r1, r2)
    t1, t2 = r1.trace, r2.trace
    if not base_complete:
        n = min(len(t1), len(t2))
        t1, t2 = t1[:n], t2[:n]
    if len(t1) != len(t2) or find_sided(t1, t2, part, config.SHIFT_BOUND) is None:
        logger.warning("recomposition skipped: base traces are unrelated")
        return RecompositionReport(verdict=Verdict.skipped(name, "base traces are not related")), {}, None
    r12 = target_lang.run(w12, fuel2, Instrument.INTERACTION)
    complete = base_complete and _complete(r12)
    t12 = r12.trace
    traces = {"t1": r1.trace, "t2": r2.trace, "t12": t12}
    ren1 = ren1 or _search(t1, t12, part, complete)
    ren2 = ren2 or _search(t2, t12, part, complete)
    if ren1 is None or ren2 is None:
        return RecompositionReport(verdict=Verdict.failed(name, "recomposed trace is unrelated to a base trace")), traces, None
    renamings = {"t1~t12": ren1.describe(), "t2~t12": ren2.describe()}
    for label, ta, ren in (("t1", t1, ren1), ("t2", t2, ren2)):
        if not related_prefix(ren, ta, t12, complete):
            return (
                RecompositionReport(
                    verdict=Verdict.failed(name, f"{label} and t12 are not related", renamings=renamings)
                ),
                traces,
                None,
            )
    ternary = TernaryRun(w12, w1, w2, RelParams(part, context, ren1, ren2), on_sample)
    ternary.run(fuel + 2 * fuel2)
    counts = dict(
        steps=ternary.steps,
        borders=ternary.borders,
        naive_failures=ternary.naive_failures,
        pc_failures=ternary.pc_failures,
    )
    if ternary.violations:
        verdict = Verdict.failed(
            name,
            ternary.violations[0],
            renamings=renamings,
            counterexample={
                "violations": ternary.violations[:10],
                "t12_length": len(ternary.params.t12),
            },
        )
    else:
        verdict = Verdict.passed(
            name, f"{ternary.borders} interactions monitored ({ternary.ended})", renamings=renamings
        )
    return RecompositionReport(verdict=verdict, **counts), traces, ternary


def _search(ta: Trace, tb: Trace, part, complete: bool) -> Renaming | None:
    if not complete:
        n = min(len(ta), len(tb))
        ta, tb = ta[:n], tb[:n]
    if trace_related(IDENTITY, ta, tb):
        return IDENTITY
    return find_sided(ta, tb, part, config.SHIFT_BOUND)


def check_recomposition(
    p1: MachProgram,
    c1: MachProgram,
    p2: MachProgram,
    c2: MachProgram,
    fuel: int,
    ren1: Renaming | None = None,
    ren2: Renaming | None = None,
    fuel2: int | None = None,
) -> RecompositionReport:
    """
    Recomposes p1 with c2 and monitors it against p1 ∪ c1 and p2 ∪ c2.

    Args:
        fuel (int): Budget of the p1 ∪ c1 run.
        ren1, ren2 (Renaming | None): Renamings into the recomposed run,
                                      searched for when omitted.
        fuel2 (int | None): Budget of the other two runs, `fuel` by default.

    Returns:
        RecompositionReport: Skip when the base traces are unrelated.
    """
    report, _, _ = _recomposition(p1, c1, p2, c2, fuel, ren1, ren2, fuel2)
    return report


def _private_program_cell(params: RelParams, state: MachState) -> Pointer | None:
    shared = shared_blocks(params.t12)
    for comp, block in state.mem.locations():
        if comp in params.part and block > 0 and (comp, block) not in shared:
            return Pointer(Permission.DATA, comp, block, 0)
    return None


def check_naive_relation_fails(example=None, fuel: int = 10_000) -> NaiveWitnessReport:
    """
    Replays the turn-taking example and shows why the simpler relations fail.

    The union relation must fail at some step while the turn-taking relation
    holds throughout. Mutating a private program cell while the context runs
    must be accepted by the pc-aware relation and rejected by turn-taking.
    """
    example = example or turn_taking_example()
    p1, c1, c2 = example.compiled(stack_size=64)
    captured: list[tuple[RelParams, MachState, MachState, MachState]] = []

    def grab(run: TernaryRun) -> None:
        if not captured and run.s12.component in run.params.context:
            captured.append((run.params, run.s12, run.s1, run.s2))

    report, _, ternary = _recomposition(p1, c1, p1, c2, fuel, on_sample=grab)
    pc_accepts = tt_rejects = False
    if captured:
        params, s12, s1, s2 = captured[0]
        cell = _private_program_cell(params, s12)
        if cell is not None:
            old = load(s12.mem, cell)
            bumped = Int(old.value + 1) if isinstance(old, Int) else Int(1)
            mutated = replace(s12, mem=store(s12.mem, cell, bumped))
            pc_accepts = mem_rel_pc(params, mutated, s1, s2)
            tt_rejects = not mem_rel_tt(params, mutated, s1, s2)
    tt_failures = ternary.tt_failures if ternary is not None else 0
    ok = (
        report.verdict.status is Status.PASSED
        and report.naive_failures > 0
        and tt_failures == 0
        and pc_accepts
        and tt_rejects
    )
    detail = (
        f"naive relation failed at {report.naive_failures} steps, "
        f"turn-taking at {tt_failures}; pc-aware accepts mutation: {pc_accepts}, "
        f"turn-taking rejects it: {tt_rejects}"
    )
    verdict = Verdict.passed("naive-relation", detail) if ok else Verdict.failed("naive-relation", detail)
    return NaiveWitnessReport(
        verdict=verdict,
        naive_failures=report.naive_failures,
        tt_failures=tt_failures,
        pc_accepts_mutation=pc_accepts,
        tt_rejects_mutation=tt_rejects,
    )


# Robust safety pipeline


def rsp_pipeline(
    ps: SourceProgram,
    ct: MachProgram,
    fuel: int,
    stack_size: int | None = None,
    safety: NowriteProperty | None = None,
) -> PipelineReport:
    """
    Runs the five-stage robust-safety pipeline on a program part and a context.

    Stages: Ia runs the compiled part against the context, Ib back-translates
    the data-flow trace into a source context, II compiles and runs the
    back-translation, III recomposes the two target runs and IV runs the
    source part with the back-translated context.

    Returns:
        PipelineReport: Stage verdicts; the overall verdict names the first
                        failed stage.
    """
    stages: list[Verdict] = []
    lengths: dict[str, int] = {}
    nowrite: dict[str, bool] = {}
    part = ps.comps()

    def report() -> PipelineReport:
        failed = next((s for s in stages if s.status is Status.FAILED), None)
        if failed is not None:
            overall = Verdict.failed("rsp", f"stage {failed.check}: {failed.detail}")
        else:
            renamings = {k: v for s in stages for k, v in s.renamings.items()}
            overall = Verdict.passed("rsp", f"{len(stages)} stages passed", renamings=renamings)
        return PipelineReport(verdict=overall, stages=stages, trace_lengths=lengths, nowrite=nowrite)

    # Ia
    pt = compile_program(ps, stack_size)
    try:
        w1 = link(pt, ct)
    except LinkError as e:
        stages.append(Verdict.failed("Ia", f"cannot link: {e}"))
        return report()
    errors = target_lang.well_formed(w1)
    if errors:
        stages.append(Verdict.failed("Ia", "; ".join(errors)))
        return report()
    r1 = target_lang.run(w1, fuel, Instrument.DATA_FLOW)
    big_t1 = r1.trace
    t1 = remove_df(big_t1)
    lengths["t1"] = len(t1)
    plain = target_lang.run(w1, fuel, Instrument.INTERACTION)
    if plain.trace != t1:
        stages.append(Verdict.failed("Ia", "remove_df(T1) differs from the interaction trace"))
        return report()
    stages.append(Verdict.passed("Ia", f"{len(big_t1)} data-flow events, {describe(r1.outcome)}"))
    if safety is not None:
        nowrite["t1"] = safety.holds(t1)

    # Ib
    verdict, bt, rb = run_backtranslation(w1, big_t1)
    stages.append(verdict.model_copy(update={"check": "Ib"}))
    if verdict.status is Status.FAILED:
        return report()
    t_backtr = rb.trace
    lengths["t_backtr"] = len(t_backtr)
    p_prime, cs = split(bt.program, part)

    # II
    big = max(stack_size or config.STACK_SIZE, 4 * len(big_t1) + 64)
    fuel2 = max(fuel, 20 * rb.steps + 1000)
    p2, c2 = compile_program(p_prime, big), compile_program(cs, big)
    r2 = target_lang.run(link(p2, c2), fuel2, Instrument.INTERACTION)
    t2 = r2.trace
    lengths["t2"] = len(t2)
    if not related_prefix(IDENTITY, t_backtr, t2, _complete(r2)):
        stages.append(Verdict.failed("II", "t_backtr and t2 are not related"))
        return report()
    stages.append(Verdict.passed("II", describe(r2.outcome), renamings={"t_backtr~t2": "identity"}))

    # III
    ren1, ren2 = Sided(part, 0, 1), Sided(part, -1, 0)
    recomposed, traces, _ = _recomposition(pt, ct, p2, c2, fuel, ren1, ren2, fuel2)
    stages.append(recomposed.verdict.model_copy(update={"check": "III"}))
    if recomposed.verdict.status is not Status.PASSED:
        if recomposed.verdict.status is Status.SKIPPED:
            stages[-1] = Verdict.failed("III", recomposed.verdict.detail)
        return report()
    t12 = traces["t12"]
    lengths["t12"] = len(t12)

    # IV
    qed = link(ps, cs)
    rq = source_lang.run(qed, backtranslation_fuel(bt))
    t_qed = rq.trace
    lengths["t_qed"] = len(t_qed)
    complete = _complete(r1) and _complete(rq)
    checks = {
        "t12~t_qed": (IDENTITY, t12, t_qed),
        "t1~t_qed": (ren1, t1, t_qed),
        "t_backtr~t_qed": (ren2, t_backtr, t_qed),
        # Ib then II then III: shift:1, identity, ren2
        "t1~t_backtr~t_qed": (Composed(Shift(1), ren2), t1, t_qed),
    }
    for label, (ren, ta, tb) in checks.items():
        if not related_prefix(ren, ta, tb, complete):
            stages.append(Verdict.failed("IV", f"{label} not related under {ren.describe()}"))
            return report()
    stages.append(
        Verdict.passed(
            "IV",
            describe(rq.outcome),
            renamings={label: ren.describe() for label, (ren, _, _) in checks.items()},
        )
    )
    if safety is not None:
        nowrite["t_qed"] = safety.holds(t_qed)
    return report()


def rsp_case(cfg: GenConfig) -> RspCase:
    ps, ct = gen_rsp_case(cfg)
    try:
        result = rsp_pipeline(ps, ct, cfg.fuel, cfg.stack_size)
    except Exception as e:  # noqa: BLE001
        logger.exception("rsp case %s crashed", cfg.seed)
        return RspCase(seed=cfg.seed, status=Status.FAILED, failed_stage="crash", detail=repr(e))
    return RspCase(
        seed=cfg.seed,
        status=result.verdict.status,
        failed_stage=result.failed_stage,
        detail=result.verdict.detail,
    )


def rsp_test(
    seed: int, cases: int, cfg: GenConfig | None = None, workers: int | None = None
) -> RspTestReport:
    """
    Runs the pipeline on `cases` generated (part, context) pairs.

    Case i uses seed + i, so every case replays on its own.
    """
    cfg = cfg or GenConfig()
    configs = [cfg.model_copy(update={"seed": seed + i}) for i in range(cases)]
    with ThreadPoolExecutor(max_workers=workers or config.WORKERS) as pool:
        results = list(pool.map(rsp_case, configs))
    counts = {status: sum(r.status is status for r in results) for status in Status}
    logger.info(
        "rsp-test: %s passed, %s failed, %s skipped",
        counts[Status.PASSED],
        counts[Status.FAILED],
        counts[Status.SKIPPED],
    )
    return RspTestReport(
        seed=seed,
        cases=cases,
        passed=counts[Status.PASSED],
        failed=counts[Status.FAILED],
        skipped=counts[Status.SKIPPED],
        results=results,
    )
