from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import config

import source_lang
import target_lang
from compiler import compile_program
from interface import MAIN_PROC
from memory import (
    RUNTIME_BLOCK,
    Block,
    Int,
    Memory,
    alloc,
    code_ptr,
    data_ptr,
    initial_memory,
    store,
)
from registers import INITIAL_REGISTERS, Register, write
from relations import (
    IDENTITY,
    Composed,
    RelParams,
    Shift,
    Sided,
    Table,
    blocks_related,
    find_shift,
    find_sided,
    mem_rel_border,
    mem_rel_exec,
    mem_rel_not_exec,
    mem_rel_tt,
    mem_related,
    parse_renaming,
    rel_symmetry_check,
    shift_candidates,
    state_rel_tt,
    trace_related,
    valren,
)
from source_lang import Alloc, Seq, Val
from target_lang import Instrument, MachState
from traces import CallEvent, Trace

PART = frozenset({0})
CONTEXT = frozenset({1})


def test_valren():
    assert valren(IDENTITY, Int(3), Int(3))
    assert not valren(IDENTITY, Int(3), Int(4))
    assert valren(Shift(1), data_ptr(0, 1, 2), data_ptr(0, 2, 2))
    assert not valren(Shift(1), data_ptr(0, 1, 2), data_ptr(0, 1, 2))
    assert not valren(Shift(1), data_ptr(0, 1, 2), data_ptr(1, 2, 2))
    # Code pointers are never renamed
    assert valren(Shift(1), code_ptr(0, 1), code_ptr(0, 1))
    assert not valren(IDENTITY, code_ptr(0, 1), data_ptr(0, 1, 0))


def test_runtime_block_only_relates_to_itself():
    runtime = data_ptr(0, RUNTIME_BLOCK, 3)
    assert valren(Shift(5), runtime, runtime)
    assert not valren(Shift(1), runtime, data_ptr(0, 0, 3))
    assert not valren(Shift(-1), data_ptr(0, 0, 0), runtime)
    # The renaming itself never maps block -1
    assert Shift(5).apply(0, RUNTIME_BLOCK) is None
    assert IDENTITY.apply(0, RUNTIME_BLOCK) is None


def test_renamings():
    sided = Sided(frozenset({0}), 1, 0)
    assert sided.apply(0, 3) == 4
    assert sided.apply(1, 3) == 3
    assert sided.inverse().apply(0, 4) == 3
    assert Shift(-1).apply(0, 0) is None
    table = Table({(0, 1): 2, (0, 2): 1})
    assert table.inverse().apply(0, 2) == 1
    assert Composed(Shift(1), table).apply(0, 0) == 2
    with pytest.raises(ValueError):
        Table({(0, 1): 3, (0, 2): 3})


def test_parse_renaming():
    assert parse_renaming("identity") == IDENTITY
    assert parse_renaming("shift:-2") == Shift(-2)
    assert parse_renaming(Shift(3).describe()) == Shift(3)
    with pytest.raises(ValueError):
        parse_renaming("shift:x")
    with pytest.raises(ValueError):
        parse_renaming("swap")


def test_shift_candidates():
    assert shift_candidates(2) == [0, 1, -1, 2, -2]


def test_blocks_related_under_shift():
    m1 = initial_memory({0: (Int(1),)})
    m1, _ = alloc(m1, 0, 2)
    m2 = Memory().with_block(0, 1, Block.of((Int(1),)))
    m2 = m2.with_block(0, 2, Block.of((Int(0), Int(0))))
    # Fresh cells hold Error
    assert not blocks_related(Shift(1), m1, m2)
    m2 = m2.with_block(0, 2, m1.block(0, 1))
    assert blocks_related(Shift(1), m1, m2)
    assert mem_related(Shift(1), m1, m2, [(0, 1)])
    assert not mem_related(Shift(1), m1, m2, [(0, RUNTIME_BLOCK)])


def test_source_and_compiled_traces_related(double_program):
    src = source_lang.run(double_program, 1000)
    tgt = target_lang.run(compile_program(double_program, 32), 10_000, Instrument.INTERACTION)
    assert trace_related(IDENTITY, src.trace, tgt.trace)
    # Data-flow traces are projected first
    df = target_lang.run(compile_program(double_program, 32), 10_000)
    assert trace_related(IDENTITY, src.trace, df.trace)


def test_find_shift(sharing_program):
    main = sharing_program.procs[(0, MAIN_PROC)]
    shifted = replace(
        sharing_program,
        procs={**sharing_program.procs, (0, MAIN_PROC): Seq(Alloc(Val(Int(1))), main)},
    )
    t1 = source_lang.run(sharing_program, 1000).trace
    t2 = source_lang.run(shifted, 1000).trace
    assert not trace_related(IDENTITY, t1, t2)
    assert find_shift(t1, t2, 2) == Shift(1)
    assert find_shift(t2, t1, 2) == Shift(-1)
    assert find_shift(t1, t2[:1], 2) is None
    assert find_sided(t1, t2, {0}, 1) == Sided(frozenset({0}), 1, 0)


def test_rel_params_sides_must_be_disjoint():
    with pytest.raises(ValueError):
        RelParams(frozenset({0}), frozenset({0, 1}))
    params = RelParams(frozenset({0}), frozenset({1}), Shift(1), IDENTITY)
    swapped = params.swap()
    assert (swapped.part, swapped.ren1) == (frozenset({1}), IDENTITY)


@pytest.fixture
def turn_taking():
    """Program 0 holds a private and a shared block; component 1 is the context."""
    mem = initial_memory({0: (Int(0),), 1: (Int(0),)})
    mem, private = alloc(mem, 0, 1)
    mem, shared = alloc(mem, 0, 1)
    mem = store(mem, private, Int(7))
    mem = store(mem, shared, Int(1))
    trace = Trace((CallEvent(mem, 0, 1, "store", data_ptr(0, 2, 0)),))
    yield mem, private, shared, trace


def _at(comp: int, mem: Memory, offset: int = 0, reg=INITIAL_REGISTERS) -> MachState:
    return MachState(None, mem, reg, code_ptr(comp, 0, offset).ptr)


def test_exec_relations_during_a_temporary_write(turn_taking):
    mem, private, shared, trace = turn_taking
    mid_store = store(mem, shared, Int(42))
    assert mem_rel_exec(IDENTITY, PART, trace, trace, mem, mem)
    # The context's write through the shared pointer shows in the exec relation only
    assert not mem_rel_exec(IDENTITY, PART, trace, trace, mid_store, mem)
    assert mem_rel_not_exec(IDENTITY, PART, trace, trace, mid_store, mem)
    changed = store(mem, private, Int(8))
    assert not mem_rel_not_exec(IDENTITY, PART, trace, trace, changed, mem)


def test_turn_taking_triple_while_the_context_runs(turn_taking):
    mem, _, shared, trace = turn_taking
    params = RelParams(PART, CONTEXT, IDENTITY, IDENTITY, trace, trace, trace)
    # Run 1 is inside the context that temporarily overwrites the shared cell
    s1 = _at(1, store(mem, shared, Int(42)))
    s2 = s12 = _at(1, mem)
    assert mem_rel_tt(params, s12, s1, s2)
    assert not mem_rel_border(params, s12, s1, s2)
    assert mem_rel_border(params, s12, s12, s12)
    assert rel_symmetry_check(params, s12, s1, s2)


@settings(max_examples=config.PROPERTY_EXAMPLES, deadline=None)
@given(
    st.integers(0, 2),
    st.sampled_from([(0, 0), (0, 1), (0, 2), (1, 0)]),
    st.integers(-3, 3),
    st.sampled_from([0, 1]),
)
def test_border_relation_implies_turn_taking(which, loc, value, side):
    mem = initial_memory({0: (Int(0),), 1: (Int(0),)})
    mem, _ = alloc(mem, 0, 1)
    mem, _ = alloc(mem, 0, 1)
    trace = Trace((CallEvent(mem, 0, 1, "store", data_ptr(0, 2, 0)),))
    params = RelParams(PART, CONTEXT, IDENTITY, IDENTITY, trace, trace, trace)
    mems = [mem, mem, mem]
    mems[which] = store(mem, data_ptr(*loc, 0).ptr, Int(value))
    s12, s1, s2 = (_at(side, m) for m in mems)
    if mem_rel_border(params, s12, s1, s2):
        assert mem_rel_tt(params, s12, s1, s2)
    assert rel_symmetry_check(params, s12, s1, s2)


def test_state_relation(turn_taking):
    mem, _, _, trace = turn_taking
    params = RelParams(PART, CONTEXT, IDENTITY, IDENTITY, trace, trace, trace)
    s = _at(1, mem)
    assert state_rel_tt(params, s, s, s, at_border=True)
    # The retained partner of a context state is run 2
    assert not state_rel_tt(params, s, s, _at(1, mem, offset=1))
    assert state_rel_tt(params, s, _at(1, mem, offset=1), s)
    assert not state_rel_tt(params, s, _at(0, mem), s)
    other = _at(1, mem, reg=write(INITIAL_REGISTERS, Register.COM, Int(5)))
    assert state_rel_tt(params, s, other, s)
    assert not state_rel_tt(params, s, other, s, at_border=True)


@pytest.mark.parametrize("k", [-2, -1, 0, 1, 2])
def test_shift_relation_is_symmetric(sharing_program, k):
    main = sharing_program.procs[(0, MAIN_PROC)]
    shifted = replace(
        sharing_program,
        procs={**sharing_program.procs, (0, MAIN_PROC): Seq(Alloc(Val(Int(1))), main)},
    )
    t1 = source_lang.run(sharing_program, 1000).trace
    t2 = source_lang.run(shifted, 1000).trace
    assert trace_related(Shift(k), t1, t2) == trace_related(Shift(-k), t2, t1)
    assert trace_related(Shift(k), t1, t1) == (k == 0)
