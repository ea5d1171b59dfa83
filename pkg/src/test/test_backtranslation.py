import pytest

import source_lang
import target_lang
from asm import parse_asm
from backtranslation import (
    EXTCALL,
    RUNTIME_MIRROR,
    BacktranslationError,
    MimickingMonitor,
    backtranslate_program,
    check_mimicking_state,
    metadata_buffer,
    metadata_size,
    mirror_value,
)
from compiler import compile_program, link
from conftest import NET_SIZE, STACK_SIZE
from corpus import NET, net_context, net_main
from memory import RUNTIME_BLOCK, Int, Ptr, code_ptr, data_ptr
from outcomes import Done
from relations import Shift, trace_related
from traces import DfCall, Trace, remove_df


@pytest.fixture
def net_program():
    yield link(compile_program(net_main(NET_SIZE), STACK_SIZE), net_context("filling", NET_SIZE))


def test_mirror_value():
    assert mirror_value(data_ptr(0, 2, 3)) == data_ptr(0, 3, 3)
    assert mirror_value(data_ptr(0, 0, 1)) == data_ptr(0, 1, 1)
    assert mirror_value(data_ptr(1, RUNTIME_BLOCK, 4)) == data_ptr(1, 0, RUNTIME_MIRROR + 4)
    assert mirror_value(code_ptr(0, 1)) == code_ptr(0, 1)
    assert mirror_value(Int(7)) == Int(7)


def test_metadata_buffer():
    buffer = metadata_buffer(16)
    assert len(buffer) == metadata_size(16)
    assert buffer[EXTCALL] == Int(1)
    # The runtime mirror starts with the cleared call flag
    assert buffer[RUNTIME_MIRROR + 1] == Int(0)
    assert not any(isinstance(v, Ptr) for v in buffer)


def test_backtranslated_program_shape(net_program):
    df = target_lang.run(net_program, 10_000)
    bt = backtranslate_program(df.trace, net_program)
    program = bt.program
    assert source_lang.well_formed(program) == []
    assert program.intf == net_program.intf
    assert set(program.procs) == set(net_program.procs)
    assert len(program.buffer(0)) == metadata_size(STACK_SIZE)
    # The Net context has no runtime block
    assert len(program.buffer(NET)) == metadata_size(0)


def test_replay_is_mimicking(net_program):
    df = target_lang.run(net_program, 10_000)
    bt = backtranslate_program(df.trace, net_program)
    monitor = MimickingMonitor(bt)
    result = source_lang.run(bt.program, 100_000, monitor)
    assert isinstance(result.outcome, Done)
    assert monitor.ok, monitor.violations[:1]
    assert monitor.boundary == len(df.trace) + 1
    assert trace_related(Shift(1), remove_df(df.trace), result.trace)


def test_interaction_traces_are_rejected(net_program):
    plain = target_lang.run(net_program, 10_000, target_lang.Instrument.INTERACTION)
    with pytest.raises(BacktranslationError):
        backtranslate_program(plain.trace, net_program)


def test_broken_control_flow_is_rejected(net_program):
    df = target_lang.run(net_program, 10_000)
    # Dropping the first call leaves Net events while Main has control
    first = _first_call(df.trace)
    events = [e for i, e in enumerate(df.trace) if i != first]
    with pytest.raises(BacktranslationError):
        backtranslate_program(Trace(tuple(events)), net_program)


def _first_call(trace: Trace) -> int:
    return next(i for i, e in enumerate(trace) if isinstance(e, DfCall))


def test_mimicking_state_at_the_start(net_program):
    df = target_lang.run(net_program, 10_000)
    bt = backtranslate_program(df.trace, net_program)
    start = source_lang.initial_state(bt.program)
    assert check_mimicking_state(bt, Trace(), df.trace, start)
    # The counters of the start state have replayed nothing
    assert not check_mimicking_state(bt, df.trace[:1], df.trace[1:], start)


SHARES_EMPTY_BUFFER = """\
.component 0 Main
.exports main
.imports 1.take
.proc main
    Const ptr(data,0,0,0) -> r_COM
    Call 1.take
    Halt
.component 1 Lib
.exports take
.buffer 0
.proc take
    Const 0 -> r_COM
    Return
"""


def test_shared_empty_static_block_is_rejected():
    program = parse_asm(SHARES_EMPTY_BUFFER)
    df = target_lang.run(program, 100)
    assert isinstance(df.outcome, Done)
    with pytest.raises(BacktranslationError):
        backtranslate_program(df.trace, program)
