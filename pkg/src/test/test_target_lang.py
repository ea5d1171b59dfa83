import pytest

import target_lang
from asm import parse_asm
from memory import ERROR, RUNTIME_BLOCK, Int, data_ptr
from outcomes import Done, OutOfFuel, Stuck
from registers import Register
from target_lang import Instrument, runtime_block, well_formed
from traces import DfBinOp, DfCall, DfConst, DfRet, DfStore, remove_df

DOUBLE = """\
.component 0 Main
.exports main
.imports 1.double
.buffer 0
.proc main
    Const 5 -> r_COM
    Call 1.double
    Halt
.component 1 Lib
.exports double
.proc double
    BinOp r_COM + r_COM -> r_COM
    Return
"""


@pytest.fixture
def double_mach():
    yield parse_asm(DOUBLE)


def _main_only(body: str, header: str = "") -> str:
    return f".component 0\n.exports main\n.buffer 0 0\n{header}.proc main\n{body}"


def test_data_flow_run(double_mach):
    assert well_formed(double_mach) == []
    result = target_lang.run(double_mach, 100)
    assert result.outcome == Done(Int(10))
    kinds = [type(e) for e in result.trace]
    assert kinds == [DfConst, DfCall, DfBinOp, DfRet]
    # Calls keep only r_COM
    call = result.trace[1]
    assert call.reg[Register.COM] == Int(5)
    assert call.reg[Register.R1] != Int(5)


def test_interaction_run_matches_projection(double_mach):
    df = target_lang.run(double_mach, 100, Instrument.DATA_FLOW)
    plain = target_lang.run(double_mach, 100, Instrument.INTERACTION)
    assert remove_df(df.trace) == plain.trace
    assert len(plain.trace) == 2


def test_store_event_carries_memory_after():
    program = parse_asm(
        _main_only(
            "    Const ptr(data,0,0,1) -> r_AUX1\n"
            "    Const 7 -> r_R1\n"
            "    Store *r_AUX1 <- r_R1\n"
            "    Halt\n"
        )
    )
    result = target_lang.run(program, 100)
    store = result.trace[-1]
    assert isinstance(store, DfStore)
    assert store.mem.block(0, 0).get(1) == Int(7)


def test_return_with_empty_stack_is_stuck():
    program = parse_asm(_main_only("    Return\n"))
    assert isinstance(target_lang.run(program, 10).outcome, Stuck)


def test_load_through_integer_is_stuck():
    program = parse_asm(_main_only("    Const 3 -> r_AUX1\n    Load *r_AUX1 -> r_COM\n"))
    assert isinstance(target_lang.run(program, 10).outcome, Stuck)


def test_loop_runs_out_of_fuel():
    program = parse_asm(_main_only("loop:\n    Const 1 -> r_R1\n    Bnz r_R1 loop\n"))
    result = target_lang.run(program, 25)
    assert result.outcome == OutOfFuel()
    assert result.steps == 25


def test_alloc_and_function_pointer():
    program = parse_asm(
        _main_only(
            "    Const 3 -> r_R1\n"
            "    Alloc r_AUX1 r_R1\n"
            "    PtrOfLabel done -> r_AUX2\n"
            "    Jump r_AUX2\n"
            "    Const 1 -> r_COM\n"
            "done:\n"
            "    Mov r_AUX1 -> r_COM\n"
            "    Halt\n"
        )
    )
    result = target_lang.run(program, 100)
    assert result.outcome == Done(data_ptr(0, 1, 0))


def test_foreign_immediate_is_rejected():
    program = parse_asm(_main_only("    Const ptr(data,1,0,0) -> r_AUX1\n    Halt\n"))
    assert any("invalid immediate" in e for e in well_formed(program))


def test_runtime_pointer_needs_runtime_block():
    body = "    Const ptr(data,0,-1,0) -> r_AUX1\n    Halt\n"
    assert well_formed(parse_asm(_main_only(body))) != []
    assert well_formed(parse_asm(_main_only(body, ".runtime 16\n"))) == []


def test_runtime_block_layout():
    block = runtime_block(2, 8)
    assert block.get(0) == data_ptr(2, RUNTIME_BLOCK, 2)
    assert block.get(1) == Int(0)
    program = parse_asm(_main_only("    Halt\n", ".runtime 8\n"))
    state = target_lang.initial_state(program)
    assert state.mem.block(0, RUNTIME_BLOCK) == runtime_block(0, 8)


def test_call_to_unimported_is_rejected(double_mach):
    text = DOUBLE.replace(".imports 1.double\n", "")
    assert any("unimported" in e for e in well_formed(parse_asm(text)))


def test_nop_and_label_do_not_change_the_trace(double_mach):
    padded = parse_asm(
        DOUBLE.replace("    Call 1.double\n", "    Nop\nhere:\n    Call 1.double\n").replace(
            "    Return\n", "    Nop\n    Label there\n    Return\n"
        )
    )
    plain = target_lang.run(double_mach, 100)
    result = target_lang.run(padded, 100)
    assert result.outcome == plain.outcome == Done(Int(10))
    assert result.trace == plain.trace


def test_registers_are_invalidated_at_borders():
    program = parse_asm(
        DOUBLE.replace("    Const 5 -> r_COM\n", "    Const 5 -> r_COM\n    Const 3 -> r_R1\n").replace(
            "    Return\n", "    Const 9 -> r_AUX1\n    Return\n"
        )
    )
    trace = target_lang.run(program, 100).trace
    call = next(e for e in trace if isinstance(e, DfCall))
    ret = next(e for e in trace if isinstance(e, DfRet))
    # Only r_COM crosses the border
    assert call.reg == (Int(5),) + (ERROR,) * 6
    assert ret.reg == (Int(10),) + (ERROR,) * 6
