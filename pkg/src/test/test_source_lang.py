from dataclasses import replace

import source_lang
from interface import MAIN_PROC, ComponentInterface, Interface
from memory import BinaryOperator, Int, data_ptr
from outcomes import Done, OutOfFuel, Stuck
from source_lang import (
    ARG,
    EXIT,
    LOCAL,
    BinOp,
    Call,
    CallPtr,
    Deref,
    FunPtr,
    Seq,
    SourceProgram,
    Val,
    well_formed,
)
from traces import CallEvent, RetEvent, shared_blocks


def _single(procs, buffer=(Int(0),)):
    intf = Interface({0: ComponentInterface(tuple(name for _, name in procs), ())})
    return SourceProgram(intf, procs, {0: buffer})


def test_run_emits_call_and_return(double_program):
    assert well_formed(double_program) == []
    result = source_lang.run(double_program, 1000)
    assert result.outcome == Done(Int(10))
    events = result.trace.events
    assert len(events) == 2
    assert isinstance(events[0], CallEvent)
    assert (events[0].caller, events[0].callee, events[0].proc) == (0, 1, "double")
    assert events[0].arg == Int(5)
    assert isinstance(events[1], RetEvent)
    assert (events[1].prev, events[1].next, events[1].val) == (1, 0, Int(10))


def test_shared_block_through_call(sharing_program):
    result = source_lang.run(sharing_program, 1000)
    assert result.outcome == Done(Int(2))
    assert shared_blocks(result.trace) == frozenset({(0, 1)})
    # The return event carries the memory updated by the callee
    ret = result.trace[1]
    assert ret.mem.block(0, 1).get(0) == Int(2)


def test_dereference_of_integer_is_stuck():
    program = _single({(0, MAIN_PROC): Deref(Val(Int(3)))})
    result = source_lang.run(program, 100)
    assert isinstance(result.outcome, Stuck)
    assert len(result.trace) == 0


def test_exit_terminates():
    program = _single({(0, MAIN_PROC): Seq(EXIT, Deref(Val(Int(3))))})
    assert source_lang.run(program, 100).outcome == Done(Int(0))


def test_out_of_fuel():
    program = _single({(0, MAIN_PROC): Call(0, MAIN_PROC, ARG)})
    result = source_lang.run(program, 50)
    assert result.outcome == OutOfFuel()
    assert result.steps == 50


def test_function_pointer_call():
    program = _single(
        {
            (0, MAIN_PROC): CallPtr(FunPtr("inc"), Val(Int(1))),
            (0, "inc"): BinOp(BinaryOperator.ADD, ARG, Val(Int(1))),
        }
    )
    result = source_lang.run(program, 100)
    assert result.outcome == Done(Int(2))
    # Internal calls emit nothing
    assert len(result.trace) == 0


def test_call_through_data_pointer_is_stuck():
    program = _single({(0, MAIN_PROC): CallPtr(LOCAL, Val(Int(1)))})
    assert isinstance(source_lang.run(program, 100).outcome, Stuck)


def test_local_is_static_block():
    program = _single({(0, MAIN_PROC): LOCAL})
    assert source_lang.run(program, 100).outcome == Done(data_ptr(0, 0, 0))


def test_well_formed_rejects(double_program):
    bad = replace(
        double_program,
        procs={**double_program.procs, (0, MAIN_PROC): Val(data_ptr(0, 0, 0))},
    )
    assert any("pointer literal" in e for e in well_formed(bad))

    unimported = replace(
        double_program,
        procs={**double_program.procs, (1, "double"): Call(0, MAIN_PROC, ARG)},
    )
    assert any("unimported" in e for e in well_formed(unimported))

    pointer_buffer = replace(double_program, buffers={0: (data_ptr(0, 0, 0),)})
    assert any("contains a pointer" in e for e in well_formed(pointer_buffer))


def test_partial_program_may_lack_main(double_program):
    lib = SourceProgram(
        double_program.intf.restrict({1}),
        {(1, "double"): double_program.procs[(1, "double")]},
    )
    assert well_formed(lib, partial=True) == []
    assert well_formed(lib) != []
