import json

import pytest
from pydantic import ValidationError

import target_lang
from compiler import compile_program, link
from conftest import NET_SIZE, STACK_SIZE
from corpus import net_context, net_context_asm, net_main
from memory import EMPTY_MEMORY, ERROR, Int, data_ptr
from models.program import dump_program, load_program, parse_program
from models.report import RecompositionReport, RspTestReport, Status, Verdict
from models.trace import dump_trace, parse_trace
from models.value import IntValue, PtrValue, model_to_registers, value_from_json, value_to_json
from source_lang import SourceProgram
from target_lang import MachProgram


@pytest.fixture
def net_run():
    program = link(compile_program(net_main(NET_SIZE), STACK_SIZE), net_context("filling", NET_SIZE))
    yield target_lang.run(program, 10_000)


def test_value_json():
    assert value_to_json(Int(3)) == {"int": 3}
    assert value_to_json(ERROR) == "error"
    assert value_to_json(data_ptr(1, -1, 2)) == {"ptr": ("data", 1, -1, 2)}
    assert value_from_json({"ptr": ["code", 0, 1, 0]}).ptr.block == 1
    assert value_from_json({"int": -4}) == Int(-4)
    with pytest.raises(ValidationError):
        value_from_json({"ptr": ["heap", 0, 0, 0]})
    with pytest.raises(ValidationError):
        value_from_json({"int": 1, "ptr": ["data", 0, 0, 0]})


def test_register_file_length():
    with pytest.raises(ValueError):
        model_to_registers([IntValue(value=0)] * 3)
    assert len(model_to_registers([IntValue(value=0)] + ["error"] * 6)) == 7
    assert PtrValue(ptr=("data", 0, 0, 0)).ptr[0] == "data"


def test_source_program_file(double_program):
    text = dump_program(double_program)
    data = json.loads(text)
    assert data["language"] == "source"
    assert set(data["procs"]) == {"0.main", "1.double"}
    assert data["intf"]["0"]["imports"] == ["1.double"]
    assert parse_program(text) == double_program


def test_mach_program_file(tmp_path, double_program):
    compiled = compile_program(double_program, 32)
    path = tmp_path / "double.json"
    path.write_text(dump_program(compiled))
    loaded = load_program(path)
    assert isinstance(loaded, MachProgram)
    assert loaded == compiled


def test_program_file_validation(double_program):
    data = json.loads(dump_program(double_program))
    data["procs"]["main"] = data["procs"].pop("0.main")
    with pytest.raises(ValidationError):
        parse_program(json.dumps(data))
    data = json.loads(dump_program(compile_program(double_program, 32)))
    data["runtime"]["0"] = 1
    with pytest.raises(ValidationError):
        parse_program(json.dumps(data))
    with pytest.raises(ValueError):
        parse_program("[]")


def test_asm_files_are_detected(tmp_path):
    path = tmp_path / "net.asm"
    path.write_text(net_context_asm("benign", NET_SIZE))
    assert load_program(path) == net_context("benign", NET_SIZE)
    other = tmp_path / "net.txt"
    other.write_text(net_context_asm("benign", NET_SIZE))
    assert load_program(other, "asm") == net_context("benign", NET_SIZE)


def test_trace_file(net_run):
    trace = net_run.trace
    text = dump_trace(trace)
    data = json.loads(text)
    # Consecutive events share their memory snapshot
    assert len(data["memories"]) < len(data["events"])
    assert parse_trace(text) == trace


def test_trace_file_elided_memory(net_run):
    loaded = parse_trace(dump_trace(net_run.trace, elide_memory=True))
    assert len(loaded) == len(net_run.trace)
    assert all(event.mem == EMPTY_MEMORY for event in loaded)


def test_trace_file_validation():
    with pytest.raises(ValidationError):
        parse_trace(json.dumps({"events": [{"kind": "Jump"}]}))
    with pytest.raises(ValidationError):
        parse_trace(json.dumps({"events": [{"kind": "Ret", "prev": 1, "next": 0}]}))
    with pytest.raises(ValidationError):
        parse_trace(
            json.dumps(
                {"events": [{"kind": "Ret", "prev": 1, "next": 0, "val": "error", "mem": 3}]}
            )
        )
    with pytest.raises(ValidationError):
        parse_trace(
            json.dumps(
                {
                    "events": [
                        {
                            "kind": "Mov",
                            "reg": ["error"] * 7,
                            "cur": 0,
                            "rs": "r_COM",
                            "rd": "r_PC",
                        }
                    ]
                }
            )
        )


def test_reports():
    verdict = Verdict.failed("III", "lock-step lost")
    assert not verdict.ok
    assert Verdict.skipped("III", "unrelated").ok
    with pytest.raises(ValidationError):
        Verdict(check=" ", status=Status.PASSED)
    with pytest.raises(ValidationError):
        RecompositionReport(verdict=verdict, steps=-1)
    report = RspTestReport(seed=0, cases=2, passed=1, failed=1)
    assert not report.ok
    assert json.loads(report.model_dump_json())["failed"] == 1


def test_source_part_file():
    program = net_main(NET_SIZE)
    loaded = parse_program(dump_program(program))
    assert isinstance(loaded, SourceProgram)
    assert loaded.buffer(0)[-1] == Int(100)
