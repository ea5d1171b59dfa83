import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import config
import source_lang
import target_lang
from compiler import LinkError, compile_program, link, split
from harness import GenConfig, check_compiler, gen_source_program
from memory import RUNTIME_BLOCK, Int
from models.report import Status
from outcomes import Done


def test_compiled_program_shape(double_program):
    compiled = compile_program(double_program, 32)
    assert compiled.intf == double_program.intf
    assert compiled.runtime == {0: 32, 1: 32}
    assert compiled.buffers == double_program.buffers
    assert target_lang.well_formed(compiled) == []
    state = target_lang.initial_state(compiled)
    assert state.mem.block(1, RUNTIME_BLOCK).size == 32


def test_compiled_program_computes_the_same(double_program, sharing_program):
    for program, expected in ((double_program, Int(10)), (sharing_program, Int(2))):
        compiled = compile_program(program, 64)
        assert target_lang.run(compiled, 10_000).outcome == Done(expected)
        assert check_compiler(program, 1000, 64).status is Status.PASSED


def test_link_and_split(double_program):
    part, rest = split(double_program, {0})
    assert part.comps() == frozenset({0})
    assert rest.comps() == frozenset({1})
    assert link(part, rest) == double_program
    compiled = compile_program(double_program, 32)
    mach_part, mach_rest = split(compiled, {1})
    assert mach_part.runtime == {1: 32}
    assert link(mach_rest, mach_part) == compiled


def test_link_errors(double_program):
    part, rest = split(double_program, {0})
    with pytest.raises(LinkError):
        link(part, part)
    with pytest.raises(LinkError):
        link(part, compile_program(rest, 32))
    # Main imports 1.double, which a lone part cannot resolve
    with pytest.raises(LinkError):
        link(part, split(rest, set())[0])


@settings(max_examples=config.PROPERTY_EXAMPLES, deadline=None)
@given(st.integers(0, 10_000))
def test_generated_programs_compile_correctly(seed):
    cfg = GenConfig(seed=seed, fuel=2000, stack_size=256)
    program = gen_source_program(cfg)
    assert source_lang.well_formed(program) == []
    verdict = check_compiler(program, cfg.fuel, cfg.stack_size)
    assert verdict.status is Status.PASSED, verdict.detail
