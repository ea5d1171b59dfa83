"""Long-running property checks over fixed seed ranges.

Deselected by default; run them with `just test-slow`.
"""

import pytest

import target_lang
from harness import (
    GenConfig,
    check_compiler,
    check_enrichment,
    gen_mach_program,
    gen_source_program,
    rsp_test,
    run_backtranslation,
)
from memory import ERROR, disjoint_union
from models.report import Status
from registers import Register
from traces import DfCall, DfRet, private_proj, shared_blocks, shared_proj, well_bracketed

pytestmark = pytest.mark.slow

FUEL = 2000
ENRICHMENT_CASES = 500
BACKTRANSLATION_CASES = 200
COMPILER_CASES = 500
PIPELINE_CASES = 200
SANITY_CASES = 1000


def _cfg(seed: int, **kwargs) -> GenConfig:
    return GenConfig(seed=seed, fuel=FUEL, stack_size=256, **kwargs)


def _cells(m):
    return {loc: m.block(*loc) for loc in m.locations()}


def test_enrichment():
    for seed in range(ENRICHMENT_CASES):
        verdict = check_enrichment(gen_mach_program(_cfg(seed)), FUEL)
        assert verdict.status is Status.PASSED, (seed, verdict.detail)


def test_backtranslation_of_runs_sharing_memory():
    checked = 0
    for seed in range(10 * BACKTRANSLATION_CASES):
        program = gen_mach_program(_cfg(seed, share_probability=0.9))
        df = target_lang.run(program, FUEL)
        if not shared_blocks(df.trace):
            continue
        verdict, _, _ = run_backtranslation(program, df.trace)
        assert verdict.status is Status.PASSED, (seed, verdict.detail)
        checked += 1
        if checked == BACKTRANSLATION_CASES:
            break
    assert checked == BACKTRANSLATION_CASES


def test_compiler_correctness():
    for seed in range(COMPILER_CASES):
        cfg = _cfg(seed)
        verdict = check_compiler(gen_source_program(cfg), FUEL, cfg.stack_size)
        assert verdict.status is Status.PASSED, (seed, verdict.detail)


def test_pipeline_with_recomposition():
    report = rsp_test(0, PIPELINE_CASES, GenConfig(fuel=FUEL, stack_size=256))
    assert report.cases == PIPELINE_CASES
    assert report.ok, [(r.seed, r.detail) for r in report.results if r.status is Status.FAILED]


def test_trace_sanity():
    for seed in range(SANITY_CASES):
        program = gen_mach_program(_cfg(seed))
        result = target_lang.run(program, FUEL)
        trace = result.trace
        # Runs are deterministic
        assert target_lang.run(program, FUEL).trace == trace
        assert well_bracketed(trace), seed
        previous = frozenset()
        for i, event in enumerate(trace):
            shared = trace.shared_at(i + 1)
            assert previous <= shared, (seed, i)
            previous = shared
            if isinstance(event, (DfCall, DfRet)):
                assert all(
                    event.reg[r] == ERROR for r in Register if r is not Register.COM
                ), (seed, i)
        if len(trace):
            mem = trace[len(trace) - 1].mem
            shared = shared_blocks(trace)
            public, private = shared_proj(mem, shared), private_proj(mem, shared)
            assert set(public.locations()).isdisjoint(private.locations())
            assert _cells(disjoint_union(public, private)) == _cells(mem), seed
