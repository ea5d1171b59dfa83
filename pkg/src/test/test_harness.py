import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

import config
from compiler import compile_program, link, split
from conftest import NET_SIZE, STACK_SIZE
from corpus import net_context, net_main, net_safety
from harness import (
    GenConfig,
    check_backtranslation,
    check_enrichment,
    check_naive_relation_fails,
    check_recomposition,
    gen_mach_program,
    gen_rsp_case,
    gen_source_program,
    rsp_pipeline,
    rsp_test,
)
from models.report import Status

FUEL = 5000


def _small(seed: int) -> GenConfig:
    return GenConfig(seed=seed, fuel=2000, stack_size=256)


@pytest.fixture
def net_part():
    yield compile_program(net_main(NET_SIZE), STACK_SIZE)


def test_gen_config_validation():
    with pytest.raises(ValidationError):
        GenConfig(components=1)
    with pytest.raises(ValidationError):
        GenConfig(share_probability=1.5)
    with pytest.raises(ValidationError):
        GenConfig(stack_size=8)


def test_generation_is_deterministic():
    assert gen_source_program(_small(7)) == gen_source_program(_small(7))
    assert gen_mach_program(_small(7)) == gen_mach_program(_small(7))


def test_rsp_case_shape():
    ps, ct = gen_rsp_case(_small(3))
    assert 0 in ps.comps()
    assert ps.comps().isdisjoint(ct.comps())
    assert ct.runtime == {}


@settings(max_examples=config.PROPERTY_EXAMPLES, deadline=None)
@given(st.integers(0, 10_000))
def test_enrichment_on_generated_programs(seed):
    verdict = check_enrichment(gen_mach_program(_small(seed)), FUEL)
    assert verdict.status is Status.PASSED, verdict.detail


@pytest.mark.parametrize("kind", ["benign", "filling", "overflowing"])
def test_backtranslation_of_net(net_part, kind):
    verdict = check_backtranslation(link(net_part, net_context(kind, NET_SIZE)), FUEL)
    assert verdict.status is Status.PASSED, verdict.detail
    assert verdict.renamings == {"remove_df(T1)~t_backtr": "shift:1"}


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_backtranslation_of_generated_programs(seed):
    verdict = check_backtranslation(gen_mach_program(_small(seed)), FUEL)
    assert verdict.status is Status.PASSED, verdict.detail


def test_recomposition_with_itself(net_part):
    context = net_context("filling", NET_SIZE)
    report = check_recomposition(net_part, context, net_part, context, FUEL)
    assert report.verdict.status is Status.PASSED, report.verdict.detail
    assert report.borders == 4
    assert report.verdict.renamings == {"t1~t12": "identity", "t2~t12": "identity"}


def test_recomposition_skips_unrelated_runs(net_part):
    report = check_recomposition(
        net_part,
        net_context("benign", NET_SIZE),
        net_part,
        net_context("filling", NET_SIZE),
        FUEL,
    )
    assert report.verdict.status is Status.SKIPPED


def test_recomposition_of_generated_parts():
    cfg = _small(11)
    ps, ct = gen_rsp_case(cfg)
    pt = compile_program(ps, cfg.stack_size)
    report = check_recomposition(pt, ct, pt, ct, FUEL)
    assert report.verdict.status is Status.PASSED, report.verdict.detail


def test_naive_relation_fails_on_turn_taking():
    witness = check_naive_relation_fails()
    assert witness.verdict.status is Status.PASSED, witness.verdict.detail
    assert witness.naive_failures > 0
    assert witness.tt_failures == 0
    assert witness.pc_accepts_mutation
    assert witness.tt_rejects_mutation


def test_pipeline_on_benign_net():
    result = rsp_pipeline(
        net_main(NET_SIZE), net_context("benign", NET_SIZE), FUEL, STACK_SIZE, net_safety(NET_SIZE)
    )
    assert result.verdict.status is Status.PASSED, result.verdict.detail
    assert [s.check for s in result.stages] == ["Ia", "Ib", "II", "III", "IV"]
    assert result.nowrite == {"t1": True, "t_qed": True}
    assert result.trace_lengths["t1"] == result.trace_lengths["t_qed"] == 4
    # The chain of stage renamings relates t1 to t_qed like the recomposition does
    assert "t1~t_backtr~t_qed" in result.stages[-1].renamings


def test_pipeline_reproduces_overflow_in_source():
    result = rsp_pipeline(
        net_main(NET_SIZE),
        net_context("overflowing", NET_SIZE),
        FUEL,
        STACK_SIZE,
        net_safety(NET_SIZE),
    )
    assert result.verdict.status is Status.PASSED, result.verdict.detail
    assert result.failed_stage is None
    # The violating context has a source counterpart violating the property too
    assert result.nowrite == {"t1": False, "t_qed": False}


def test_pipeline_rejects_unlinkable_parts():
    ps = net_main(NET_SIZE)
    part, _ = split(compile_program(ps, STACK_SIZE), {0})
    result = rsp_pipeline(ps, part, FUEL, STACK_SIZE)
    assert result.verdict.status is Status.FAILED
    assert result.failed_stage == "Ia"


def test_rsp_test_counts_cases():
    report = rsp_test(100, 3, _small(0), workers=2)
    assert report.cases == 3
    assert report.passed + report.failed + report.skipped == 3
    assert [r.seed for r in report.results] == [100, 101, 102]
    assert report.ok, [r.detail for r in report.results if r.status is Status.FAILED]
