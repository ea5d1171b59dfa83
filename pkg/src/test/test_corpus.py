import pytest

import source_lang
import target_lang
from compiler import link
from conftest import NET_SIZE
from corpus import (
    NET_KINDS,
    export_corpus,
    net_context,
    net_library,
    net_main,
    turn_taking_example,
)
from memory import Int
from models.program import load_program
from outcomes import Done
from relations import IDENTITY, trace_related


def test_net_parts_are_well_formed():
    assert source_lang.well_formed(net_main(NET_SIZE), partial=True) == []
    for kind in NET_KINDS:
        assert target_lang.well_formed(net_context(kind, NET_SIZE), partial=True) == []
        assert source_lang.well_formed(net_library(kind, NET_SIZE), partial=True) == []


def test_unknown_net_kind():
    with pytest.raises(ValueError):
        net_context("hostile", NET_SIZE)
    with pytest.raises(ValueError):
        net_library("hostile", NET_SIZE)


def test_turn_taking_contexts_look_alike():
    example = turn_taking_example()
    t1 = source_lang.run(link(example.p1, example.c1), 1000)
    t2 = source_lang.run(link(example.p1, example.c2), 1000)
    assert t1.outcome == t2.outcome == Done(Int(0))
    assert len(t1.trace) == 2
    assert trace_related(IDENTITY, t1.trace, t2.trace)


def test_turn_taking_compiles():
    example = turn_taking_example()
    p1, c1, _ = example.compiled(stack_size=64)
    result = target_lang.run(link(p1, c1), 10_000)
    assert isinstance(result.outcome, Done)


def test_export_corpus(tmp_path):
    written = export_corpus(tmp_path, NET_SIZE)
    names = {path.name for path in written}
    assert "net_main.src.json" in names
    assert {f"net_{kind}.asm" for kind in NET_KINDS} <= names
    assert "turn_taking_p1.asm" in names
    assert load_program(tmp_path / "net_overflowing.asm") == net_context("overflowing", NET_SIZE)
    assert load_program(tmp_path / "net_main.src.json") == net_main(NET_SIZE)
