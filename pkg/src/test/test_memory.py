import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import config
from memory import (
    CHUNK_SIZE,
    ERROR,
    EMPTY_MEMORY,
    BinaryOperator,
    Block,
    Int,
    MemoryFault,
    Permission,
    Pointer,
    Ptr,
    alloc,
    code_ptr,
    data_ptr,
    disjoint_union,
    eval_binop,
    filter_blocks,
    initial_memory,
    load,
    proj_part,
    store,
)


@pytest.fixture
def mem():
    yield initial_memory({0: (Int(1), Int(2), Int(3)), 1: (Int(9),)})


def test_initial_memory(mem):
    assert load(mem, Pointer(Permission.DATA, 0, 0, 2)) == Int(3)
    assert load(mem, Pointer(Permission.DATA, 1, 0, 0)) == Int(9)
    assert len(mem) == 2


def test_store_is_persistent(mem):
    ptr = Pointer(Permission.DATA, 0, 0, 1)
    mem2 = store(mem, ptr, Int(42))
    assert load(mem2, ptr) == Int(42)
    # The old memory is untouched
    assert load(mem, ptr) == Int(2)


def test_store_never_allocates(mem):
    with pytest.raises(MemoryFault):
        store(mem, Pointer(Permission.DATA, 0, 5, 0), Int(1))
    with pytest.raises(MemoryFault):
        store(mem, Pointer(Permission.DATA, 2, 0, 0), Int(1))


def test_out_of_bounds(mem):
    with pytest.raises(MemoryFault):
        load(mem, Pointer(Permission.DATA, 0, 0, 3))
    with pytest.raises(MemoryFault):
        load(mem, Pointer(Permission.DATA, 0, 0, -1))


def test_code_pointers_do_not_access_memory(mem):
    with pytest.raises(MemoryFault):
        load(mem, code_ptr(0, 0).ptr)


def test_alloc_sequential_ids(mem):
    mem, p1 = alloc(mem, 0, 2)
    mem, p2 = alloc(mem, 0, 5)
    mem, q1 = alloc(mem, 1, 1)
    assert (p1.block, p2.block, q1.block) == (1, 2, 1)
    # Fresh blocks are filled with Error
    assert load(mem, p2.shifted(4)) == ERROR


def test_alloc_rejects_non_positive_size(mem):
    with pytest.raises(MemoryFault):
        alloc(mem, 0, 0)


def test_large_block_spans_chunks():
    block = Block.filled(3 * CHUNK_SIZE + 1, Int(0))
    updated = block.set(2 * CHUNK_SIZE + 5, Int(7))
    assert updated.get(2 * CHUNK_SIZE + 5) == Int(7)
    assert block.get(2 * CHUNK_SIZE + 5) == Int(0)
    # Untouched chunks are shared
    assert updated.chunks[0] is block.chunks[0]
    assert len(updated.cells()) == updated.size


def test_pointer_arithmetic():
    p = data_ptr(0, 1, 2)
    assert eval_binop(BinaryOperator.ADD, p, Int(3)) == data_ptr(0, 1, 5)
    assert eval_binop(BinaryOperator.SUB, p, Int(2)) == data_ptr(0, 1, 0)
    assert eval_binop(BinaryOperator.SUB, data_ptr(0, 1, 7), p) == Int(5)
    assert eval_binop(BinaryOperator.EQ, p, data_ptr(0, 1, 2)) == Int(1)
    assert eval_binop(BinaryOperator.EQ, p, data_ptr(0, 2, 2)) == Int(0)
    assert eval_binop(BinaryOperator.MUL, p, Int(2)) is None
    assert eval_binop(BinaryOperator.SUB, p, data_ptr(0, 2, 0)) is None
    assert eval_binop(BinaryOperator.ADD, Int(1), ERROR) is None


def _cells(m):
    return {loc: m.block(*loc) for loc in m.locations()}


def test_projections(mem):
    mem, _ = alloc(mem, 1, 2)
    assert set(proj_part(mem, {1}).locations()) == {(1, 0), (1, 1)}
    dynamic = filter_blocks(mem, lambda c, b: b > 0)
    assert set(dynamic.locations()) == {(1, 1)}
    static = filter_blocks(mem, lambda c, b: b == 0)
    assert _cells(disjoint_union(static, dynamic)) == _cells(mem)
    assert _cells(static) != _cells(mem)
    assert _cells(filter_blocks(mem, lambda c, b: False)) == _cells(EMPTY_MEMORY) == {}


@settings(max_examples=config.PROPERTY_EXAMPLES)
@given(st.integers(-1000, 1000), st.integers(-1000, 1000))
def test_integer_binops(a, b):
    assert eval_binop(BinaryOperator.ADD, Int(a), Int(b)) == Int(a + b)
    assert eval_binop(BinaryOperator.SUB, Int(a), Int(b)) == Int(a - b)
    assert eval_binop(BinaryOperator.MUL, Int(a), Int(b)) == Int(a * b)
    assert eval_binop(BinaryOperator.LEQ, Int(a), Int(b)) == Int(int(a <= b))


@settings(max_examples=config.PROPERTY_EXAMPLES)
@given(st.lists(st.integers(0, 200), min_size=1, max_size=20), st.integers(1, 150))
def test_store_then_load(offsets, size):
    mem, ptr = alloc(EMPTY_MEMORY, 0, size)
    for offset in offsets:
        target = ptr.shifted(offset)
        if offset < size:
            mem = store(mem, target, Ptr(ptr))
            assert load(mem, target) == Ptr(ptr)
        else:
            with pytest.raises(MemoryFault):
                store(mem, target, Int(0))
