"""Block-based, component-partitioned memory shared by both languages.

Memories are persistent: every update returns a new value and leaves the
old one intact, so execution states and trace snapshots can hold on to a
memory without copying it.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Union

logger = logging.getLogger(__name__)

STATIC_BLOCK = 0
RUNTIME_BLOCK = -1
FIRST_DYNAMIC_BLOCK = 1

CHUNK_SIZE = 64


class MemoryFault(Exception):
    """Raised on an invalid access or allocation."""


class Permission(enum.Enum):
    DATA = "data"
    CODE = "code"


@dataclass(frozen=True, slots=True)
class Pointer:
    """
    A safe pointer.

    Attributes:
        perm (Permission): DATA pointers address memory, CODE pointers address
                           procedures (the block is the procedure id).
        comp (int): Owning component.
        block (int): Block id, -1 being the compiled runtime block.
        offset (int): Word offset inside the block.
    """

    perm: Permission
    comp: int
    block: int
    offset: int

    def shifted(self, delta: int) -> Pointer:
        return Pointer(self.perm, self.comp, self.block, self.offset + delta)

    def __str__(self) -> str:
        return f"ptr({self.perm.value},{self.comp},{self.block},{self.offset})"


@dataclass(frozen=True, slots=True)
class Int:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True, slots=True)
class Ptr:
    ptr: Pointer

    def __str__(self) -> str:
        return str(self.ptr)


@dataclass(frozen=True, slots=True)
class ErrorValue:
    def __str__(self) -> str:
        return "error"


ERROR = ErrorValue()

Value = Union[Int, Ptr, ErrorValue]


def data_ptr(comp: int, block: int, offset: int = 0) -> Ptr:
    return Ptr(Pointer(Permission.DATA, comp, block, offset))


def code_ptr(comp: int, proc_id: int, offset: int = 0) -> Ptr:
    return Ptr(Pointer(Permission.CODE, comp, proc_id, offset))


def is_data_ptr(v: Value) -> bool:
    return isinstance(v, Ptr) and v.ptr.perm is Permission.DATA


class BinaryOperator(enum.Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    EQ = "="
    LEQ = "<="


def eval_binop(op: BinaryOperator, v1: Value, v2: Value) -> Value | None:
    """
    Evaluates a binary operator on two values.

    Integers support every operator. Pointer arithmetic only moves the
    offset, pointers compare structurally, and two pointers into the same
    block may be subtracted.

    Args:
        op (BinaryOperator): The operator.
        v1 (Value): Left operand.
        v2 (Value): Right operand.

    Returns:
        Value | None: The result, or None when no rule applies.
    """
    if isinstance(v1, Int) and isinstance(v2, Int):
        a, b = v1.value, v2.value
        match op:
            case BinaryOperator.ADD:
                return Int(a + b)
            case BinaryOperator.SUB:
                return Int(a - b)
            case BinaryOperator.MUL:
                return Int(a * b)
            case BinaryOperator.EQ:
                return Int(int(a == b))
            case BinaryOperator.LEQ:
                return Int(int(a <= b))
    if isinstance(v1, Ptr) and isinstance(v2, Int):
        if op is BinaryOperator.ADD:
            return Ptr(v1.ptr.shifted(v2.value))
        if op is BinaryOperator.SUB:
            return Ptr(v1.ptr.shifted(-v2.value))
        return None
    if isinstance(v1, Ptr) and isinstance(v2, Ptr):
        if op is BinaryOperator.EQ:
            return Int(int(v1.ptr == v2.ptr))
        p, q = v1.ptr, v2.ptr
        if op is BinaryOperator.SUB and (p.perm, p.comp, p.block) == (
            q.perm,
            q.comp,
            q.block,
        ):
            return Int(p.offset - q.offset)
    return None


@dataclass(frozen=True, slots=True)
class Block:
    """
    A fixed-size array of values stored as a tuple of chunks.

    Updating one cell copies a single chunk, so large blocks stay cheap to
    update persistently.
    """

    size: int
    chunks: tuple[tuple[Value, ...], ...]

    @classmethod
    def of(cls, cells: Iterable[Value]) -> Block:
        cells = tuple(cells)
        chunks = tuple(
            cells[i : i + CHUNK_SIZE] for i in range(0, len(cells), CHUNK_SIZE)
        )
        return cls(len(cells), chunks)

    @classmethod
    def filled(cls, size: int, value: Value = ERROR) -> Block:
        return cls.of((value,) * size)

    def get(self, offset: int) -> Value:
        return self.chunks[offset // CHUNK_SIZE][offset % CHUNK_SIZE]

    def set(self, offset: int, value: Value) -> Block:
        i, j = divmod(offset, CHUNK_SIZE)
        chunk = self.chunks[i]
        chunk = chunk[:j] + (value,) + chunk[j + 1 :]
        return Block(self.size, self.chunks[:i] + (chunk,) + self.chunks[i + 1 :])

    def cells(self) -> tuple[Value, ...]:
        return tuple(v for chunk in self.chunks for v in chunk)

    def in_bounds(self, offset: int) -> bool:
        return 0 <= offset < self.size


@dataclass(frozen=True, slots=True)
class ComponentMemory:
    """
    The blocks owned by one component.

    Attributes:
        blocks (Mapping[int, Block]): Block id to block.
        next_dynamic (int): Id the next allocation receives.
    """

    blocks: Mapping[int, Block] = field(default_factory=dict)
    next_dynamic: int = FIRST_DYNAMIC_BLOCK

    def with_block(self, block_id: int, block: Block) -> ComponentMemory:
        blocks = dict(self.blocks)
        blocks[block_id] = block
        return ComponentMemory(blocks, self.next_dynamic)


@dataclass(frozen=True, slots=True)
class Memory:
    comps: Mapping[int, ComponentMemory] = field(default_factory=dict)

    def block(self, comp: int, block_id: int) -> Block | None:
        cmem = self.comps.get(comp)
        if cmem is None:
            return None
        return cmem.blocks.get(block_id)

    def with_block(self, comp: int, block_id: int, block: Block) -> Memory:
        comps = dict(self.comps)
        comps[comp] = comps.get(comp, ComponentMemory()).with_block(block_id, block)
        return Memory(comps)

    def locations(self) -> Iterator[tuple[int, int]]:
        for comp in sorted(self.comps):
            for block_id in sorted(self.comps[comp].blocks):
                yield comp, block_id

    def __len__(self) -> int:
        return sum(len(cmem.blocks) for cmem in self.comps.values())


EMPTY_MEMORY = Memory()


def _resolve(mem: Memory, ptr: Pointer) -> Block:
    if ptr.perm is not Permission.DATA:
        raise MemoryFault(f"cannot access memory through code pointer {ptr}")
    block = mem.block(ptr.comp, ptr.block)
    if block is None:
        raise MemoryFault(f"unallocated block in {ptr}")
    if not block.in_bounds(ptr.offset):
        raise MemoryFault(f"offset out of bounds in {ptr} (size {block.size})")
    return block


def load(mem: Memory, ptr: Pointer) -> Value:
    """
    Reads the value stored at a location.

    Args:
        mem (Memory): The memory.
        ptr (Pointer): A DATA pointer to an allocated, in-bounds location.

    Returns:
        Value: The stored value.

    Raises:
        MemoryFault: On code permission, unallocated block or bad offset.
    """
    return _resolve(mem, ptr).get(ptr.offset)


def store(mem: Memory, ptr: Pointer, value: Value) -> Memory:
    """
    Writes a value at an existing location, never allocating.

    Raises:
        MemoryFault: On code permission, unallocated block or bad offset.
    """
    block = _resolve(mem, ptr)
    return mem.with_block(ptr.comp, ptr.block, block.set(ptr.offset, value))


def alloc(mem: Memory, comp: int, size: int) -> tuple[Memory, Pointer]:
    """
    Allocates a fresh block of Error cells in a component.

    Block ids are handed out sequentially per component starting at 1.

    Args:
        mem (Memory): The memory.
        comp (int): Component receiving the block.
        size (int): Number of words, must be positive.

    Returns:
        tuple[Memory, Pointer]: The new memory and a DATA pointer to offset 0.

    Raises:
        MemoryFault: If size is not positive.
    """
    if size <= 0:
        raise MemoryFault(f"cannot allocate a block of size {size}")
    cmem = mem.comps.get(comp, ComponentMemory())
    block_id = cmem.next_dynamic
    blocks = dict(cmem.blocks)
    blocks[block_id] = Block.filled(size)
    comps = dict(mem.comps)
    comps[comp] = ComponentMemory(blocks, block_id + 1)
    logger.debug("alloc: component %s block %s size %s", comp, block_id, size)
    return Memory(comps), Pointer(Permission.DATA, comp, block_id, 0)


def proj_part(mem: Memory, comps: Iterable[int]) -> Memory:
    """Restricts a memory to the given components, contents untouched."""
    keep = set(comps)
    return Memory({c: cmem for c, cmem in mem.comps.items() if c in keep})


def filter_blocks(mem: Memory, keep: Callable[[int, int], bool]) -> Memory:
    """Keeps only the blocks (comp, block) for which `keep` holds."""
    comps = {}
    for c, cmem in mem.comps.items():
        blocks = {b: blk for b, blk in cmem.blocks.items() if keep(c, b)}
        if blocks:
            comps[c] = ComponentMemory(blocks, cmem.next_dynamic)
    return Memory(comps)


def disjoint_union(m1: Memory, m2: Memory) -> Memory:
    """Merges two memories with disjoint block sets."""
    comps = dict(m1.comps)
    for c, cmem in m2.comps.items():
        if c not in comps:
            comps[c] = cmem
            continue
        blocks = dict(comps[c].blocks)
        blocks.update(cmem.blocks)
        comps[c] = ComponentMemory(
            blocks, max(comps[c].next_dynamic, cmem.next_dynamic)
        )
    return Memory(comps)


def initial_memory(buffers: Mapping[int, Iterable[Value]]) -> Memory:
    """Builds the memory holding each component's static block 0."""
    return Memory(
        {
            c: ComponentMemory({STATIC_BLOCK: Block.of(cells)})
            for c, cells in buffers.items()
        }
    )
