"""Renamings, value and memory relatedness, the trace relation and the
memory relations used to monitor recomposed runs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

from memory import (
    RUNTIME_BLOCK,
    ErrorValue,
    Int,
    Memory,
    Permission,
    Ptr,
    Value,
    filter_blocks,
)
from registers import Register
from traces import (
    BlockId,
    CallEvent,
    DfCall,
    RetEvent,
    Trace,
    match_events,
    remove_df,
    shared_blocks,
)

logger = logging.getLogger(__name__)


# Renamings


@dataclass(frozen=True, slots=True)
class Identity:
    def apply(self, comp: int, block: int) -> int | None:
        return None if block < 0 else block

    def inverse(self) -> Identity:
        return self

    def describe(self) -> str:
        return "identity"


@dataclass(frozen=True, slots=True)
class Shift:
    """Relates block b of the first memory to block b+k of the second."""

    k: int

    def apply(self, comp: int, block: int) -> int | None:
        if block < 0 or block + self.k < 0:
            return None
        return block + self.k

    def inverse(self) -> Shift:
        return Shift(-self.k)

    def describe(self) -> str:
        return f"shift:{self.k}"


@dataclass(frozen=True)
class Table:
    """An explicit partial bijection on (component, block)."""

    mapping: Mapping[BlockId, int] = field(default_factory=dict)

    def __post_init__(self):
        targets = [(c, b) for (c, _), b in self.mapping.items()]
        if len(set(targets)) != len(targets):
            raise ValueError("renaming table is not injective")
        if any(b < 0 or b2 < 0 for (_, b), b2 in self.mapping.items()):
            raise ValueError("renaming table mentions a negative block")

    def apply(self, comp: int, block: int) -> int | None:
        return self.mapping.get((comp, block))

    def inverse(self) -> Table:
        return Table({(c, b2): b for (c, b), b2 in self.mapping.items()})

    def describe(self) -> str:
        pairs = ", ".join(
            f"{c}:{b}->{b2}" for (c, b), b2 in sorted(self.mapping.items())
        )
        return f"table[{pairs}]"


@dataclass(frozen=True, slots=True)
class Sided:
    """Shifts blocks of the `part` components and of the others independently."""

    part: frozenset[int]
    part_shift: int
    context_shift: int

    def apply(self, comp: int, block: int) -> int | None:
        k = self.part_shift if comp in self.part else self.context_shift
        if block < 0 or block + k < 0:
            return None
        return block + k

    def inverse(self) -> Sided:
        return Sided(self.part, -self.part_shift, -self.context_shift)

    def describe(self) -> str:
        comps = ",".join(str(c) for c in sorted(self.part))
        return f"sided[{comps}]:{self.part_shift}/{self.context_shift}"


@dataclass(frozen=True, slots=True)
class Composed:
    """`first`, then `second`."""

    first: Renaming
    second: Renaming

    def apply(self, comp: int, block: int) -> int | None:
        b = self.first.apply(comp, block)
        return None if b is None else self.second.apply(comp, b)

    def inverse(self) -> Composed:
        return Composed(self.second.inverse(), self.first.inverse())

    def describe(self) -> str:
        return f"{self.first.describe()} ; {self.second.describe()}"


Renaming = Union[Identity, Shift, Table, Sided, Composed]

IDENTITY = Identity()


def parse_renaming(text: str) -> Renaming:
    """Parses `identity` or `shift:K`. `table:FILE` is read by `commands.read_renaming`."""
    text = text.strip()
    if text == "identity":
        return IDENTITY
    kind, _, arg = text.partition(":")
    if kind == "shift":
        try:
            return Shift(int(arg))
        except ValueError:
            raise ValueError(f"invalid shift {arg!r}") from None
    raise ValueError(f"unknown renaming {text!r}")


# Values and memories


def _rename_block(ren: Renaming, comp: int, block: int) -> int | None:
    """Block −1 is never renamed: it can only correspond to itself."""
    if block == RUNTIME_BLOCK:
        return RUNTIME_BLOCK
    return ren.apply(comp, block)


def valren(ren: Renaming, v1: Value, v2: Value) -> bool:
    """
    Relates two values up to a block renaming.

    Integers and Error relate to themselves, CODE pointers must be identical,
    and DATA pointers relate when the component and offset agree and the
    renaming maps the first block to the second.
    """
    match v1, v2:
        case Int(a), Int(b):
            return a == b
        case ErrorValue(), ErrorValue():
            return True
        case Ptr(p1), Ptr(p2):
            if p1.perm is not p2.perm or p1.comp != p2.comp or p1.offset != p2.offset:
                return False
            if p1.perm is Permission.CODE:
                return p1.block == p2.block
            return _rename_block(ren, p1.comp, p1.block) == p2.block
    return False


def _block_related(ren: Renaming, m1: Memory, loc1: BlockId, m2: Memory, loc2: BlockId) -> bool:
    b1 = m1.block(*loc1)
    b2 = m2.block(*loc2)
    if b1 is None or b2 is None:
        return b1 is None and b2 is None
    if b1.size != b2.size:
        return False
    for c1, c2 in zip(b1.chunks, b2.chunks):
        if c1 == c2:
            if not all(valren(ren, v, v) for v in c1 if isinstance(v, Ptr)):
                return False
        elif not all(valren(ren, x, y) for x, y in zip(c1, c2)):
            return False
    return True


def mem_related(ren: Renaming, m1: Memory, m2: Memory, locs: Iterable[BlockId]) -> bool:
    """
    Relates the given blocks of m1 with their renamed counterparts in m2.

    Returns:
        bool: False when a location is block −1 or has no image, or when
              some block differs in size or cell contents.
    """
    for comp, block in locs:
        if block == RUNTIME_BLOCK:
            return False
        image = ren.apply(comp, block)
        if image is None:
            return False
        if not _block_related(ren, m1, (comp, block), m2, (comp, image)):
            return False
    return True


def blocks_related(ren: Renaming, m1: Memory, m2: Memory) -> bool:
    """Relates two whole memories; block −1 corresponds to itself."""
    images = set()
    for comp, block in m1.locations():
        image = _rename_block(ren, comp, block)
        if image is None or m2.block(comp, image) is None:
            return False
        if not _block_related(ren, m1, (comp, block), m2, (comp, image)):
            return False
        images.add((comp, image))
    return images == set(m2.locations())


def _image(ren: Renaming, locs: Iterable[BlockId]) -> set[BlockId] | None:
    result = set()
    for comp, block in locs:
        image = _rename_block(ren, comp, block)
        if image is None:
            return None
        result.add((comp, image))
    return result


def shared_related(
    ren: Renaming,
    m1: Memory,
    shared1: frozenset[BlockId],
    m2: Memory,
    shared2: frozenset[BlockId],
) -> bool:
    """The shared sets correspond under the renaming and so do their contents."""
    if _image(ren, shared1) != set(shared2):
        return False
    return mem_related(ren, m1, m2, shared1)


# Traces


def _passed(event) -> Value:
    if isinstance(event, (CallEvent, DfCall)):
        return event.arg
    return event.val


def _interaction(trace: Trace) -> Trace:
    if all(isinstance(e, (CallEvent, RetEvent)) for e in trace):
        return trace
    return remove_df(trace)


def trace_related(ren: Renaming, t1: Trace, t2: Trace) -> bool:
    """
    Relates two interaction traces event by event.

    Data-flow traces are projected to their interaction events first. Both
    traces must have the same length; at every position the events match,
    the passed values relate, and the shared memories after the event
    relate.
    """
    t1 = _interaction(t1)
    t2 = _interaction(t2)
    if len(t1) != len(t2):
        logger.debug("traces differ in length: %s vs %s", len(t1), len(t2))
        return False
    for i, (e1, e2) in enumerate(zip(t1, t2)):
        if not match_events(e1, e2):
            logger.debug("event %s does not match", i)
            return False
        if not valren(ren, _passed(e1), _passed(e2)):
            logger.debug("event %s passes unrelated values", i)
            return False
        if not shared_related(ren, e1.mem, t1.shared[i], e2.mem, t2.shared[i]):
            logger.debug("event %s has unrelated shared memory", i)
            return False
    return True


def shift_candidates(bound: int) -> list[int]:
    """0, 1, −1, 2, −2, ... up to the bound."""
    result = [0]
    for k in range(1, bound + 1):
        result.extend((k, -k))
    return result


def find_shift(t1: Trace, t2: Trace, bound: int) -> Renaming | None:
    """The constant shift of smallest magnitude relating t1 to t2, if any."""
    for k in shift_candidates(bound):
        ren = IDENTITY if k == 0 else Shift(k)
        if trace_related(ren, t1, t2):
            return ren
    return None


def find_sided(t1: Trace, t2: Trace, part: Iterable[int], bound: int) -> Renaming | None:
    """Searches program-side and context-side shifts independently."""
    part = frozenset(part)
    for a in shift_candidates(bound):
        for b in shift_candidates(bound):
            ren = Sided(part, a, b)
            if trace_related(ren, t1, t2):
                return ren
    return None


# Recomposition relations


@dataclass(frozen=True)
class RelParams:
    """
    Arguments shared by the ternary memory relations.

    Attributes:
        part (frozenset[int]): Program side, retained from the first run.
        context (frozenset[int]): Context side, retained from the second run.
        ren1 (Renaming): Maps blocks of the first run to the recomposed run.
        ren2 (Renaming): Maps blocks of the second run to the recomposed run.
        t12, t1, t2 (Trace): Interaction prefixes emitted so far.
    """

    part: frozenset[int]
    context: frozenset[int]
    ren1: Renaming = IDENTITY
    ren2: Renaming = IDENTITY
    t12: Trace = field(default_factory=Trace)
    t1: Trace = field(default_factory=Trace)
    t2: Trace = field(default_factory=Trace)

    def __post_init__(self):
        if self.part & self.context:
            raise ValueError("program and context sides overlap")

    def swap(self) -> RelParams:
        return RelParams(
            self.context, self.part, self.ren2, self.ren1, self.t12, self.t2, self.t1
        )

    def extend(self, e12, e1, e2) -> RelParams:
        return replace(
            self, t12=self.t12.append(e12), t1=self.t1.append(e1), t2=self.t2.append(e2)
        )


def _proj(mem: Memory, comps: frozenset[int]) -> Memory:
    return filter_blocks(mem, lambda c, b: c in comps)


def _private(mem: Memory, comps: frozenset[int], shared: frozenset[BlockId]) -> Memory:
    return filter_blocks(mem, lambda c, b: c in comps and (c, b) not in shared)


def mem_rel_exec(
    ren: Renaming,
    part: frozenset[int],
    t_base: Trace,
    t_rec: Trace,
    m_base: Memory,
    m_rec: Memory,
) -> bool:
    """All memory of `part` relates, and so does the whole shared memory."""
    if not blocks_related(ren, _proj(m_base, part), _proj(m_rec, part)):
        return False
    return shared_related(
        ren, m_base, shared_blocks(t_base), m_rec, shared_blocks(t_rec)
    )


def mem_rel_not_exec(
    ren: Renaming,
    part: frozenset[int],
    t_base: Trace,
    t_rec: Trace,
    m_base: Memory,
    m_rec: Memory,
) -> bool:
    """Only the private memory of `part` relates."""
    return blocks_related(
        ren,
        _private(m_base, part, shared_blocks(t_base)),
        _private(m_rec, part, shared_blocks(t_rec)),
    )


def mem_rel_tt(params: RelParams, s12, s1, s2) -> bool:
    """
    The turn-taking memory relation.

    The side executing in the recomposed state relates all of its memory and
    the shared memory; the other side relates only its private memory.
    """
    p = params
    if s12.component in p.part:
        return mem_rel_exec(
            p.ren1, p.part, p.t1, p.t12, s1.mem, s12.mem
        ) and mem_rel_not_exec(p.ren2, p.context, p.t2, p.t12, s2.mem, s12.mem)
    return mem_rel_exec(
        p.ren2, p.context, p.t2, p.t12, s2.mem, s12.mem
    ) and mem_rel_not_exec(p.ren1, p.part, p.t1, p.t12, s1.mem, s12.mem)


def mem_rel_border(params: RelParams, s12, s1, s2) -> bool:
    p = params
    return mem_rel_exec(
        p.ren1, p.part, p.t1, p.t12, s1.mem, s12.mem
    ) and mem_rel_exec(p.ren2, p.context, p.t2, p.t12, s2.mem, s12.mem)


def mem_rel_naive(params: RelParams, s12, s1, s2) -> bool:
    """The recomposed memory is the disjoint union of the retained projections."""
    p = params
    return blocks_related(
        p.ren1, _proj(s1.mem, p.part), _proj(s12.mem, p.part)
    ) and blocks_related(p.ren2, _proj(s2.mem, p.context), _proj(s12.mem, p.context))


def mem_rel_pc(params: RelParams, s12, s1, s2) -> bool:
    """Relates only the memory of the side currently executing."""
    p = params
    if s12.component in p.part:
        return blocks_related(p.ren1, _proj(s1.mem, p.part), _proj(s12.mem, p.part))
    return blocks_related(p.ren2, _proj(s2.mem, p.context), _proj(s12.mem, p.context))


def rel_symmetry_check(params: RelParams, s12, s1, s2) -> bool:
    return mem_rel_tt(params, s12, s1, s2) == mem_rel_tt(params.swap(), s12, s2, s1)


def state_rel_tt(params: RelParams, s12, s1, s2, at_border: bool = False) -> bool:
    """
    Non-memory part of the ternary state relation, plus mem_rel_tt.

    The three states execute on the same side with the same cross-component
    stack depth, the retained partner of the recomposed state sits at the
    same pc, and at borders the r_COM registers relate.
    """
    p = params
    sides = [s.component in p.part for s in (s12, s1, s2)]
    if len(set(sides)) != 1:
        return False
    if len({s12.stack_depth, s1.stack_depth, s2.stack_depth}) != 1:
        return False
    partner = s1 if sides[0] else s2
    if getattr(partner, "pc", None) != getattr(s12, "pc", None):
        return False
    if at_border:
        com = Register.COM
        if not valren(p.ren1, s1.reg[com], s12.reg[com]):
            return False
        if not valren(p.ren2, s2.reg[com], s12.reg[com]):
            return False
    return mem_rel_tt(params, s12, s1, s2)
