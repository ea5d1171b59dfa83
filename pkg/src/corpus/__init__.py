"""Shipped example programs: the Net/Main banking example and the
turn-taking recomposition example."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import config
from asm import parse_asm, print_asm
from compiler import compile_program
from interface import MAIN_PROC, ComponentInterface, Interface
from memory import BinaryOperator, Int
from models.program import dump_program
from source_lang import (
    ARG,
    LOCAL,
    Alloc,
    Assign,
    BinOp,
    Call,
    Deref,
    If,
    Seq,
    SourceProgram,
    Val,
    local_plus,
    seq_all,
)
from target_lang import MachProgram
from traces import NowriteProperty

logger = logging.getLogger(__name__)

MAIN = 0
NET = 1
NET_KINDS = ("benign", "filling", "overflowing")


# Net example


def net_main(size: int | None = None) -> SourceProgram:
    """
    Main: a static buffer holding the iobuffer followed by the user balance.

    main() hands the whole buffer to Net.init_network, then calls Net.receive.
    """
    size = config.NET_IOBUFFER_SIZE if size is None else size
    intf = Interface(
        {
            MAIN: ComponentInterface(
                (MAIN_PROC,), ((NET, "init_network"), (NET, "receive")), "Main"
            )
        }
    )
    body = Seq(Call(NET, "init_network", LOCAL), Call(NET, "receive", Val(Int(0))))
    buffer = (Int(0),) * size + (Int(100),)
    return SourceProgram(intf, {(MAIN, MAIN_PROC): body}, {MAIN: buffer})


def balance_location(size: int | None = None) -> tuple[int, int, int]:
    size = config.NET_IOBUFFER_SIZE if size is None else size
    return MAIN, 0, size


def net_safety(size: int | None = None) -> NowriteProperty:
    return NowriteProperty(balance_location(size), MAIN, NET, "receive")


_NET_HEADER = """\
.component 1 Net
.exports init_network receive
.buffer 0
"""

_BENIGN = """\
.proc init_network
    Const 0 -> r_COM
    Return
.proc receive
    Const 0 -> r_COM
    Return
"""

_STASHING = """\
.proc init_network
    Const ptr(data,1,0,0) -> r_AUX1
    Store *r_AUX1 <- r_COM
    Const 0 -> r_COM
    Return
.proc receive
    Const ptr(data,1,0,0) -> r_AUX1
    Load *r_AUX1 -> r_AUX1
    Const {count} -> r_AUX2
loop:
    Const 4 -> r_R1
    Store *r_AUX1 <- r_R1
    Const 1 -> r_R1
    BinOp r_AUX1 + r_R1 -> r_AUX1
    BinOp r_AUX2 - r_R1 -> r_AUX2
    Bnz r_AUX2 loop
    Const 0 -> r_COM
    Return
"""


def net_context_asm(kind: str, size: int | None = None) -> str:
    """
    Assembly of a Net context.

    benign returns without writing. filling stashes the pointer received by
    init_network and receive writes 4 to the whole iobuffer; overflowing
    writes one more word, which is the balance.
    """
    size = config.NET_IOBUFFER_SIZE if size is None else size
    match kind:
        case "benign":
            return _NET_HEADER + _BENIGN
        case "filling":
            return _NET_HEADER + _STASHING.format(count=size)
        case "overflowing":
            return _NET_HEADER + _STASHING.format(count=size + 1)
    raise ValueError(f"unknown Net context {kind!r}, expected one of {NET_KINDS}")


def net_context(kind: str, size: int | None = None) -> MachProgram:
    return parse_asm(net_context_asm(kind, size))


def net_library(kind: str, size: int | None = None) -> SourceProgram:
    """Source Net components with the same behaviours as the Mach contexts."""
    size = config.NET_IOBUFFER_SIZE if size is None else size
    if kind not in NET_KINDS:
        raise ValueError(f"unknown Net library {kind!r}, expected one of {NET_KINDS}")
    count = size if kind == "filling" else size + 1
    zero = Val(Int(0))
    if kind == "benign":
        procs = {(NET, "init_network"): zero, (NET, "receive"): zero}
    else:
        offset = BinOp(BinaryOperator.SUB, Val(Int(count)), ARG)
        fill = If(
            BinOp(BinaryOperator.LEQ, ARG, zero),
            zero,
            Seq(
                Assign(BinOp(BinaryOperator.ADD, Deref(LOCAL), offset), Val(Int(4))),
                Call(NET, "fill", BinOp(BinaryOperator.SUB, ARG, Val(Int(1)))),
            ),
        )
        procs = {
            (NET, "init_network"): Seq(Assign(LOCAL, ARG), zero),
            (NET, "receive"): Call(NET, "fill", Val(Int(count))),
            (NET, "fill"): fill,
        }
    intf = Interface(
        {NET: ComponentInterface(("init_network", "receive"), (), "Net")}
    )
    return SourceProgram(intf, procs, {NET: (Int(0),)})


# Turn-taking example

P = 0
C = 1


@dataclass(frozen=True)
class TurnTakingExample:
    """
    A program part and two contexts whose recomposition needs turn-taking.

    p1 keeps a private block and shares another one with C.store. c1 writes
    42 into the shared block and restores the old value before returning;
    c2 only stashes the pointer. Both contexts produce the same trace.
    """

    p1: SourceProgram
    c1: SourceProgram
    c2: SourceProgram

    def compiled(
        self, stack_size: int | None = None
    ) -> tuple[MachProgram, MachProgram, MachProgram]:
        return (
            compile_program(self.p1, stack_size),
            compile_program(self.c1, stack_size),
            compile_program(self.c2, stack_size),
        )


def turn_taking_example() -> TurnTakingExample:
    p_intf = Interface({P: ComponentInterface((MAIN_PROC,), ((C, "store"),), "P")})
    main = seq_all(
        [
            Assign(LOCAL, Alloc(Val(Int(1)))),
            Assign(Deref(LOCAL), Val(Int(5))),
            Assign(local_plus(1), Alloc(Val(Int(1)))),
            Assign(Deref(local_plus(1)), Val(Int(7))),
            Call(C, "store", Deref(local_plus(1))),
        ]
    )
    p1 = SourceProgram(p_intf, {(P, MAIN_PROC): main}, {P: (Int(0), Int(0))})
    c_intf = Interface({C: ComponentInterface(("store",), (), "C")})
    temporary = seq_all(
        [
            Assign(LOCAL, ARG),
            Assign(local_plus(1), Deref(ARG)),
            Assign(ARG, Val(Int(42))),
            Assign(ARG, Deref(local_plus(1))),
            Val(Int(0)),
        ]
    )
    stash = Seq(Assign(LOCAL, ARG), Val(Int(0)))
    buffer = {C: (Int(0), Int(0))}
    c1 = SourceProgram(c_intf, {(C, "store"): temporary}, buffer)
    c2 = SourceProgram(c_intf, {(C, "store"): stash}, buffer)
    return TurnTakingExample(p1, c1, c2)


def export_corpus(directory: str | Path, size: int | None = None) -> list[Path]:
    """
    Writes the corpus as program files the CLI reads.

    Returns:
        list[Path]: The files written.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def write(name: str, text: str) -> None:
        path = out / name
        path.write_text(text)
        written.append(path)

    write("net_main.src.json", dump_program(net_main(size)))
    for kind in NET_KINDS:
        write(f"net_{kind}.asm", net_context_asm(kind, size))
        write(f"net_{kind}.src.json", dump_program(net_library(kind, size)))
    example = turn_taking_example()
    for name in ("p1", "c1", "c2"):
        part = getattr(example, name)
        write(f"turn_taking_{name}.src.json", dump_program(part))
        write(f"turn_taking_{name}.asm", print_asm(compile_program(part)))
    logger.info("exported %s corpus files to %s", len(written), out)
    return written
