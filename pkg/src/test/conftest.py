import pytest

from interface import MAIN_PROC, ComponentInterface, Interface
from memory import BinaryOperator, Int
from source_lang import (
    ARG,
    LOCAL,
    Alloc,
    Assign,
    BinOp,
    Call,
    Deref,
    SourceProgram,
    Val,
    seq_all,
)

NET_SIZE = 8
STACK_SIZE = 64


@pytest.fixture
def double_program():
    """main stores 5, passes it to 1.double and returns the result."""
    intf = Interface(
        {
            0: ComponentInterface((MAIN_PROC,), ((1, "double"),), "Main"),
            1: ComponentInterface(("double",), (), "Lib"),
        }
    )
    procs = {
        (0, MAIN_PROC): seq_all(
            [Assign(LOCAL, Val(Int(5))), Call(1, "double", Deref(LOCAL))]
        ),
        (1, "double"): BinOp(BinaryOperator.ADD, ARG, ARG),
    }
    yield SourceProgram(intf, procs, {0: (Int(0),), 1: (Int(0),)})


@pytest.fixture
def sharing_program():
    """main allocates a block, shares it with 1.bump which increments its cell."""
    intf = Interface(
        {
            0: ComponentInterface((MAIN_PROC,), ((1, "bump"),), "Main"),
            1: ComponentInterface(("bump",), (), "Lib"),
        }
    )
    procs = {
        (0, MAIN_PROC): seq_all(
            [
                Assign(LOCAL, Alloc(Val(Int(2)))),
                Assign(Deref(LOCAL), Val(Int(1))),
                Call(1, "bump", Deref(LOCAL)),
                Deref(Deref(LOCAL)),
            ]
        ),
        (1, "bump"): Assign(ARG, BinOp(BinaryOperator.ADD, Deref(ARG), Val(Int(1)))),
    }
    yield SourceProgram(intf, procs, {0: (Int(0),), 1: (Int(0),)})
