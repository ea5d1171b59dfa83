import pytest

from interface import MAIN_PROC, ComponentInterface, Interface, procedure_id, procedure_table
from memory import ERROR, Int
from registers import INITIAL_REGISTERS, Register, invalidate, write


@pytest.fixture
def intf():
    yield Interface(
        {
            0: ComponentInterface((MAIN_PROC,), ((1, "receive"),), "Main"),
            1: ComponentInterface(("receive", "init_network"), (), "Net"),
        }
    )


def test_resolve_names(intf):
    assert intf.resolve("Net") == 1
    assert intf.resolve("0") == 0
    assert intf.resolve(1) == 1
    assert intf.display(1) == "Net"
    with pytest.raises(ValueError):
        intf.resolve("Bank")


def test_exports_are_sorted(intf):
    assert intf[1].exports == ("init_network", "receive")


def test_violations(intf):
    procs = {0: (MAIN_PROC,), 1: ("receive", "init_network")}
    assert intf.violations(procs) == []
    assert intf.violations({0: (MAIN_PROC,), 1: ("receive",)}) != []
    lonely = intf.restrict({0})
    assert lonely.violations({0: (MAIN_PROC,)}, partial=True) == []
    assert lonely.violations({0: (MAIN_PROC,)}) != []
    with pytest.raises(ValueError):
        intf.merge(lonely)


def test_procedure_ids():
    table = procedure_table([(0, "main"), (0, "fill"), (1, "receive")])
    assert table == {0: ("fill", "main"), 1: ("receive",)}
    assert procedure_id(table, 0, "main") == 1


def test_registers():
    assert Register.parse("r_aux1") is Register.AUX1
    assert Register.parse("SP") is Register.SP
    assert Register.COM.label == "r_COM"
    with pytest.raises(ValueError):
        Register.parse("r_PC")
    reg = write(INITIAL_REGISTERS, Register.ARG, Int(3))
    assert reg[Register.ARG] == Int(3)
    assert invalidate(write(reg, Register.COM, Int(9))) == (Int(9),) + (ERROR,) * 6
