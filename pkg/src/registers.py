from __future__ import annotations

import enum

from memory import ERROR, Int, Value


class Register(enum.IntEnum):
    COM = 0
    R1 = 1
    AUX1 = 2
    AUX2 = 3
    SP = 4
    RA = 5
    ARG = 6

    @property
    def label(self) -> str:
        return "r_" + self.name

    @classmethod
    def parse(cls, text: str) -> Register:
        name = text.strip()
        if name.lower().startswith("r_"):
            name = name[2:]
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown register {text!r}") from None


RegisterFile = tuple[Value, ...]

INITIAL_REGISTERS: RegisterFile = (Int(0),) + (ERROR,) * (len(Register) - 1)


def write(reg: RegisterFile, r: Register, v: Value) -> RegisterFile:
    return reg[:r] + (v,) + reg[r + 1 :]


def invalidate(reg: RegisterFile) -> RegisterFile:
    """Keeps r_COM and resets every other register to Error."""
    return (reg[Register.COM],) + (ERROR,) * (len(Register) - 1)
