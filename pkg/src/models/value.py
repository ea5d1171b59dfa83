"""JSON models for values, register files and memories."""

from __future__ import annotations

from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator

from memory import (
    ERROR,
    Block,
    ComponentMemory,
    ErrorValue,
    Int,
    Memory,
    Permission,
    Pointer,
    Ptr,
    Value,
)
from registers import Register, RegisterFile


class IntValue(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    value: int = Field(alias="int")


class PtrValue(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ptr: tuple[str, int, int, int]

    @field_validator("ptr")
    @classmethod
    def validate_ptr(cls, v: tuple[str, int, int, int]) -> tuple[str, int, int, int]:
        if v[0] not in ("data", "code"):
            raise ValueError(f"invalid permission {v[0]!r}")
        return v


ValueModel = Union[IntValue, PtrValue, Literal["error"]]


def value_to_model(v: Value) -> ValueModel:
    match v:
        case Int(i):
            return IntValue(value=i)
        case Ptr(p):
            return PtrValue(ptr=(p.perm.value, p.comp, p.block, p.offset))
        case ErrorValue():
            return "error"
    raise TypeError(f"not a value: {v!r}")


def model_to_value(m: ValueModel) -> Value:
    if isinstance(m, IntValue):
        return Int(m.value)
    if isinstance(m, PtrValue):
        perm, comp, block, offset = m.ptr
        return Ptr(Pointer(Permission(perm), comp, block, offset))
    return ERROR


def registers_to_model(reg: RegisterFile) -> list[ValueModel]:
    return [value_to_model(v) for v in reg]


def model_to_registers(values: list[ValueModel]) -> RegisterFile:
    if len(values) != len(Register):
        raise ValueError(f"a register file has {len(Register)} registers, got {len(values)}")
    return tuple(model_to_value(v) for v in values)


class ComponentMemoryModel(BaseModel):
    next_dynamic: int = 1
    blocks: dict[int, list[ValueModel]] = Field(default_factory=dict)

    @field_validator("next_dynamic")
    @classmethod
    def validate_next_dynamic(cls, v: int) -> int:
        if v < 1:
            raise ValueError("dynamic block ids start at 1")
        return v


class MemoryModel(BaseModel):
    """
    A memory as `{comp: {"next_dynamic": n, "blocks": {block: [values]}}}`.
    """

    comps: dict[int, ComponentMemoryModel] = Field(default_factory=dict)

    @classmethod
    def from_memory(cls, mem: Memory) -> MemoryModel:
        return cls(
            comps={
                c: ComponentMemoryModel(
                    next_dynamic=cmem.next_dynamic,
                    blocks={
                        b: [value_to_model(v) for v in block.cells()]
                        for b, block in cmem.blocks.items()
                    },
                )
                for c, cmem in mem.comps.items()
            }
        )

    def to_memory(self) -> Memory:
        return Memory(
            {
                c: ComponentMemory(
                    {
                        b: Block.of(model_to_value(v) for v in cells)
                        for b, cells in cmem.blocks.items()
                    },
                    cmem.next_dynamic,
                )
                for c, cmem in self.comps.items()
            }
        )


_VALUE_ADAPTER = TypeAdapter(ValueModel)


def value_to_json(v: Value) -> Any:
    return _VALUE_ADAPTER.dump_python(value_to_model(v), by_alias=True)


def value_from_json(obj: Any) -> Value:
    return model_to_value(_VALUE_ADAPTER.validate_python(obj))
