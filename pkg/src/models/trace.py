"""JSON trace files.

Events refer to their memory snapshot by index into a shared `memories`
list, so consecutive events holding the same memory store it once. With
memory elision every event gets an empty memory.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, field_validator, model_validator

from memory import EMPTY_MEMORY, BinaryOperator, Memory
from models.value import (
    MemoryModel,
    ValueModel,
    model_to_registers,
    model_to_value,
    registers_to_model,
    value_to_model,
)
from registers import Register
from traces import (
    EVENT_KINDS,
    CallEvent,
    DfAlloc,
    DfBinOp,
    DfCall,
    DfConst,
    DfLoad,
    DfMov,
    DfRet,
    DfStore,
    Event,
    RetEvent,
    Trace,
)

_KIND_TYPES = {name: cls for cls, name in EVENT_KINDS.items()}

_REQUIRED = {
    "Call": ("caller", "callee", "proc", "arg"),
    "Ret": ("prev", "next", "val"),
    "dfCall": ("reg", "caller", "callee", "proc", "arg"),
    "dfRet": ("reg", "prev", "next", "val"),
    "Const": ("reg", "cur", "value", "rd"),
    "Mov": ("reg", "cur", "rs", "rd"),
    "BinOp": ("reg", "cur", "op", "r1", "r2", "rd"),
    "Load": ("reg", "cur", "rp", "rd"),
    "Store": ("reg", "cur", "rp", "rs"),
    "Alloc": ("reg", "cur", "rp", "rsize"),
}

_REGISTER_FIELDS = ("rd", "rs", "rp", "rsize", "r1", "r2")


class EventModel(BaseModel):
    kind: str
    mem: int | None = None
    reg: list[ValueModel] | None = None
    caller: int | None = None
    callee: int | None = None
    proc: str | None = None
    arg: ValueModel | None = None
    prev: int | None = None
    next: int | None = None
    val: ValueModel | None = None
    cur: int | None = None
    value: ValueModel | None = None
    op: str | None = None
    rd: str | None = None
    rs: str | None = None
    rp: str | None = None
    rsize: str | None = None
    r1: str | None = None
    r2: str | None = None

    @field_validator("kind")
    @classmethod
    def validate_kind(cls, v: str) -> str:
        if v not in _KIND_TYPES:
            raise ValueError(f"unknown event kind {v!r}")
        return v

    @field_validator(*_REGISTER_FIELDS)
    @classmethod
    def validate_register(cls, v: str | None) -> str | None:
        if v is not None:
            Register.parse(v)
        return v

    @model_validator(mode="after")
    def validate_fields(self) -> EventModel:
        missing = [f for f in _REQUIRED[self.kind] if getattr(self, f) is None]
        if missing:
            raise ValueError(f"{self.kind} event lacks {', '.join(missing)}")
        return self

    def to_event(self, memories: list[Memory]) -> Event:
        mem = EMPTY_MEMORY if self.mem is None else memories[self.mem]
        fields: dict[str, Any] = {"mem": mem}
        for name in _REQUIRED[self.kind]:
            raw = getattr(self, name)
            if name == "reg":
                fields[name] = model_to_registers(raw)
            elif name in ("arg", "val", "value"):
                fields[name] = model_to_value(raw)
            elif name in _REGISTER_FIELDS:
                fields[name] = Register.parse(raw)
            elif name == "op":
                fields[name] = BinaryOperator(raw)
            else:
                fields[name] = raw
        return _KIND_TYPES[self.kind](**fields)

    @classmethod
    def from_event(cls, event: Event, mem: int | None) -> EventModel:
        kind = EVENT_KINDS[type(event)]
        data: dict[str, Any] = {"kind": kind, "mem": mem}
        for name in _REQUIRED[kind]:
            raw = getattr(event, name)
            if name == "reg":
                data[name] = registers_to_model(raw)
            elif name in ("arg", "val", "value"):
                data[name] = value_to_model(raw)
            elif name in _REGISTER_FIELDS:
                data[name] = raw.label
            elif name == "op":
                data[name] = raw.value
            else:
                data[name] = raw
        return cls(**data)


class TraceFile(BaseModel):
    events: list[EventModel] = Field(default_factory=list)
    memories: list[MemoryModel] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_memory_refs(self) -> TraceFile:
        for i, event in enumerate(self.events):
            if event.mem is not None and not 0 <= event.mem < len(self.memories):
                raise ValueError(f"event {i} refers to unknown memory {event.mem}")
        return self

    def to_trace(self) -> Trace:
        memories = [m.to_memory() for m in self.memories]
        return Trace(tuple(e.to_event(memories) for e in self.events))

    @classmethod
    def from_trace(cls, trace: Trace, elide_memory: bool = False) -> TraceFile:
        memories: list[MemoryModel] = []
        index: dict[int, int] = {}
        events = []
        for event in trace:
            ref = None
            if not elide_memory:
                key = id(event.mem)
                if key not in index:
                    index[key] = len(memories)
                    memories.append(MemoryModel.from_memory(event.mem))
                ref = index[key]
            events.append(EventModel.from_event(event, ref))
        return cls(events=events, memories=memories)


def dump_trace(trace: Trace, elide_memory: bool = False) -> str:
    return TraceFile.from_trace(trace, elide_memory).model_dump_json(
        by_alias=True, exclude_none=True, indent=1
    )


def parse_trace(text: str) -> Trace:
    return TraceFile.model_validate(json.loads(text)).to_trace()


def load_trace(path: str | Path) -> Trace:
    return parse_trace(Path(path).read_text())
