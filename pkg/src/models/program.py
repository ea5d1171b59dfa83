"""JSON program files for both languages."""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path
from typing import Any, Literal, Union

from pydantic import BaseModel, Field, field_validator

from asm import format_instr, parse_asm, parse_instr
from interface import ComponentInterface, Interface
from memory import BinaryOperator
from models.value import (
    ValueModel,
    model_to_value,
    value_from_json,
    value_to_json,
    value_to_model,
)
from source_lang import (
    Alloc,
    Arg,
    Assign,
    BinOp,
    Call,
    CallPtr,
    Deref,
    Exit,
    Expr,
    FunPtr,
    If,
    Local,
    Seq,
    SourceProgram,
    Val,
)
from target_lang import MachProgram

logger = logging.getLogger(__name__)

_PROC_KEY = re.compile(r"^-?\d+\.[^.\s]+$")


# Expressions


def expr_to_json(e: Expr) -> Any:
    """Encodes an expression as a tagged tree."""
    match e:
        case Val(v):
            return {"val": value_to_json(v)}
        case Arg():
            return "arg"
        case Local():
            return "local"
        case Exit():
            return "exit"
        case BinOp(op, e1, e2):
            return {"binop": [op.value, expr_to_json(e1), expr_to_json(e2)]}
        case Seq(e1, e2):
            return {"seq": [expr_to_json(e1), expr_to_json(e2)]}
        case If(cond, then, orelse):
            return {"if": [expr_to_json(cond), expr_to_json(then), expr_to_json(orelse)]}
        case Alloc(size):
            return {"alloc": expr_to_json(size)}
        case Deref(addr):
            return {"deref": expr_to_json(addr)}
        case Assign(addr, value):
            return {"assign": [expr_to_json(addr), expr_to_json(value)]}
        case Call(comp, proc, arg):
            return {"call": [comp, proc, expr_to_json(arg)]}
        case CallPtr(fn, arg):
            return {"callptr": [expr_to_json(fn), expr_to_json(arg)]}
        case FunPtr(proc):
            return {"funptr": proc}
    raise TypeError(f"not an expression: {e!r}")


def expr_from_json(obj: Any) -> Expr:
    """
    Decodes a tagged expression tree.

    Raises:
        ValueError: On an unknown tag or malformed node.
    """
    if isinstance(obj, str):
        leaves = {"arg": Arg(), "local": Local(), "exit": Exit()}
        if obj not in leaves:
            raise ValueError(f"unknown expression {obj!r}")
        return leaves[obj]
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"expression nodes are single-key objects, got {obj!r}")
    (tag, body), = obj.items()
    try:
        match tag:
            case "val":
                return Val(value_from_json(body))
            case "binop":
                op, e1, e2 = body
                return BinOp(BinaryOperator(op), expr_from_json(e1), expr_from_json(e2))
            case "seq":
                e1, e2 = body
                return Seq(expr_from_json(e1), expr_from_json(e2))
            case "if":
                c, t, f = body
                return If(expr_from_json(c), expr_from_json(t), expr_from_json(f))
            case "alloc":
                return Alloc(expr_from_json(body))
            case "deref":
                return Deref(expr_from_json(body))
            case "assign":
                addr, value = body
                return Assign(expr_from_json(addr), expr_from_json(value))
            case "call":
                comp, proc, arg = body
                return Call(int(comp), str(proc), expr_from_json(arg))
            case "callptr":
                fn, arg = body
                return CallPtr(expr_from_json(fn), expr_from_json(arg))
            case "funptr":
                return FunPtr(str(body))
    except (TypeError, ValueError) as e:
        raise ValueError(f"malformed {tag} node: {e}") from e
    raise ValueError(f"unknown expression tag {tag!r}")


# Files


class InterfaceModel(BaseModel):
    name: str = ""
    exports: list[str] = Field(default_factory=list)
    imports: list[str] = Field(default_factory=list)

    @field_validator("imports")
    @classmethod
    def validate_imports(cls, v: list[str]) -> list[str]:
        for item in v:
            if not _PROC_KEY.match(item):
                raise ValueError(f"imports are written component.procedure, got {item!r}")
        return v

    def to_core(self) -> ComponentInterface:
        imports = []
        for item in self.imports:
            comp, _, proc = item.partition(".")
            imports.append((int(comp), proc))
        return ComponentInterface(tuple(self.exports), tuple(imports), self.name)

    @classmethod
    def from_core(cls, cintf: ComponentInterface) -> InterfaceModel:
        return cls(
            name=cintf.name,
            exports=list(cintf.exports),
            imports=[f"{c}.{p}" for c, p in cintf.imports],
        )


def _check_proc_keys(v: dict) -> dict:
    for key in v:
        if not _PROC_KEY.match(key):
            raise ValueError(f"procedures are keyed component.name, got {key!r}")
    return v


def _split_key(key: str) -> tuple[int, str]:
    comp, _, proc = key.partition(".")
    return int(comp), proc


class SourceProgramFile(BaseModel):
    language: Literal["source"] = "source"
    intf: dict[int, InterfaceModel]
    procs: dict[str, Any]
    buffers: dict[int, list[ValueModel]] = Field(default_factory=dict)

    @field_validator("procs")
    @classmethod
    def validate_procs(cls, v: dict) -> dict:
        return _check_proc_keys(v)

    def to_program(self) -> SourceProgram:
        return SourceProgram(
            Interface({c: m.to_core() for c, m in self.intf.items()}),
            {_split_key(k): expr_from_json(e) for k, e in self.procs.items()},
            {c: tuple(model_to_value(v) for v in cells) for c, cells in self.buffers.items()},
        )

    @classmethod
    def from_program(cls, program: SourceProgram) -> SourceProgramFile:
        return cls(
            intf={c: InterfaceModel.from_core(program.intf[c]) for c in program.intf},
            procs={f"{c}.{p}": expr_to_json(e) for (c, p), e in sorted(program.procs.items())},
            buffers={
                c: [value_to_model(v) for v in cells] for c, cells in program.buffers.items()
            },
        )


class MachProgramFile(BaseModel):
    """Machine programs keep their instructions in assembly syntax."""

    language: Literal["mach"] = "mach"
    intf: dict[int, InterfaceModel]
    procs: dict[str, list[str]]
    buffers: dict[int, list[ValueModel]] = Field(default_factory=dict)
    runtime: dict[int, int] = Field(default_factory=dict)

    @field_validator("procs")
    @classmethod
    def validate_procs(cls, v: dict) -> dict:
        return _check_proc_keys(v)

    @field_validator("runtime")
    @classmethod
    def validate_runtime(cls, v: dict[int, int]) -> dict[int, int]:
        for comp, size in v.items():
            if size < 2:
                raise ValueError(f"runtime block of component {comp} is too small")
        return v

    def to_program(self) -> MachProgram:
        return MachProgram(
            Interface({c: m.to_core() for c, m in self.intf.items()}),
            {
                _split_key(k): tuple(parse_instr(line) for line in code)
                for k, code in self.procs.items()
            },
            {c: tuple(model_to_value(v) for v in cells) for c, cells in self.buffers.items()},
            dict(self.runtime),
        )

    @classmethod
    def from_program(cls, program: MachProgram) -> MachProgramFile:
        return cls(
            intf={c: InterfaceModel.from_core(program.intf[c]) for c in program.intf},
            procs={
                f"{c}.{p}": [format_instr(i) for i in code]
                for (c, p), code in sorted(program.procs.items())
            },
            buffers={
                c: [value_to_model(v) for v in cells] for c, cells in program.buffers.items()
            },
            runtime=dict(program.runtime),
        )


ProgramFile = Union[SourceProgramFile, MachProgramFile]
Program = Union[SourceProgram, MachProgram]


def dump_program(program: Program) -> str:
    if isinstance(program, MachProgram):
        model: ProgramFile = MachProgramFile.from_program(program)
    else:
        model = SourceProgramFile.from_program(program)
    return model.model_dump_json(by_alias=True, indent=1)


def parse_program(text: str) -> Program:
    """
    Parses a JSON program file of either language.

    Raises:
        ValueError: On malformed JSON or a program failing validation.
    """
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("a program file holds a JSON object")
    if data.get("language", "source") == "mach":
        return MachProgramFile.model_validate(data).to_program()
    return SourceProgramFile.model_validate(data).to_program()


def load_program(path: str | Path, fmt: str | None = None) -> Program:
    """Reads a program file; `.asm` files (or fmt="asm") are Mach assembly."""
    path = Path(path)
    text = path.read_text()
    if fmt == "asm" or (fmt is None and path.suffix == ".asm"):
        return parse_asm(text)
    logger.debug("loading program %s", path)
    return parse_program(text)
