"""Textual Mach assembly.

    .component 1 Net
    .exports init_network receive
    .imports 0.log
    .buffer 0 0 0
    .runtime 4096
    .proc receive
    loop:
        Const 4 -> r_COM
        Store *r_AUX1 <- r_COM
        Bnz r_COM loop
        Return
"""

from __future__ import annotations

import logging
import re

from interface import ComponentInterface, Interface
from memory import ERROR, BinaryOperator, Int, Permission, Pointer, Ptr, Value
from registers import Register
from target_lang import (
    Alloc,
    BinOp,
    Bnz,
    Call,
    Const,
    Halt,
    Instr,
    Jal,
    Jump,
    JumpFunPtr,
    Label,
    Load,
    MachProgram,
    Mov,
    Nop,
    PtrOfLabel,
    Return,
    Store,
)

logger = logging.getLogger(__name__)


class AsmSyntaxError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


_PTR = re.compile(r"^ptr\(\s*(data|code)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\)$")
_OPS = {op.value: op for op in BinaryOperator}
_INSTR = [
    (re.compile(r"^Const\s+(.+?)\s*->\s*(\S+)$"), "const"),
    (re.compile(r"^Mov\s+(\S+)\s*->\s*(\S+)$"), "mov"),
    (re.compile(r"^BinOp\s+(\S+)\s+(\+|-|\*|=|<=)\s+(\S+)\s*->\s*(\S+)$"), "binop"),
    (re.compile(r"^Label\s+(\S+)$"), "label"),
    (re.compile(r"^(\S+):$"), "label"),
    (re.compile(r"^PtrOfLabel\s+(\S+)\s*->\s*(\S+)$"), "ptroflabel"),
    (re.compile(r"^Load\s+\*(\S+)\s*->\s*(\S+)$"), "load"),
    (re.compile(r"^Store\s+\*(\S+)\s*<-\s*(\S+)$"), "store"),
    (re.compile(r"^Alloc\s+(\S+)\s+(\S+)$"), "alloc"),
    (re.compile(r"^Bnz\s+(\S+)\s+(\S+)$"), "bnz"),
    (re.compile(r"^Jump\s+(\S+)$"), "jump"),
    (re.compile(r"^JumpFunPtr\s+(\S+)$"), "jumpfunptr"),
    (re.compile(r"^Jal\s+(\S+)$"), "jal"),
    (re.compile(r"^Call\s+(-?\d+)\.(\S+)$"), "call"),
    (re.compile(r"^Return$"), "return"),
    (re.compile(r"^Nop$"), "nop"),
    (re.compile(r"^Halt$"), "halt"),
]


def parse_value(text: str) -> Value:
    """Parses `42`, `error` or `ptr(perm,c,b,o)`."""
    text = text.strip()
    if text == "error":
        return ERROR
    if re.fullmatch(r"-?\d+", text):
        return Int(int(text))
    m = _PTR.match(text)
    if m is None:
        raise ValueError(f"invalid value {text!r}")
    perm, comp, block, offset = m.groups()
    return Ptr(Pointer(Permission(perm), int(comp), int(block), int(offset)))


def _instr(groups: tuple[str, ...], tag: str) -> Instr:
    r = Register.parse
    match tag:
        case "const":
            return Const(parse_value(groups[0]), r(groups[1]))
        case "mov":
            return Mov(r(groups[0]), r(groups[1]))
        case "binop":
            return BinOp(_OPS[groups[1]], r(groups[0]), r(groups[2]), r(groups[3]))
        case "label":
            return Label(groups[0])
        case "ptroflabel":
            return PtrOfLabel(groups[0], r(groups[1]))
        case "load":
            return Load(r(groups[0]), r(groups[1]))
        case "store":
            return Store(r(groups[0]), r(groups[1]))
        case "alloc":
            return Alloc(r(groups[0]), r(groups[1]))
        case "bnz":
            return Bnz(r(groups[0]), groups[1])
        case "jump":
            return Jump(r(groups[0]))
        case "jumpfunptr":
            return JumpFunPtr(r(groups[0]))
        case "jal":
            return Jal(groups[0])
        case "call":
            return Call(int(groups[0]), groups[1])
        case "return":
            return Return()
        case "nop":
            return Nop()
    return Halt()


def parse_instr(text: str) -> Instr:
    for pattern, tag in _INSTR:
        m = pattern.match(text)
        if m is not None:
            return _instr(m.groups(), tag)
    raise ValueError(f"unknown instruction {text!r}")


def parse_asm(text: str) -> MachProgram:
    """
    Parses a textual Mach program (whole or partial).

    Args:
        text (str): The assembly source.

    Returns:
        MachProgram: The parsed program.

    Raises:
        AsmSyntaxError: On the first malformed line.
    """
    comps: dict[int, dict] = {}
    procs: dict[tuple[int, str], list[Instr]] = {}
    comp: int | None = None
    proc: tuple[int, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("."):
                directive, _, rest = line.partition(" ")
                args = rest.split()
                if directive == ".component":
                    if not args:
                        raise ValueError("missing component id")
                    comp = int(args[0])
                    if comp in comps:
                        raise ValueError(f"component {comp} declared twice")
                    comps[comp] = {
                        "name": " ".join(args[1:]),
                        "exports": [],
                        "imports": [],
                        "buffer": [],
                        "runtime": None,
                    }
                    proc = None
                    continue
                if comp is None:
                    raise ValueError(f"{directive} outside a component")
                decl = comps[comp]
                match directive:
                    case ".exports":
                        decl["exports"].extend(args)
                    case ".imports":
                        for item in args:
                            callee, _, name = item.partition(".")
                            if not name:
                                raise ValueError(f"invalid import {item!r}")
                            decl["imports"].append((int(callee), name))
                    case ".buffer":
                        decl["buffer"].extend(parse_value(a) for a in args)
                    case ".runtime":
                        decl["runtime"] = int(args[0])
                    case ".proc":
                        if len(args) != 1:
                            raise ValueError(".proc takes one name")
                        proc = (comp, args[0])
                        if proc in procs:
                            raise ValueError(f"procedure {args[0]} defined twice")
                        procs[proc] = []
                    case _:
                        raise ValueError(f"unknown directive {directive}")
                continue
            if proc is None:
                raise ValueError("instruction outside a procedure")
            procs[proc].append(parse_instr(line))
        except ValueError as e:
            raise AsmSyntaxError(lineno, str(e)) from e
    intf = Interface(
        {
            c: ComponentInterface(tuple(d["exports"]), tuple(d["imports"]), d["name"])
            for c, d in comps.items()
        }
    )
    program = MachProgram(
        intf,
        {key: tuple(code) for key, code in procs.items()},
        {c: tuple(d["buffer"]) for c, d in comps.items() if d["buffer"]},
        {c: d["runtime"] for c, d in comps.items() if d["runtime"] is not None},
    )
    logger.debug("parsed %s procedures in %s components", len(procs), len(comps))
    return program


def format_instr(instr: Instr) -> str:
    match instr:
        case Const(imm, rd):
            return f"Const {imm} -> {rd.label}"
        case Mov(rs, rd):
            return f"Mov {rs.label} -> {rd.label}"
        case BinOp(op, r1, r2, rd):
            return f"BinOp {r1.label} {op.value} {r2.label} -> {rd.label}"
        case Label(name):
            return f"{name}:"
        case PtrOfLabel(name, rd):
            return f"PtrOfLabel {name} -> {rd.label}"
        case Load(rp, rd):
            return f"Load *{rp.label} -> {rd.label}"
        case Store(rp, rs):
            return f"Store *{rp.label} <- {rs.label}"
        case Alloc(rp, rsize):
            return f"Alloc {rp.label} {rsize.label}"
        case Bnz(r, name):
            return f"Bnz {r.label} {name}"
        case Jump(r):
            return f"Jump {r.label}"
        case JumpFunPtr(r):
            return f"JumpFunPtr {r.label}"
        case Jal(name):
            return f"Jal {name}"
        case Call(comp, proc):
            return f"Call {comp}.{proc}"
        case Return():
            return "Return"
        case Nop():
            return "Nop"
    return "Halt"


def print_asm(program: MachProgram) -> str:
    lines = []
    for comp in program.intf:
        cintf = program.intf[comp]
        header = f".component {comp}"
        lines.append(f"{header} {cintf.name}" if cintf.name else header)
        lines.append(" ".join([".exports", *cintf.exports]))
        if cintf.imports:
            lines.append(
                " ".join([".imports", *(f"{c}.{p}" for c, p in cintf.imports)])
            )
        if program.buffer(comp):
            lines.append(" ".join([".buffer", *(str(v) for v in program.buffer(comp))]))
        if comp in program.runtime:
            lines.append(f".runtime {program.runtime[comp]}")
        for name in program.proc_table.get(comp, ()):
            lines.append(f".proc {name}")
            for instr in program.procs[(comp, name)]:
                indent = "" if isinstance(instr, Label) else "    "
                lines.append(indent + format_instr(instr))
        lines.append("")
    return "\n".join(lines)
