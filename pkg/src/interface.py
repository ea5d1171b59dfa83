"""Component interfaces shared by source programs, machine programs and the
back-translation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

logger = logging.getLogger(__name__)

MAIN_PROC = "main"


@dataclass(frozen=True, slots=True)
class ComponentInterface:
    """
    What one component offers and uses.

    Attributes:
        exports (tuple[str, ...]): Exported procedure names.
        imports (tuple[tuple[int, str], ...]): Imported (component, procedure) pairs.
        name (str): Optional display name, e.g. "Net".
    """

    exports: tuple[str, ...] = ()
    imports: tuple[tuple[int, str], ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "exports", tuple(sorted(set(self.exports))))
        object.__setattr__(self, "imports", tuple(sorted(set(self.imports))))


@dataclass(frozen=True)
class Interface:
    components: Mapping[int, ComponentInterface] = field(default_factory=dict)

    def __iter__(self):
        return iter(sorted(self.components))

    def __contains__(self, comp: int) -> bool:
        return comp in self.components

    def __getitem__(self, comp: int) -> ComponentInterface:
        return self.components[comp]

    def comps(self) -> frozenset[int]:
        return frozenset(self.components)

    def display(self, comp: int) -> str:
        cintf = self.components.get(comp)
        return cintf.name if cintf is not None and cintf.name else str(comp)

    def resolve(self, token: str | int) -> int:
        """Maps a component name or numeric id to its id."""
        if isinstance(token, int):
            return token
        text = token.strip()
        if text.lstrip("-").isdigit():
            return int(text)
        for comp, cintf in self.components.items():
            if cintf.name == text:
                return comp
        raise ValueError(f"unknown component {token!r}")

    def exports(self, comp: int, proc: str) -> bool:
        cintf = self.components.get(comp)
        return cintf is not None and proc in cintf.exports

    def imports(self, comp: int, callee: int, proc: str) -> bool:
        cintf = self.components.get(comp)
        return cintf is not None and (callee, proc) in cintf.imports

    def main_components(self) -> list[int]:
        return [c for c in self if MAIN_PROC in self.components[c].exports]

    def main_component(self) -> int | None:
        mains = self.main_components()
        return mains[0] if len(mains) == 1 else None

    def restrict(self, comps: Iterable[int]) -> Interface:
        keep = set(comps)
        return Interface({c: i for c, i in self.components.items() if c in keep})

    def merge(self, other: Interface) -> Interface:
        overlap = self.comps() & other.comps()
        if overlap:
            raise ValueError(f"components defined twice: {sorted(overlap)}")
        return Interface({**self.components, **other.components})

    def violations(
        self, procedures: Mapping[int, Iterable[str]], partial: bool = False
    ) -> list[str]:
        """
        Checks the interface discipline against the defined procedures.

        Args:
            procedures (Mapping[int, Iterable[str]]): Procedure names per component.
            partial (bool): Program parts may lack main and import from
                            components they do not define.

        Returns:
            list[str]: Human readable violations, empty when well-formed.
        """
        errors = []
        mains = self.main_components()
        if not partial and len(mains) != 1:
            errors.append(f"expected exactly one component exporting main, got {mains}")
        for comp in self:
            cintf = self.components[comp]
            defined = set(procedures.get(comp, ()))
            if not defined:
                errors.append(f"component {comp} defines no procedure")
            for proc in cintf.exports:
                if proc not in defined:
                    errors.append(f"component {comp} exports undefined {proc}")
            for callee, proc in cintf.imports:
                if callee == comp:
                    errors.append(f"component {comp} imports from itself: {proc}")
                elif (callee in self or not partial) and not self.exports(callee, proc):
                    errors.append(
                        f"component {comp} imports {callee}.{proc} which is not exported"
                    )
                if proc == MAIN_PROC:
                    errors.append(f"component {comp} imports main")
        return errors


def procedure_table(procs: Iterable[tuple[int, str]]) -> dict[int, tuple[str, ...]]:
    """Sorted procedure names per component; the index is the code block id."""
    table: dict[int, list[str]] = {}
    for comp, name in procs:
        table.setdefault(comp, []).append(name)
    return {comp: tuple(sorted(names)) for comp, names in table.items()}


def procedure_id(table: Mapping[int, tuple[str, ...]], comp: int, name: str) -> int:
    return table[comp].index(name)
