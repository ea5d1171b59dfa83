"""Renaming table files: `{"blocks": [[comp, block, renamed_block], ...]}`."""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, Field, field_validator

from relations import Table


class RenamingTableFile(BaseModel):
    blocks: list[tuple[int, int, int]] = Field(default_factory=list)

    @field_validator("blocks")
    @classmethod
    def validate_blocks(cls, v: list[tuple[int, int, int]]) -> list[tuple[int, int, int]]:
        sources = [(c, b) for c, b, _ in v]
        if len(set(sources)) != len(sources):
            raise ValueError("a block is renamed twice")
        if any(b < 0 or b2 < 0 for _, b, b2 in v):
            raise ValueError("only non-negative blocks can be renamed")
        return v

    def to_table(self) -> Table:
        return Table({(c, b): b2 for c, b, b2 in self.blocks})

    @classmethod
    def from_table(cls, table: Table) -> RenamingTableFile:
        return cls(blocks=[(c, b, b2) for (c, b), b2 in sorted(table.mapping.items())])


def load_table(path: str | Path) -> Table:
    return RenamingTableFile.model_validate(json.loads(Path(path).read_text())).to_table()
