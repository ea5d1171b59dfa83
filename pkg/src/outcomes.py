from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

from memory import Value


@dataclass(frozen=True, slots=True)
class Done:
    value: Value


@dataclass(frozen=True, slots=True)
class Stuck:
    reason: str


@dataclass(frozen=True, slots=True)
class OutOfFuel:
    pass


Outcome = Union[Done, Stuck, OutOfFuel]


def describe(outcome: Outcome) -> str:
    match outcome:
        case Done(value):
            return f"done({value})"
        case Stuck(reason):
            return f"stuck: {reason}"
    return "out of fuel"


@dataclass(frozen=True, slots=True)
class RunResult:
    """
    Result of running a whole program.

    Attributes:
        trace: The emitted trace (interaction or data-flow).
        outcome (Outcome): How the run ended.
        state: The last state reached.
        steps (int): Steps taken.
    """

    trace: Any
    outcome: Outcome
    state: Any
    steps: int
