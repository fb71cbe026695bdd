"""Verdicts and run statistics."""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass


class Verdict(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"
    UNKNOWN_GAVE_UP = "unknown-gave-up"

    @property
    def conclusive(self) -> bool:
        return self in (Verdict.TRUE, Verdict.FALSE)

    def negated(self) -> Verdict:
        if self is Verdict.TRUE:
            return Verdict.FALSE
        if self is Verdict.FALSE:
            return Verdict.TRUE
        return self

    @staticmethod
    def of(b: bool) -> Verdict:
        return Verdict.TRUE if b else Verdict.FALSE


@dataclass
class Stats:
    tuples: int = 0
    atoms_stepped: int = 0
    atom_runs: int = 0
    events_consumed: int = 0
    children_created: int = 0
    basic_monitors: int = 0
    steps: int = 0
    resolved: int = 0

    def as_dict(self) -> dict:
        return asdict(self)
