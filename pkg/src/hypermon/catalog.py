"""Named formulas that ship with the library, each with the domain it checks against."""
from __future__ import annotations

from dataclasses import dataclass

from .formula import Formula, parse
from .scenarios.bench import OD_FORMULA, OD_SAMPLES_FORMULA, OPACITY_FORMULA
from .scenarios.queue import LIN_FORMULA, LIN_LEGAL_FORMULA, lin_bounded_formula, queue_domain
from .scenarios.robot import robot_domain
from .trace_model import DataDomain


def security_domain() -> DataDomain:
    return DataDomain(["label", "pub", "loc", "out", "inL", "inH", "outL"], name="security")


def history_domain() -> DataDomain:
    """Event-level view of a history: event type, event id, per-process slots."""
    return DataDomain(["tp", "ev", "inv", "res", "proc0", "proc1"], name="history")


@dataclass(frozen=True)
class Entry:
    name: str
    text: str
    domain: str
    generators: frozenset[str] = frozenset()

    def formula(self) -> Formula:
        return parse(self.text, DOMAINS[self.domain](), generators=set(self.generators))


DOMAINS = {
    "security": security_domain,
    "history": history_domain,
    "robot": robot_domain,
    "queue": queue_domain,
}

_LINEAR = "tp(s) <= ('inv'; 'res')* and res(s) <= inv(s)"
_EQUIV = (
    "exists e in ext(p) . ev(p) <= ev(e) and tp(e) <= tp(p); 'res'* "
    "and proc0(e) = proc0(s) and proc1(e) = proc1(s)"
)

ENTRIES = [
    Entry("gni_loc_test", "forall p . forall q in test(p) . loc(p) ~<= loc(q)", "security", frozenset({"test"})),
    Entry("opacity_passive", "forall p . exists q . label(q)[0] = 'public' and pub(p) = pub(q)", "security"),
    Entry(
        "opacity_initpub",
        "forall p . exists q in initPub(p) . label(q)[0] = 'public' and pub(p) = pub(q)",
        "security",
        frozenset({"initPub"}),
    ),
    Entry("linear_passive", f"forall p . exists s . {_LINEAR}", "history"),
    Entry("linear_seq", f"forall p . exists s in seq(p) . {_LINEAR}", "history", frozenset({"seq"})),
    Entry("od_stutter", "forall p, q . pub(p)[0] = pub(q)[0] -> pub(p) ~<= pub(q)", "security"),
    Entry(
        "od_test",
        "forall p . forall q in test(p) . pub(p)[0] = pub(q)[0] -> pub(p) ~<= pub(q)",
        "security",
        frozenset({"test"}),
    ),
    Entry("od_low", "forall p, q . inL(p) = inL(q) -> outL(p) = outL(q)", "security"),
    Entry(
        "lin_hypernode",
        f"forall p . exists s in seq(p) . {_LINEAR} and ({_EQUIV})",
        "history",
        frozenset({"seq", "ext"}),
    ),
    Entry("robot_od", OD_FORMULA, "robot"),
    Entry("robot_od_samples", OD_SAMPLES_FORMULA, "robot", frozenset({"samples"})),
    Entry("robot_opacity", OPACITY_FORMULA, "robot", frozenset({"eqarea"})),
    Entry(
        "robot_opacity_passive",
        "forall p . exists q . area(p) = area(q) and act(p) != act(q)",
        "robot",
    ),
    Entry("queue_lin", LIN_FORMULA, "queue", frozenset({"lin"})),
    Entry("queue_lin_legal", LIN_LEGAL_FORMULA, "queue", frozenset({"lin", "legal"})),
    Entry("queue_lin_bounded", lin_bounded_formula(2), "queue", frozenset({"lin"})),
]

CATALOG = {e.name: e for e in ENTRIES}


def get(name: str) -> Formula:
    return CATALOG[name].formula()
