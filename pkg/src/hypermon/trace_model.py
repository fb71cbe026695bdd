"""Traces, valuations, data domains and append-only observations.

A trace is a finite list of valuations plus a ``terminated`` flag standing in
for the end-of-trace symbol.  Observations hold a growing set of traces and a
revision-stamped delta log so that readers can catch up incrementally.
"""
from __future__ import annotations

import json
import threading
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

from .errors import SpecificationError, UpdateError


class _Epsilon:
    """The empty letter.  Projections return it to mean "nothing here"."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "ε"

    def __reduce__(self):
        return (_Epsilon, ())


EPS = _Epsilon()


def freeze(value: Any) -> Any:
    """Turn JSON-ish data into hashable domain values (lists become tuples)."""
    if isinstance(value, list | tuple):
        return tuple(freeze(v) for v in value)
    if isinstance(value, dict):
        return Valuation(value)
    return value


def thaw(value: Any) -> Any:
    if isinstance(value, tuple):
        return [thaw(v) for v in value]
    if isinstance(value, Valuation):
        return {k: thaw(v) for k, v in value.items()}
    return value


class Valuation(Mapping):
    """Immutable, hashable mapping from variable names to domain values."""

    __slots__ = ("_d", "_h")

    def __init__(self, entries: Mapping[str, Any] | Iterable[tuple[str, Any]] = ()):
        d = dict(entries)
        self._d = {k: freeze(v) for k, v in d.items()}
        self._h = None

    def __getitem__(self, key):
        return self._d[key]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._h is None:
            self._h = hash(tuple(sorted(self._d.items(), key=lambda kv: kv[0])))
        return self._h

    def __eq__(self, other):
        if isinstance(other, Valuation):
            return self._d == other._d
        if isinstance(other, Mapping):
            return self._d == dict(other)
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k}: {v!r}" for k, v in self._d.items())
        return "{" + inner + "}"


@dataclass
class Trace:
    id: str
    events: list[Valuation] = field(default_factory=list)
    terminated: bool = False

    def __len__(self):
        return len(self.events)

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        return self is other

    @classmethod
    def of(cls, tid: str, events: Iterable[Mapping[str, Any]], terminated: bool = True) -> Trace:
        return cls(tid, [e if isinstance(e, Valuation) else Valuation(e) for e in events], terminated)


Projection = Callable[[Valuation], Any]


class DataDomain:
    """System variables plus named projections.

    Every system variable ``x`` gets an implicit projection ``x`` returning
    ``v[x]``.  ``nonempty`` lists projections that never yield the empty
    letter; the automaton compiler uses it to skip an epsilon branch.
    """

    def __init__(
        self,
        system_vars: Iterable[str],
        projections: Mapping[str, Projection] | None = None,
        nonempty: Iterable[str] = (),
        name: str = "domain",
    ):
        self.name = name
        self.system_vars = tuple(system_vars)
        self.projections: dict[str, Projection] = {}
        for x in self.system_vars:
            self.projections[x] = _var_projection(x)
        for pname, fn in (projections or {}).items():
            self.projections[pname] = fn
        self.nonempty = frozenset(nonempty) | frozenset(self.system_vars)

    def has(self, proj: str) -> bool:
        return proj in self.projections

    def apply(self, proj: str, letter: Any) -> Any:
        try:
            fn = self.projections[proj]
        except KeyError:
            raise SpecificationError(f"unknown projection '{proj}'") from None
        return fn(letter)

    def __repr__(self):
        return f"DataDomain({self.name!r}, projections={sorted(self.projections)})"


def _var_projection(x: str) -> Projection:
    def proj(v):
        return v[x]

    proj.__name__ = f"var_{x}"
    return proj


def generic_domain(traces: Iterable[Trace] = ()) -> DataDomain:
    """Domain whose projections are exactly the variables seen in ``traces``."""
    names: set[str] = set()
    for t in traces:
        for e in t.events:
            names.update(e.keys())
    return DataDomain(sorted(names), name="generic")


# ---------------------------------------------------------------------------
# word-level operations


def project(trace: Trace | Iterable[Valuation], proj: str, domain: DataDomain) -> tuple:
    """Projected word of a trace, with empty letters dropped."""
    if not domain.has(proj):
        raise SpecificationError(f"unknown projection '{proj}'")
    events = trace.events if isinstance(trace, Trace) else trace
    fn = domain.projections[proj]
    out = []
    for v in events:
        a = fn(v)
        if a is not EPS:
            out.append(a)
    return tuple(out)


def slice_word(word: tuple, i: int, j: int) -> tuple:
    """``word[i:j]`` with inclusive end and indices relative to the end when negative.

    Anything out of range, or with the resolved start after the resolved end,
    gives the empty word.
    """
    n = len(word)
    ri = n + i if i < 0 else i
    rj = n + j if j < 0 else j
    if 0 <= ri <= rj < n:
        return tuple(word[ri : rj + 1])
    return ()


def stutter_reduce(word: Iterable) -> tuple:
    out: list = []
    for a in word:
        if not out or out[-1] != a:
            out.append(a)
    return tuple(out)


def is_prefix(w1: tuple, w2: tuple) -> bool:
    return len(w1) <= len(w2) and tuple(w2[: len(w1)]) == tuple(w1)


def stutter_prefix(w1: Iterable, w2: Iterable) -> bool:
    return is_prefix(stutter_reduce(w1), stutter_reduce(w2))


# ---------------------------------------------------------------------------
# observations


@dataclass(frozen=True)
class Delta:
    revision: int
    kind: str  # "add", "event", "end", "close"
    trace: str | None
    event: Valuation | None = None


class Observation:
    """A growing, append-only set of traces.

    Mutation goes through :meth:`add_trace`, :meth:`append_event`,
    :meth:`terminate_trace` and :meth:`close`; each bumps ``revision`` and
    appends a :class:`Delta`.  Readers may hold on to ``Trace`` objects: those
    only ever grow.
    """

    def __init__(self, traces: Iterable[Trace] = (), closed: bool = False):
        self._lock = threading.RLock()
        self._traces: dict[str, Trace] = {}
        self._order: list[Trace] = []
        self._log: list[Delta] = []
        self.revision = 0
        self.closed = False
        for t in traces:
            self.add_trace(t.id)
            for e in t.events:
                self.append_event(t.id, e)
            if t.terminated:
                self.terminate_trace(t.id)
        if closed:
            self.close()

    # -- writer side --------------------------------------------------------
    def _bump(self, kind, tid=None, event=None) -> int:
        self.revision += 1
        self._log.append(Delta(self.revision, kind, tid, event))
        return self.revision

    def add_trace(self, tid: str) -> int:
        with self._lock:
            if self.closed:
                raise UpdateError("observation is closed")
            if tid in self._traces:
                raise UpdateError(f"duplicate trace id '{tid}'")
            t = Trace(tid)
            self._traces[tid] = t
            self._order.append(t)
            return self._bump("add", tid)

    def append_event(self, tid: str, valuation: Mapping[str, Any]) -> int:
        with self._lock:
            t = self._get(tid)
            if t.terminated:
                raise UpdateError(f"trace '{tid}' is terminated")
            v = valuation if isinstance(valuation, Valuation) else Valuation(valuation)
            t.events.append(v)
            return self._bump("event", tid, v)

    def terminate_trace(self, tid: str) -> int:
        with self._lock:
            t = self._get(tid)
            if t.terminated:
                raise UpdateError(f"trace '{tid}' is already terminated")
            t.terminated = True
            return self._bump("end", tid)

    def close(self) -> int:
        """Signal that no new traces will arrive.  Idempotent."""
        with self._lock:
            if self.closed:
                return self.revision
            self.closed = True
            return self._bump("close")

    def add(self, trace: Trace) -> None:
        """Convenience: ingest a whole trace at once."""
        self.add_trace(trace.id)
        for e in trace.events:
            self.append_event(trace.id, e)
        if trace.terminated:
            self.terminate_trace(trace.id)

    def _get(self, tid: str) -> Trace:
        try:
            return self._traces[tid]
        except KeyError:
            raise UpdateError(f"unknown trace id '{tid}'") from None

    # -- reader side --------------------------------------------------------
    def __getitem__(self, tid: str) -> Trace:
        return self._traces[tid]

    def __contains__(self, tid) -> bool:
        return tid in self._traces

    def __len__(self) -> int:
        return len(self._order)

    def __iter__(self) -> Iterator[Trace]:
        return iter(list(self._order))

    @property
    def traces(self) -> list[Trace]:
        return list(self._order)

    def snapshot(self) -> tuple[list[Trace], bool]:
        """Traces in arrival order and whether the set is closed."""
        with self._lock:
            return list(self._order), self.closed

    def deltas_since(self, revision: int) -> list[Delta]:
        with self._lock:
            return [d for d in self._log if d.revision > revision]

    @classmethod
    def replay(cls, deltas: Iterable[Delta]) -> Observation:
        obs = cls()
        for d in deltas:
            if d.kind == "add":
                obs.add_trace(d.trace)
            elif d.kind == "event":
                obs.append_event(d.trace, d.event)
            elif d.kind == "end":
                obs.terminate_trace(d.trace)
            elif d.kind == "close":
                obs.close()
        return obs

    def same_as(self, other: Observation) -> bool:
        if [t.id for t in self._order] != [t.id for t in other._order]:
            return False
        for a, b in zip(self._order, other._order):
            if a.events != b.events or a.terminated != b.terminated:
                return False
        return self.closed == other.closed


# ---------------------------------------------------------------------------
# JSON Lines format


def apply_jsonl_line(obs: Observation, line: str) -> None:
    line = line.strip()
    if not line:
        return
    rec = json.loads(line)
    if rec.get("close"):
        obs.close()
        return
    tid = str(rec["trace"])
    if tid not in obs:
        obs.add_trace(tid)
    if "event" in rec:
        obs.append_event(tid, Valuation(rec["event"]))
    if rec.get("end"):
        obs.terminate_trace(tid)


def read_jsonl(lines: Iterable[str], obs: Observation | None = None) -> Observation:
    obs = obs if obs is not None else Observation()
    for line in lines:
        apply_jsonl_line(obs, line)
    return obs


def load_traces(path: str) -> Observation:
    """Load a ``.jsonl`` file or every ``*.jsonl`` file of a directory, then close."""
    import os

    obs = Observation()
    if os.path.isdir(path):
        files = sorted(f for f in os.listdir(path) if f.endswith(".jsonl"))
        paths = [os.path.join(path, f) for f in files]
    else:
        paths = [path]
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            read_jsonl(fh, obs)
    obs.close()
    return obs


def trace_lines(trace: Trace) -> Iterator[str]:
    for e in trace.events:
        yield json.dumps({"trace": trace.id, "event": thaw(e)}, sort_keys=True, ensure_ascii=False)
    if trace.terminated:
        yield json.dumps({"end": True, "trace": trace.id}, sort_keys=True)


def write_jsonl(traces: Iterable[Trace], fh, close: bool = False) -> None:
    for t in traces:
        for line in trace_lines(t):
            fh.write(line + "\n")
    if close:
        fh.write(json.dumps({"close": True}) + "\n")
