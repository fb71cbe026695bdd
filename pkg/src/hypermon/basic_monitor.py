"""Leaf monitor for a universally quantified block over one trace source.

Every k-tuple of traces (repetitions allowed) becomes a job.  A job walks a
reduced decision diagram of the quantifier-free body and only advances the
atom automaton sitting at the first undecided node on its path.
"""
from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Protocol

from .formula import And, Formula, Leq, Not, pretty_atom, simple_violation
from .errors import UnsupportedFragmentError
from .trace_model import DataDomain, Trace
from .transducer import AtomRun, PrefixAutomaton, compile_atom
from .verdict import Stats, Verdict

DEFAULT_GIVE_UP = 2048


class TraceSource(Protocol):
    def snapshot(self) -> tuple[list[Trace], bool]: ...


# ---------------------------------------------------------------------------
# decision diagram


class Node:
    __slots__ = ("var", "lo", "hi", "value")

    def __init__(self, var: int = -1, lo: Node | None = None, hi: Node | None = None, value: bool | None = None):
        self.var = var
        self.lo = lo
        self.hi = hi
        self.value = value

    @property
    def is_leaf(self) -> bool:
        return self.var < 0

    def __repr__(self):
        if self.is_leaf:
            return f"<{self.value}>"
        return f"<a{self.var} ? {self.hi} : {self.lo}>"


class DecisionDiagram:
    """Hash-consed reduced ordered diagram over atom indices."""

    def __init__(self, n_vars: int):
        self.n = n_vars
        self.true = Node(value=True)
        self.false = Node(value=False)
        self._unique: dict = {}
        self._memo: dict = {}

    def leaf(self, b: bool) -> Node:
        return self.true if b else self.false

    def mk(self, var: int, lo: Node, hi: Node) -> Node:
        if lo is hi:
            return lo
        key = (var, id(lo), id(hi))
        n = self._unique.get(key)
        if n is None:
            n = Node(var, lo, hi)
            self._unique[key] = n
        return n

    def atom(self, i: int) -> Node:
        return self.mk(i, self.false, self.true)

    def neg(self, a: Node) -> Node:
        if a.is_leaf:
            return self.leaf(not a.value)
        key = ("not", id(a))
        r = self._memo.get(key)
        if r is None:
            r = self.mk(a.var, self.neg(a.lo), self.neg(a.hi))
            self._memo[key] = (r)
        return r

    def conj(self, a: Node, b: Node) -> Node:
        if a is self.false or b is self.false:
            return self.false
        if a is self.true:
            return b
        if b is self.true:
            return a
        key = ("and", id(a), id(b))
        r = self._memo.get(key)
        if r is None:
            v = min(a.var, b.var)
            alo, ahi = (a.lo, a.hi) if a.var == v else (a, a)
            blo, bhi = (b.lo, b.hi) if b.var == v else (b, b)
            r = self.mk(v, self.conj(alo, blo), self.conj(ahi, bhi))
            self._memo[key] = r
        return r

    def size(self, root: Node) -> int:
        seen = set()
        stack = [root]
        while stack:
            n = stack.pop()
            if id(n) in seen or n.is_leaf:
                continue
            seen.add(id(n))
            stack += [n.lo, n.hi]
        return len(seen)

    def evaluate(self, root: Node, outcomes: Sequence[bool | None]) -> bool | None:
        """Three-valued evaluation; ``None`` where the outcome is not forced."""
        n = root
        while not n.is_leaf:
            o = outcomes[n.var]
            if o is None:
                a = self.evaluate(n.lo, outcomes)
                if a is None:
                    return None
                b = self.evaluate(n.hi, outcomes)
                return a if a == b else None
            n = n.hi if o else n.lo
        return n.value

    def next_atom(self, root: Node, outcomes: Sequence[bool | None]) -> int | None:
        """First undecided atom on the path selected by the known outcomes."""
        n = root
        while not n.is_leaf:
            o = outcomes[n.var]
            if o is None:
                return n.var
            n = n.hi if o else n.lo
        return None


@dataclass
class AtomTable:
    atoms: list[Leq]
    diagram: DecisionDiagram
    root: Node

    def truth(self, outcomes: Sequence[bool]) -> bool:
        return self.diagram.evaluate(self.root, outcomes)


def atoms_of(body: Formula) -> AtomTable:
    """Atoms in order of first occurrence plus a diagram of the body."""
    order: list[Leq] = []
    index: dict[Leq, int] = {}

    def collect(f):
        if isinstance(f, Leq):
            if f not in index:
                index[f] = len(order)
                order.append(f)
        elif isinstance(f, Not):
            collect(f.body)
        elif isinstance(f, And):
            collect(f.left)
            collect(f.right)
        else:
            raise UnsupportedFragmentError("the body of a basic monitor must be quantifier-free")

    collect(body)
    dd = DecisionDiagram(len(order))

    def build(f) -> Node:
        if isinstance(f, Leq):
            return dd.atom(index[f])
        if isinstance(f, Not):
            return dd.neg(build(f.body))
        return dd.conj(build(f.left), build(f.right))

    return AtomTable(order, dd, build(body))


# ---------------------------------------------------------------------------
# shared caches


class AtomCache:
    """Compiled automata per atom and runs per (atom, left trace, right trace).

    A run depends only on the two traces it reads, so jobs that agree on
    them share it.
    """

    def __init__(self, domain: DataDomain | None):
        self.domain = domain
        self.automata: dict[Leq, PrefixAutomaton] = {}
        self.runs: dict = {}

    def automaton(self, atom: Leq) -> PrefixAutomaton:
        A = self.automata.get(atom)
        if A is None:
            for side in (atom.left, atom.right):
                why = simple_violation(side)
                if why:
                    raise UnsupportedFragmentError(f"atom {pretty_atom(atom)} is not simple: {why}")
            A = compile_atom(atom, self.domain)
            self.automata[atom] = A
        return A

    def run(self, atom: Leq, A: PrefixAutomaton, left: Trace | None, right: Trace | None, stats: Stats) -> AtomRun:
        key = (atom, left, right)
        r = self.runs.get(key)
        if r is None:
            r = AtomRun(A, left, right)
            self.runs[key] = r
            stats.atom_runs += 1
        return r


# ---------------------------------------------------------------------------
# jobs


@dataclass
class TupleJob:
    traces: tuple[Trace, ...]
    outcomes: list
    status: bool | None = None

    def assignment(self, vars_: Sequence[str]) -> dict[str, str]:
        return {v: t.id for v, t in zip(vars_, self.traces)}


def _tuples_with(n: int, k: int):
    """k-tuples over ``range(n + 1)`` containing ``n``, each exactly once."""
    for j in range(k):
        for head in itertools.product(range(n), repeat=j):
            for tail in itertools.product(range(n + 1), repeat=k - j - 1):
                yield head + (n,) + tail


@dataclass
class BasicMonitor:
    """``forall vars . body`` over ``source`` under the fixed assignment ``env``."""

    vars: tuple[str, ...]
    body: Formula
    env: Mapping[str, Trace]
    source: TraceSource
    cache: AtomCache
    stats: Stats = field(default_factory=Stats)
    give_up: int = DEFAULT_GIVE_UP
    budget: int | None = 20000

    def __post_init__(self):
        self.table = atoms_of(self.body)
        self.automata = [self.cache.automaton(a) for a in self.table.atoms]
        self._sides = [(A.left_var, A.right_var) for A in self.automata]
        self.jobs: list[TupleJob] = []
        self.n_seen = 0
        self.gave_up = False
        self.verdict: Verdict | None = None
        self.witness: dict[str, str] | None = None
        self._traces: list[Trace] = []
        self.stats.basic_monitors += 1

    # -- tuple creation --------------------------------------------------
    def _new_tuples(self, traces: list[Trace]) -> None:
        k = len(self.vars)
        if k == 0:
            if self.n_seen == 0:
                self.jobs.append(TupleJob((), [None] * len(self.automata)))
                self.stats.tuples += 1
                self.n_seen = -1  # the single empty tuple exists
            return
        if self.n_seen < 0:
            return
        limit = len(traces)
        if limit > self.give_up:
            limit = self.give_up
            self.gave_up = True
        for n in range(self.n_seen, limit):
            self._traces.append(traces[n])
            pool = self._traces
            # all tuples over pool[0..n] that use pool[n] at least once
            for combo in _tuples_with(n, k):
                self.jobs.append(TupleJob(tuple(pool[i] for i in combo), [None] * len(self.automata)))
                self.stats.tuples += 1
        self.n_seen = limit

    def _trace_for(self, var: str | None, job: TupleJob) -> Trace | None:
        if var is None:
            return None
        try:
            i = self.vars.index(var)
        except ValueError:
            return self.env[var]
        return job.traces[i]

    def _advance(self, job: TupleJob) -> bool | None:
        table = self.table
        dd, root = table.diagram, table.root
        while True:
            i = dd.next_atom(root, job.outcomes)
            if i is None:
                job.status = dd.evaluate(root, job.outcomes)
                return job.status
            lv, rv = self._sides[i]
            run = self.cache.run(table.atoms[i], self.automata[i], self._trace_for(lv, job), self._trace_for(rv, job), self.stats)
            before = run.expansions
            r = run.advance(self.budget)
            self.stats.atoms_stepped += run.expansions - before
            if r is None:
                return None
            job.outcomes[i] = r

    def step(self) -> Verdict:
        if self.verdict is not None:
            return self.verdict
        traces, closed = self.source.snapshot()
        self._new_tuples(traces)
        pending = []
        for job in self.jobs:
            r = self._advance(job)
            if r is False:
                self.verdict = Verdict.FALSE
                self.witness = {**{k: t.id for k, t in self.env.items()}, **job.assignment(self.vars)}
                self.jobs = []
                return self.verdict
            if r is None:
                pending.append(job)
        self.stats.resolved += len(self.jobs) - len(pending)
        self.jobs = pending
        if pending:
            return Verdict.UNKNOWN
        if self.gave_up:
            return Verdict.UNKNOWN_GAVE_UP
        if closed:
            self.verdict = Verdict.TRUE
            return self.verdict
        return Verdict.UNKNOWN


def basic_mon(
    vars_: Sequence[str],
    body: Formula,
    env: Mapping[str, Trace],
    source: TraceSource,
    domain: DataDomain | None,
    cache: AtomCache | None = None,
    stats: Stats | None = None,
    give_up: int = DEFAULT_GIVE_UP,
) -> BasicMonitor:
    return BasicMonitor(
        tuple(vars_), body, dict(env), source, cache or AtomCache(domain), stats or Stats(), give_up
    )


def step_basic(handle: BasicMonitor) -> Verdict:
    return handle.step()
