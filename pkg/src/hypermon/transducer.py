"""Symbolic register transducers and two-tape prefix automata.

Transitions carry guards built from equalities and disequalities between
*terms*: the letter under a tape head, a register, or a constant, each
optionally passed through a chain of projections.  Guards, register updates
and outputs are all evaluated against the register values *before* the
transition fires.

The pipeline that turns a comparison ``psi1 <= psi2`` into something that can
be run incrementally is::

    compile_trace_formula(psi1)  --\\
                                    >--  prefix product  --> PrefixAutomaton --> AtomRun
    compile_trace_formula(psi2)  --/
"""
from __future__ import annotations

import itertools
from collections import Counter, defaultdict, deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from typing import Any

from .errors import PreconditionError, UnsupportedFragmentError
from .formula import (
    Concat,
    Const,
    Epsilon,
    Leq,
    Proj,
    Slice,
    Star,
    Stutter,
    TraceFormula,
    Union_,
    pretty_trace,
    simple_violation,
    trace_vars,
)
from .trace_model import EPS, DataDomain, Trace


class _Unset:
    def __repr__(self):
        return "⊥"

    def __reduce__(self):
        return (_unset, ())


def _unset():
    return UNSET


UNSET = _Unset()
"""Initial value of every register; equal only to itself."""

# rule hit counters, inspected by tests and the coverage report
RULE_HITS: Counter = Counter()

# ---------------------------------------------------------------------------
# terms, atoms, constraints


@dataclass(frozen=True)
class Term:
    kind: str  # "in" (tape letter), "reg" (register) or "const"
    ref: Any
    projs: tuple[str, ...] = ()

    def base(self) -> Term:
        return Term(self.kind, self.ref) if self.projs else self

    def parent(self) -> Term:
        return Term(self.kind, self.ref, self.projs[:-1])

    def with_projs(self, projs: tuple[str, ...]) -> Term:
        return Term(self.kind, self.ref, self.projs + tuple(projs))

    def key(self) -> tuple:
        return (self.kind, repr(self.ref), self.projs)

    def __str__(self):
        if self.kind == "const":
            s = repr(self.ref)
        else:
            s = str(self.ref)
        for p in self.projs:
            s = f"{p}({s})"
        return s


def tape(name: str, projs: tuple[str, ...] = ()) -> Term:
    return Term("in", name, tuple(projs))


def reg(name: str) -> Term:
    return Term("reg", name)


def const(value: Any) -> Term:
    return Term("const", value)


EPS_TERM = const(EPS)
UNSET_TERM = const(UNSET)


@dataclass(frozen=True)
class Atom:
    eq: bool
    a: Term
    b: Term

    @staticmethod
    def make(eq: bool, a: Term, b: Term) -> Atom:
        if b.key() < a.key():
            a, b = b, a
        return Atom(eq, a, b)

    def negated(self) -> Atom:
        return Atom(not self.eq, self.a, self.b)

    def terms(self):
        return (self.a, self.b)

    def __str__(self):
        return f"{self.a} {'=' if self.eq else '!='} {self.b}"


Constraint = frozenset  # of Atom


def eq(a: Term, b: Term) -> Atom:
    return Atom.make(True, a, b)


def ne(a: Term, b: Term) -> Atom:
    return Atom.make(False, a, b)


def show_guard(g: Constraint) -> str:
    if not g:
        return "true"
    return " & ".join(sorted(str(a) for a in g))


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        if p is x or p == x:
            return x
        r = self.find(p)
        self.parent[x] = r
        return r

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def satisfiable(guard: Iterable[Atom], domain: DataDomain | None = None) -> bool:
    """Decide a conjunction of (dis)equalities between projected terms.

    Equalities are closed under congruence (equal arguments give equal
    projections); constants are evaluated through the domain where possible.
    The conjunction is unsatisfiable when a class holds two distinct
    constants or a disequality relates two members of one class.
    """
    guard = list(guard)
    if not guard:
        return True
    uf = _UnionFind()
    terms: set[Term] = set()
    for at in guard:
        for t in at.terms():
            while True:
                terms.add(t)
                if not t.projs:
                    break
                t = t.parent()
    for at in guard:
        if at.eq:
            uf.union(at.a, at.b)
    projected = [t for t in terms if t.projs]
    changed = True
    while changed:
        changed = False
        groups: dict = defaultdict(list)
        for t in projected:
            groups[(uf.find(t.parent()), t.projs[-1])].append(t)
        consts_of: dict = defaultdict(set)
        for t in terms:
            if t.kind == "const" and not t.projs:
                consts_of[uf.find(t)].add(t)
        for (root, p), members in groups.items():
            for m in members[1:]:
                changed |= uf.union(members[0], m)
            if domain is not None and domain.has(p):
                for c in consts_of.get(root, ()):
                    if c.ref is EPS or c.ref is UNSET:
                        continue
                    try:
                        val = domain.apply(p, c.ref)
                    except Exception:
                        continue
                    ct = const(val)
                    if ct not in terms:
                        terms.add(ct)
                    changed |= uf.union(members[0], ct)
    seen: dict = {}
    for t in terms:
        if t.kind == "const" and not t.projs:
            r = uf.find(t)
            if r in seen and seen[r] != t:
                return False
            seen[r] = t
    for at in guard:
        if not at.eq and uf.find(at.a) == uf.find(at.b):
            return False
    return True


# ---------------------------------------------------------------------------
# substitution


def subst_term(t: Term, mapping: dict) -> Term:
    m = mapping.get((t.kind, t.ref))
    if m is None:
        return t
    return m.with_projs(t.projs) if t.projs else m


def subst_guard(g: Constraint, mapping: dict) -> Constraint:
    if not mapping:
        return g
    return frozenset(Atom.make(a.eq, subst_term(a.a, mapping), subst_term(a.b, mapping)) for a in g)


def subst_updates(updates, mapping):
    return tuple((r, subst_term(t, mapping)) for r, t in updates)


def _reg_map(d: dict[str, Term]) -> dict:
    return {("reg", r): t for r, t in d.items()}


# ---------------------------------------------------------------------------
# transducers


@dataclass(frozen=True)
class Transition:
    src: int
    reads: tuple[str, ...]
    guard: Constraint
    updates: tuple[tuple[str, Term], ...]
    out: Term | None
    dst: int

    @property
    def is_eps_eps(self) -> bool:
        return not self.reads and self.out is None

    def label(self) -> str:
        rd = ",".join(self.reads) if self.reads else "ε"
        parts = [f"{rd}[{show_guard(self.guard)}]"]
        if self.updates:
            parts.append(", ".join(f"{r}:={t}" for r, t in self.updates))
        parts.append(f"/{self.out if self.out is not None else 'ε'}")
        return " ".join(parts)


TRUE_FINAL: tuple[Constraint, ...] = (frozenset(),)


@dataclass
class Transducer:
    """A symbolic transducer with registers.

    ``finals`` maps a state to the guards (over registers) under which the
    state accepts; ``(frozenset(),)`` means unconditionally final.
    """

    n_states: int
    initial: int
    finals: dict[int, tuple[Constraint, ...]]
    transitions: list[Transition]
    registers: tuple[str, ...] = ()
    tapes: tuple[str, ...] = ("in",)
    domain: DataDomain | None = field(default=None, repr=False, compare=False)

    def outgoing(self) -> list[list[Transition]]:
        out: list[list[Transition]] = [[] for _ in range(self.n_states)]
        for t in self.transitions:
            out[t.src].append(t)
        return out

    def has_eps_eps(self) -> bool:
        return any(t.is_eps_eps for t in self.transitions)

    def reads_input(self) -> bool:
        return any(t.reads for t in self.transitions)

    def dump(self) -> str:
        lines = [
            f"transducer states={self.n_states} initial={self.initial} "
            f"registers={len(self.registers)} [{', '.join(self.registers)}]"
        ]
        for q in sorted(self.finals):
            for g in self.finals[q]:
                lines.append(f"final {q} [{show_guard(g)}]")
        for t in sorted(self.transitions, key=lambda t: (t.src, t.dst, t.label())):
            lines.append(f"trans {t.src} -> {t.dst} : {t.label()}")
        return "\n".join(lines)


def _fresh_domain(*ts: Transducer) -> DataDomain | None:
    for t in ts:
        if t.domain is not None:
            return t.domain
    return None


def rename_registers(T: Transducer, prefix: str) -> Transducer:
    m = {r: reg(prefix + r) for r in T.registers}
    mp = _reg_map(m)
    trans = [
        Transition(
            t.src,
            t.reads,
            subst_guard(t.guard, mp),
            tuple((prefix + r, subst_term(v, mp)) for r, v in t.updates),
            subst_term(t.out, mp) if t.out is not None else None,
            t.dst,
        )
        for t in T.transitions
    ]
    finals = {q: tuple(subst_guard(g, mp) for g in gs) for q, gs in T.finals.items()}
    return replace(T, transitions=trans, finals=finals, registers=tuple(prefix + r for r in T.registers))


def rename_tape(T: Transducer, old: str, new: str) -> Transducer:
    mp = {("in", old): tape(new)}
    trans = [
        Transition(
            t.src,
            tuple(new if r == old else r for r in t.reads),
            subst_guard(t.guard, mp),
            subst_updates(t.updates, mp),
            subst_term(t.out, mp) if t.out is not None else None,
            t.dst,
        )
        for t in T.transitions
    ]
    tapes = tuple(new if x == old else x for x in T.tapes)
    return replace(T, transitions=trans, tapes=tapes)


def _used_registers(T: Transducer) -> list[str]:
    """Registers whose value can influence a guard or an output."""
    reads: dict[str, set[str]] = defaultdict(set)  # reg -> regs feeding it
    live: set[str] = set()

    def regs_in(term: Term | None) -> set[str]:
        return {term.ref} if term is not None and term.kind == "reg" else set()

    for t in T.transitions:
        for a in t.guard:
            live |= regs_in(a.a) | regs_in(a.b)
        live |= regs_in(t.out)
        for r, v in t.updates:
            reads[r] |= regs_in(v)
    for gs in T.finals.values():
        for g in gs:
            for a in g:
                live |= regs_in(a.a) | regs_in(a.b)
    work = list(live)
    while work:
        r = work.pop()
        for s in reads.get(r, ()):
            if s not in live:
                live.add(s)
                work.append(s)
    order = []
    for r in T.registers:
        if r in live and r not in order:
            order.append(r)
    return order


def simplify_guard(g: Constraint) -> Constraint:
    """Drop atoms that hold trivially."""
    keep = []
    for a in g:
        if a.a == a.b and a.eq:
            continue
        if a.a.kind == a.b.kind == "const" and not a.a.projs and not a.b.projs and a.eq == (a.a.ref == a.b.ref):
            continue
        keep.append(a)
    return g if len(keep) == len(g) else frozenset(keep)


def normalize_registers(T: Transducer, stem: str = "r", names_out: dict | None = None) -> Transducer:
    """Drop dead registers and rename the rest ``r0, r1, ...``.

    The renaming is written into ``names_out`` when given.
    """
    T = replace(
        T,
        transitions=[replace(t, guard=simplify_guard(t.guard)) for t in T.transitions],
        finals={q: tuple(dict.fromkeys(simplify_guard(g) for g in gs)) for q, gs in T.finals.items()},
    )
    used = _used_registers(T)
    m = {r: reg(f"{stem}{i}") for i, r in enumerate(used)}
    if names_out is not None:
        names_out.update({r: t.ref for r, t in m.items()})
    mp = _reg_map(m)
    trans = []
    for t in T.transitions:
        ups = tuple(
            sorted(((m[r].ref, subst_term(v, mp)) for r, v in t.updates if r in m), key=lambda x: x[0])
        )
        ups = tuple((r, v) for r, v in ups if not (v.kind == "reg" and v.ref == r and not v.projs))
        trans.append(
            Transition(
                t.src,
                t.reads,
                subst_guard(t.guard, mp),
                ups,
                subst_term(t.out, mp) if t.out is not None else None,
                t.dst,
            )
        )
    finals = {q: tuple(subst_guard(g, mp) for g in gs) for q, gs in T.finals.items()}
    return replace(T, transitions=list(dict.fromkeys(trans)), finals=finals, registers=tuple(m[r].ref for r in used))


# -- basic transducers -----------------------------------------------------


def identity_transducer(domain: DataDomain | None = None) -> Transducer:
    """Single state copying each input letter to the output."""
    return Transducer(1, 0, {0: TRUE_FINAL}, [Transition(0, ("in",), frozenset(), (), tape("in"), 0)], domain=domain)


def absorb_transducer(domain: DataDomain | None = None) -> Transducer:
    """Reads anything, writes nothing."""
    return Transducer(1, 0, {0: TRUE_FINAL}, [Transition(0, ("in",), frozenset(), (), None, 0)], domain=domain)


def projection_transducer(proj: str, domain: DataDomain) -> Transducer:
    """Maps each letter through ``proj``; empty letters produce no output."""
    p = tape("in", (proj,))
    if proj in domain.nonempty:
        trans = [Transition(0, ("in",), frozenset(), (), p, 0)]
    else:
        trans = [
            Transition(0, ("in",), frozenset({ne(p, EPS_TERM)}), (), p, 0),
            Transition(0, ("in",), frozenset({eq(p, EPS_TERM)}), (), None, 0),
        ]
    return Transducer(1, 0, {0: TRUE_FINAL}, trans, domain=domain)


def epsilon_transducer(domain=None) -> Transducer:
    return Transducer(1, 0, {0: TRUE_FINAL}, [], domain=domain)


def emit_transducer(value: Any, domain=None) -> Transducer:
    return Transducer(2, 0, {1: TRUE_FINAL}, [Transition(0, (), frozenset(), (), const(value), 1)], domain=domain)


def stutter_transducer(domain=None) -> Transducer:
    """One register remembers the last emitted letter; repeats are swallowed."""
    x, r = tape("in"), reg("r")
    trans = [
        Transition(0, ("in",), frozenset(), (("r", x),), x, 1),
        Transition(1, ("in",), frozenset({eq(r, x)}), (), None, 1),
        Transition(1, ("in",), frozenset({ne(r, x)}), (("r", x),), x, 1),
    ]
    return Transducer(2, 0, {0: TRUE_FINAL, 1: TRUE_FINAL}, trans, ("r",), domain=domain)


def slice_transducer(k: int, m: int, domain=None) -> Transducer:
    """Skip ``k`` letters, copy ``m + 1``, swallow the rest.

    Shorter inputs are rejected.
    """
    if k < 0 or m < 0:
        raise PreconditionError("slice bounds must be non-negative")
    x = tape("in")
    trans = []
    for q in range(k):
        trans.append(Transition(q, ("in",), frozenset(), (), None, q + 1))
    for q in range(k, k + m + 1):
        trans.append(Transition(q, ("in",), frozenset(), (), x, q + 1))
    last = k + m + 1
    trans.append(Transition(last, ("in",), frozenset(), (), None, last))
    return Transducer(last + 1, 0, {last: TRUE_FINAL}, trans, domain=domain)


class _Chain:
    """Tiny builder for the line-shaped transducers used by slicing."""

    def __init__(self):
        self.n = 1
        self.trans: list[Transition] = []
        self.finals: dict[int, tuple] = {}

    def new(self) -> int:
        self.n += 1
        return self.n - 1

    def step(self, q: int, copy: bool, dst: int | None = None) -> int:
        d = self.new() if dst is None else dst
        self.trans.append(Transition(q, ("in",), frozenset(), (), tape("in") if copy else None, d))
        return d

    def run(self, q: int, count: int, copy: bool) -> int:
        for _ in range(count):
            q = self.step(q, copy)
        return q

    def loop(self, q: int, copy: bool) -> None:
        self.step(q, copy, q)

    def final(self, q: int) -> None:
        self.finals[q] = TRUE_FINAL

    def done(self, domain) -> Transducer:
        return Transducer(self.n, 0, dict(self.finals), self.trans, domain=domain)


def slice_total(i: int, j: int, domain=None) -> Transducer:
    """Exact slice ``[i:j]`` for any signs, empty output when out of range.

    Branches are guessed nondeterministically; each branch checks the input
    length it assumed, so exactly one branch accepts a given input.
    """
    parts: list[Transducer] = []

    def short_words(limit: int) -> Transducer:
        # accepts inputs of length < limit, emitting nothing
        c = _Chain()
        q = 0
        for _ in range(max(limit, 0)):
            c.final(q)
            q = c.step(q, False) if _ < limit - 1 else q
        if limit > 0:
            c.final(q)
        return c.done(domain)

    if i >= 0 and j >= 0:
        if i > j:
            return absorb_transducer(domain)
        c = _Chain()
        q = c.run(0, i, False)
        q = c.run(q, j - i + 1, True)
        c.loop(q, False)
        c.final(q)
        parts.append(c.done(domain))
        parts.append(short_words(j + 1))
    elif i < 0 and j < 0:
        if i > j:
            return absorb_transducer(domain)
        c = _Chain()
        c.loop(0, False)
        q = c.run(0, j - i + 1, True)
        q = c.run(q, -j - 1, False)
        c.final(q)
        parts.append(c.done(domain))
        parts.append(short_words(-i))
    elif i >= 0 > j:
        # valid when n >= i - j: copy n + j - i + 1 >= 1 letters after skipping i
        c = _Chain()
        q = c.run(0, i, False)
        q = c.step(q, True)
        c.loop(q, True)
        q = c.run(q, -j - 1, False)
        c.final(q)
        parts.append(c.done(domain))
        parts.append(short_words(i - j))
    else:
        # i < 0 <= j: valid lengths n in [max(-i, j + 1), j - i]
        lo, hi = max(-i, j + 1), j - i
        for n in range(lo, hi + 1):
            c = _Chain()
            q = c.run(0, n + i, False)
            q = c.run(q, j - (n + i) + 1, True)
            q = c.run(q, n - j - 1, False)
            c.final(q)
            parts.append(c.done(domain))
        c = _Chain()
        q = 0
        states = [0]
        for _ in range(hi + 1):
            q = c.step(q, False)
            states.append(q)
        c.loop(states[-1], False)
        for n, s in enumerate(states):
            if not (lo <= n <= hi):
                c.final(s)
        parts.append(c.done(domain))
    result = parts[0]
    for p in parts[1:]:
        result = union(result, p)
    return result


# -- regular combinators ---------------------------------------------------


def _disjoint(T1: Transducer, T2: Transducer) -> tuple[Transducer, Transducer]:
    return rename_registers(T1, "a"), rename_registers(T2, "b")


def _shift(T: Transducer, k: int) -> tuple[list[Transition], dict]:
    trans = [replace(t, src=t.src + k, dst=t.dst + k) for t in T.transitions]
    finals = {q + k: g for q, g in T.finals.items()}
    return trans, finals


def union(T1: Transducer, T2: Transducer) -> Transducer:
    """Relation union."""
    A, B = _disjoint(T1, T2)
    ta, fa = _shift(A, 1)
    tb, fb = _shift(B, 1 + A.n_states)
    trans = ta + tb
    trans.append(Transition(0, (), frozenset(), (), None, A.initial + 1))
    trans.append(Transition(0, (), frozenset(), (), None, B.initial + 1 + A.n_states))
    finals = {**fa, **fb}
    T = Transducer(1 + A.n_states + B.n_states, 0, finals, trans, A.registers + B.registers, domain=_fresh_domain(T1, T2))
    return clean(T)


def concat(T1: Transducer, T2: Transducer) -> Transducer:
    """Split the input in two, transduce each half, concatenate the outputs."""
    A, B = _disjoint(T1, T2)
    ta, _ = _shift(A, 0)
    tb, fb = _shift(B, A.n_states)
    trans = ta + tb
    for q, gs in A.finals.items():
        for g in gs:
            trans.append(Transition(q, (), g, (), None, B.initial + A.n_states))
    T = Transducer(A.n_states + B.n_states, A.initial, fb, trans, A.registers + B.registers, domain=_fresh_domain(T1, T2))
    return clean(T)


def star(T1: Transducer) -> Transducer:
    """Kleene iteration; registers are reset between rounds."""
    A = rename_registers(T1, "a")
    ta, _ = _shift(A, 1)
    trans = list(ta)
    trans.append(Transition(0, (), frozenset(), (), None, A.initial + 1))
    reset = tuple((r, UNSET_TERM) for r in A.registers)
    for q, gs in A.finals.items():
        for g in gs:
            trans.append(Transition(q + 1, (), g, reset, None, 0))
    T = Transducer(1 + A.n_states, 0, {0: TRUE_FINAL}, trans, A.registers, domain=T1.domain)
    return clean(T)


# -- epsilon elimination, pruning, merging ---------------------------------


def _compose_subst(sigma: dict[str, Term], updates) -> dict[str, Term]:
    mp = _reg_map(sigma)
    out = dict(sigma)
    for r, v in updates:
        out[r] = subst_term(v, mp)
    return out


def _freeze_sigma(sigma: dict[str, Term]) -> tuple:
    return tuple(sorted(((r, v) for r, v in sigma.items() if not (v.kind == "reg" and v.ref == r and not v.projs)), key=lambda x: x[0]))


def eliminate_epsilon(T: Transducer) -> Transducer:
    """Remove transitions that neither read nor write, preserving the relation.

    For every state, all guarded ε/ε paths are summarised as (target,
    accumulated guard, register substitution) and folded into the next
    non-silent transition or into a final condition.
    """
    if not T.has_eps_eps():
        return T
    RULE_HITS["eps-elim"] += 1
    dom = T.domain
    out = T.outgoing()
    new_trans: list[Transition] = []
    new_finals: dict[int, list] = defaultdict(list)
    for q in range(T.n_states):
        start = (q, frozenset(), ())
        seen = {start}
        work = [start]
        while work:
            s, C, sig = work.pop()
            sigma = dict(sig)
            mp = _reg_map(sigma)
            for g in T.finals.get(s, ()):
                G = C | subst_guard(g, mp)
                if satisfiable(G, dom):
                    new_finals[q].append(G)
            for t in out[s]:
                G = C | subst_guard(t.guard, mp)
                if not satisfiable(G, dom):
                    continue
                if t.is_eps_eps:
                    nsig = _freeze_sigma(_compose_subst(sigma, t.updates))
                    item = (t.dst, G, nsig)
                    if item not in seen:
                        seen.add(item)
                        work.append(item)
                else:
                    ups = _freeze_sigma(_compose_subst(sigma, t.updates))
                    o = subst_term(t.out, mp) if t.out is not None else None
                    new_trans.append(Transition(q, t.reads, G, ups, o, t.dst))
    finals = {q: tuple(dict.fromkeys(gs)) for q, gs in new_finals.items()}
    return replace(T, transitions=list(dict.fromkeys(new_trans)), finals=finals)


def prune(T: Transducer) -> Transducer:
    """Keep only states reachable from the start that can still reach acceptance."""
    fwd = {T.initial}
    succ = defaultdict(set)
    pred = defaultdict(set)
    for t in T.transitions:
        succ[t.src].add(t.dst)
        pred[t.dst].add(t.src)
    work = [T.initial]
    while work:
        q = work.pop()
        for d in succ[q]:
            if d not in fwd:
                fwd.add(d)
                work.append(d)
    bwd = {q for q, gs in T.finals.items() if gs}
    work = list(bwd)
    while work:
        q = work.pop()
        for s in pred[q]:
            if s not in bwd:
                bwd.add(s)
                work.append(s)
    live = fwd & bwd
    if T.initial not in live:
        return Transducer(1, 0, {}, [], (), T.tapes, T.domain)
    order = sorted(live, key=lambda q: (q != T.initial, q))
    idx = {q: i for i, q in enumerate(order)}
    trans = [replace(t, src=idx[t.src], dst=idx[t.dst]) for t in T.transitions if t.src in idx and t.dst in idx]
    finals = {idx[q]: gs for q, gs in T.finals.items() if q in idx and gs}
    return replace(T, n_states=len(order), initial=0, transitions=trans, finals=finals)


def merge_states(T: Transducer) -> Transducer:
    """Merge states with identical behaviour by partition refinement."""
    out = T.outgoing()
    fin = {q: frozenset(T.finals.get(q, ())) for q in range(T.n_states)}
    cls = {}
    keys: dict = {}
    for q in range(T.n_states):
        cls[q] = keys.setdefault(fin[q], len(keys))
    while True:
        sigs: dict = {}
        new = {}
        for q in range(T.n_states):
            sig = (
                cls[q],
                frozenset((t.reads, t.guard, t.updates, t.out, cls[t.dst]) for t in out[q]),
            )
            new[q] = sigs.setdefault(sig, len(sigs))
        if len(sigs) == len(set(cls.values())):
            break
        cls = new
    if len(set(cls.values())) == T.n_states:
        return T
    rep: dict[int, int] = {}
    for q in range(T.n_states):
        rep.setdefault(cls[q], q)
    order = sorted(rep, key=lambda c: (c != cls[T.initial], rep[c]))
    idx = {c: i for i, c in enumerate(order)}
    trans = list(
        dict.fromkeys(replace(t, src=idx[cls[t.src]], dst=idx[cls[t.dst]]) for t in T.transitions)
    )
    finals = {}
    for q, gs in T.finals.items():
        finals[idx[cls[q]]] = gs
    return replace(T, n_states=len(order), initial=0, transitions=trans, finals=finals)


def clean(T: Transducer) -> Transducer:
    return normalize_registers(merge_states(prune(eliminate_epsilon(T))))


# -- sequential composition ------------------------------------------------


def compose_sequential(T: Transducer, U: Transducer) -> Transducer:
    """The transducer for ``U(T)``: feed the output of ``T`` into ``U``.

    Both operands must be free of ε/ε transitions.  Composite transitions
    whose guards are unsatisfiable are dropped.
    """
    if T.has_eps_eps() or U.has_eps_eps():
        raise PreconditionError("sequential composition needs operands without ε/ε transitions")
    A, B = _disjoint(T, U)
    dom = _fresh_domain(T, U)
    oa, ob = A.outgoing(), B.outgoing()
    index: dict[tuple[int, int], int] = {}
    work: deque = deque()

    def state(p, q) -> int:
        key = (p, q)
        if key not in index:
            index[key] = len(index)
            work.append(key)
        return index[key]

    state(A.initial, B.initial)
    trans: list[Transition] = []
    while work:
        p, q = work.popleft()
        src = index[(p, q)]
        for t1 in oa[p]:
            if t1.out is not None:
                mp = {("in", "in"): t1.out}
                for t2 in ob[q]:
                    if not t2.reads:
                        continue
                    G = t1.guard | subst_guard(t2.guard, mp)
                    if not satisfiable(G, dom):
                        RULE_HITS["INP-unsat"] += 1
                        continue
                    RULE_HITS["INP"] += 1
                    o = subst_term(t2.out, mp) if t2.out is not None else None
                    ups = t1.updates + subst_updates(t2.updates, mp)
                    trans.append(Transition(src, t1.reads, G, ups, o, state(t1.dst, t2.dst)))
            else:
                RULE_HITS["INP-EPS"] += 1
                trans.append(Transition(src, t1.reads, t1.guard, t1.updates, None, state(t1.dst, q)))
        for t2 in ob[q]:
            if t2.reads:
                continue
            # the second transducer emits without consuming anything
            RULE_HITS["EPS-R"] += 1
            trans.append(Transition(src, (), t2.guard, t2.updates, t2.out, state(p, t2.dst)))
    finals: dict[int, tuple] = {}
    for (p, q), s in index.items():
        if p in A.finals and q in B.finals:
            gs = []
            for g1 in A.finals[p]:
                for g2 in B.finals[q]:
                    G = g1 | g2
                    if satisfiable(G, dom):
                        gs.append(G)
            if gs:
                finals[s] = tuple(gs)
    R = Transducer(len(index), 0, finals, trans, A.registers + B.registers, A.tapes, dom)
    return clean(R)


# -- from trace formulas ---------------------------------------------------


def from_regex(tf: TraceFormula, domain: DataDomain | None = None) -> Transducer:
    """Emitter for a variable-free trace formula: reads nothing, writes its words."""
    if trace_vars(tf):
        raise UnsupportedFragmentError(f"{pretty_trace(tf)} mentions a trace variable")
    return compile_trace_formula(tf, domain)


def compile_trace_formula(tf: TraceFormula, domain: DataDomain | None) -> Transducer:
    """Transducer reading the trace of the (single) variable of ``tf``."""
    if isinstance(tf, Epsilon):
        return epsilon_transducer(domain)
    if isinstance(tf, Const):
        return emit_transducer(tf.value, domain)
    if isinstance(tf, Proj):
        if domain is None:
            raise PreconditionError("projections need a data domain")
        return projection_transducer(tf.proj, domain)
    if isinstance(tf, Slice):
        return compose_sequential(compile_trace_formula(tf.body, domain), slice_total(tf.i, tf.j, domain))
    if isinstance(tf, Stutter):
        return compose_sequential(compile_trace_formula(tf.body, domain), stutter_transducer(domain))
    if isinstance(tf, Star):
        if trace_vars(tf.body):
            raise UnsupportedFragmentError("trace variable under iteration")
        return star(compile_trace_formula(tf.body, domain))
    if isinstance(tf, Concat):
        if trace_vars(tf.left) and trace_vars(tf.right):
            raise UnsupportedFragmentError("trace variable on both sides of a concatenation")
        return concat(compile_trace_formula(tf.left, domain), compile_trace_formula(tf.right, domain))
    if isinstance(tf, Union_):
        a = compile_trace_formula(tf.left, domain)
        b = compile_trace_formula(tf.right, domain)
        # a branch that ignores the trace must still accept all of it
        if trace_vars(tf) and not trace_vars(tf.left):
            a = concat(a, absorb_transducer(domain))
        if trace_vars(tf) and not trace_vars(tf.right):
            b = concat(b, absorb_transducer(domain))
        return union(a, b)
    raise TypeError(f"not a trace formula: {tf!r}")


# -- concrete runs (used for testing and brute-force checks) -------------


class _Eval:
    """Evaluates terms and guards against concrete letters and registers."""

    def __init__(self, domain: DataDomain | None):
        self.domain = domain

    def term(self, t: Term, letters: dict, regs: dict) -> Any:
        if t.kind == "in":
            v = letters[t.ref]
        elif t.kind == "reg":
            v = regs.get(t.ref, UNSET)
        else:
            v = t.ref
        for p in t.projs:
            if v is UNSET or v is EPS:
                return v
            v = self.domain.apply(p, v)
        return v

    def guard(self, g: Constraint, letters, regs) -> bool:
        for a in g:
            if (self.term(a.a, letters, regs) == self.term(a.b, letters, regs)) != a.eq:
                return False
        return True


def transduce(T: Transducer, word: Sequence, max_out: int = 8, max_steps: int = 100000) -> set[tuple]:
    """All outputs (up to ``max_out`` letters) of accepting runs on ``word``."""
    ev = _Eval(T.domain)
    out = T.outgoing()
    results: set[tuple] = set()
    start = (T.initial, 0, (), ())
    seen = {start}
    stack = [start]
    steps = 0
    tape_name = T.tapes[0] if T.tapes else "in"
    while stack and steps < max_steps:
        steps += 1
        q, pos, regs_t, y = stack.pop()
        regs = dict(regs_t)
        if pos == len(word):
            for g in T.finals.get(q, ()):
                if ev.guard(g, {}, regs):
                    results.add(y)
                    break
        for t in out[q]:
            letters = {}
            if t.reads:
                if pos >= len(word):
                    continue
                letters[tape_name] = word[pos]
            if not ev.guard(t.guard, letters, regs):
                continue
            o = ev.term(t.out, letters, regs) if t.out is not None else None
            ny = y + (o,) if t.out is not None else y
            if len(ny) > max_out:
                continue
            nregs = dict(regs)
            for r, v in t.updates:
                nregs[r] = ev.term(v, letters, regs)
            item = (t.dst, pos + (1 if t.reads else 0), tuple(sorted(nregs.items(), key=lambda kv: kv[0])), ny)
            if item not in seen:
                seen.add(item)
                stack.append(item)
    return results


# ---------------------------------------------------------------------------
# prefix automata


@dataclass
class PrefixAutomaton:
    """Two-tape register automaton accepting ``(w1, w2)`` when some output of
    the left transducer on ``w1`` is a prefix of some output of the right one
    on ``w2``.

    ``sync`` is the product built with the LR, L-eps and R-eps rules; its
    final states are those whose left component is final.  ``right`` is the
    right operand itself, used to consume the remainder of the right tape
    once the left output is complete.
    """

    sync: Transducer
    right: Transducer
    pairs: list[tuple[int, int]]
    left: Transducer
    atom: Leq | None = None
    left_var: str | None = None
    right_var: str | None = None
    domain: DataDomain | None = None

    def __post_init__(self):
        self._compiled = None

    @property
    def registers(self) -> tuple[str, ...]:
        return self.sync.registers

    def live_states(self) -> int:
        return self.sync.n_states

    def dump(self) -> str:
        head = []
        if self.atom is not None:
            head.append(f"# atom: {pretty_trace(self.atom.left)} <= {pretty_trace(self.atom.right)}")
        head.append(f"# left tape L = {self.left_var or '-'}, right tape R = {self.right_var or '-'}")
        body = self.sync.dump().replace("transducer", "automaton", 1)
        pairs = " ".join(f"{i}=({p},{q})" for i, (p, q) in enumerate(self.pairs))
        tail = self.right.dump().replace("transducer", "right-tail", 1)
        return "\n".join(head + [body, f"pairs {pairs}", tail])

    def compiled(self):
        if self._compiled is None:
            self._compiled = _compile_runtime(self)
        return self._compiled

    def holds(self, env) -> bool:
        """Acceptance on the complete traces assigned by ``env``."""
        left = env[self.left_var] if self.left_var else None
        right = env[self.right_var] if self.right_var else None
        r = AtomRun(self, left, right).advance()
        assert r is not None, "traces must be terminated"
        return r

    def accepts(self, w1: Sequence, w2: Sequence) -> bool:
        """Batch acceptance on two complete words of letters."""
        left = Trace.of("L", [], True)
        left.events = list(w1)
        right = Trace.of("R", [], True)
        right.events = list(w2)
        run = AtomRun(self, left, right)
        r = run.advance()
        assert r is not None
        return r


def prefix_product(T1: Transducer, T2: Transducer):
    """Product of two single-tape transducers synchronised on their outputs.

    Returns the product, its state pairs and both renamed operands.
    """
    A = rename_registers(rename_tape(T1, "in", "L"), "l")
    B = rename_registers(rename_tape(T2, "in", "R"), "r")
    dom = _fresh_domain(T1, T2)
    oa, ob = A.outgoing(), B.outgoing()
    index: dict[tuple[int, int], int] = {}
    work: deque = deque()

    def state(p, q):
        if (p, q) not in index:
            index[(p, q)] = len(index)
            work.append((p, q))
        return index[(p, q)]

    state(A.initial, B.initial)
    trans = []
    while work:
        p, q = work.popleft()
        src = index[(p, q)]
        for t1 in oa[p]:
            if t1.out is None:
                RULE_HITS["L-eps"] += 1
                trans.append(Transition(src, t1.reads, t1.guard, t1.updates, None, state(t1.dst, q)))
                continue
            for t2 in ob[q]:
                if t2.out is None:
                    continue
                G = t1.guard | t2.guard | {eq(t1.out, t2.out)}
                if not satisfiable(G, dom):
                    RULE_HITS["LR-unsat"] += 1
                    continue
                RULE_HITS["LR"] += 1
                trans.append(
                    Transition(src, t1.reads + t2.reads, frozenset(G), t1.updates + t2.updates, None, state(t1.dst, t2.dst))
                )
        for t2 in ob[q]:
            if t2.out is None:
                RULE_HITS["R-eps"] += 1
                trans.append(Transition(src, t2.reads, t2.guard, t2.updates, None, state(p, t2.dst)))
    pairs = [None] * len(index)
    for k, v in index.items():
        pairs[v] = k
    finals = {s: A.finals[p] for s, (p, q) in enumerate(pairs) if p in A.finals}
    P = Transducer(len(index), 0, finals, trans, A.registers + B.registers, ("L", "R"), dom)
    return P, pairs, A, B


def compile_atom(atom: Leq, domain: DataDomain | None) -> PrefixAutomaton:
    """Compile ``left <= right`` into a :class:`PrefixAutomaton`."""
    for side in (atom.left, atom.right):
        why = simple_violation(side)
        if why:
            raise UnsupportedFragmentError(f"cannot compile {pretty_trace(side)}: {why}")
    T1 = compile_trace_formula(atom.left, domain)
    T2 = compile_trace_formula(atom.right, domain)
    lv = trace_vars(atom.left)
    rv = trace_vars(atom.right)
    return prefix_automaton(T1, T2, atom, next(iter(lv)) if lv else None, next(iter(rv)) if rv else None, domain)


def prefix_automaton(
    T1: Transducer,
    T2: Transducer,
    atom: Leq | None = None,
    left_var: str | None = None,
    right_var: str | None = None,
    domain: DataDomain | None = None,
) -> PrefixAutomaton:
    """Accepts ``(w1, w2)`` iff some ``T1(w1)`` is a prefix of some ``T2(w2)``."""
    P, pairs, A, B = prefix_product(T1, T2)
    P, pairs = _prune_product(P, pairs)
    # the right operand keeps the product's register names so both phases share values
    rename: dict[str, str] = {}
    P = normalize_registers(P, names_out=rename)
    Bn = _apply_register_names(B, rename)
    return PrefixAutomaton(P, Bn, pairs, T1, atom, left_var, right_var, domain if domain is not None else P.domain)


def _prune_product(P: Transducer, pairs):
    """Drop product states from which no final state is reachable.

    Product states are kept even when they are not left-final-reachable if
    nothing else can happen; acceptance needs a left-final state, so other
    states are dead.
    """
    before = P.n_states
    succ = defaultdict(set)
    pred = defaultdict(set)
    for t in P.transitions:
        succ[t.src].add(t.dst)
        pred[t.dst].add(t.src)
    fwd = {P.initial}
    work = [P.initial]
    while work:
        q = work.pop()
        for d in succ[q]:
            if d not in fwd:
                fwd.add(d)
                work.append(d)
    bwd = set(P.finals)
    work = list(bwd)
    while work:
        q = work.pop()
        for s in pred[q]:
            if s not in bwd:
                bwd.add(s)
                work.append(s)
    live = fwd & bwd
    if P.initial not in live:
        return Transducer(1, 0, {}, [], (), P.tapes, P.domain), [pairs[P.initial]]
    order = sorted(live, key=lambda q: (q != P.initial, q))
    idx = {q: i for i, q in enumerate(order)}
    trans = [replace(t, src=idx[t.src], dst=idx[t.dst]) for t in P.transitions if t.src in idx and t.dst in idx]
    finals = {idx[q]: g for q, g in P.finals.items() if q in idx}
    del before
    return replace(P, n_states=len(order), initial=0, transitions=trans, finals=finals), [pairs[q] for q in order]


def _apply_register_names(B: Transducer, names: dict[str, str]) -> Transducer:
    extra = [r for r in B.registers if r not in names]
    full = dict(names)
    for k, r in enumerate(extra):
        full[r] = f"t{k}"
    mp = _reg_map({r: reg(n) for r, n in full.items()})
    trans = [
        Transition(
            t.src,
            t.reads,
            subst_guard(t.guard, mp),
            tuple((full[r], subst_term(v, mp)) for r, v in t.updates),
            subst_term(t.out, mp) if t.out is not None else None,
            t.dst,
        )
        for t in B.transitions
    ]
    finals = {q: tuple(subst_guard(g, mp) for g in gs) for q, gs in B.finals.items()}
    return replace(B, transitions=trans, finals=finals, registers=tuple(full[r] for r in B.registers))


# ---------------------------------------------------------------------------
# runtime


def _term_fn(t: Term, regidx: dict[str, int], domain: DataDomain | None):
    if t.kind == "in":
        if t.ref == "L":
            def base(L, R, g):
                return L
        else:
            def base(L, R, g):
                return R
    elif t.kind == "reg":
        i = regidx[t.ref]

        def base(L, R, g):
            return g[i]
    else:
        c = t.ref
        if t.projs and domain is not None and c is not EPS and c is not UNSET:
            for p in t.projs:
                c = domain.apply(p, c)
        c2 = c

        def fn(L, R, g):
            return c2

        return fn
    if not t.projs:
        return base
    fns = [domain.projections[p] for p in t.projs]
    if len(fns) == 1:
        f0 = fns[0]

        def proj1(L, R, g):
            v = base(L, R, g)
            if v is UNSET or v is EPS:
                return v
            return f0(v)

        return proj1

    def projn(L, R, g):
        v = base(L, R, g)
        for f in fns:
            if v is UNSET or v is EPS:
                return v
            v = f(v)
        return v

    return projn


def _guard_fn(g: Constraint, regidx, domain):
    if not g:
        return None
    checks = [(a.eq, _term_fn(a.a, regidx, domain), _term_fn(a.b, regidx, domain)) for a in sorted(g, key=str)]
    if len(checks) == 1:
        e, f1, f2 = checks[0]
        if e:
            return lambda L, R, regs: f1(L, R, regs) == f2(L, R, regs)
        return lambda L, R, regs: f1(L, R, regs) != f2(L, R, regs)

    def guard(L, R, regs):
        for e, f1, f2 in checks:
            if (f1(L, R, regs) == f2(L, R, regs)) != e:
                return False
        return True

    return guard


def _update_fn(updates, regidx, domain):
    if not updates:
        return None
    ups = [(regidx[r], _term_fn(v, regidx, domain)) for r, v in updates if r in regidx]
    if not ups:
        return None

    def update(L, R, regs):
        new = list(regs)
        for i, f in ups:
            new[i] = f(L, R, regs)
        return tuple(new)

    return update


def _finals_fn(gs, regidx, domain):
    if gs is None:
        return None
    fns = [_guard_fn(g, regidx, domain) for g in gs]
    if any(f is None for f in fns):
        return True
    return fns


@dataclass
class _Runtime:
    n_regs: int
    sync: list  # per state: list of (readL, readR, guard, update, dst)
    sync_final: list  # per state: None | True | [guards]
    right_of: list  # product state -> right state
    right: list  # per right state: list of (readR, guard, update, dst)
    right_final: list
    tail_free: list


def _compile_runtime(A: PrefixAutomaton) -> _Runtime:
    regs = list(A.sync.registers)
    for r in A.right.registers:
        if r not in regs:
            regs.append(r)
    regidx = {r: i for i, r in enumerate(regs)}
    dom = A.domain
    sync = [[] for _ in range(A.sync.n_states)]
    for t in A.sync.transitions:
        sync[t.src].append(
            ("L" in t.reads, "R" in t.reads, _guard_fn(t.guard, regidx, dom), _update_fn(t.updates, regidx, dom), t.dst)
        )
    sync_final = [_finals_fn(A.sync.finals.get(q), regidx, dom) for q in range(A.sync.n_states)]
    right = [[] for _ in range(A.right.n_states)]
    for t in A.right.transitions:
        right[t.src].append(("R" in t.reads, _guard_fn(t.guard, regidx, dom), _update_fn(t.updates, regidx, dom), t.dst))
    right_final = [_finals_fn(A.right.finals.get(q), regidx, dom) for q in range(A.right.n_states)]
    tail_free = [_is_tail_free(A.right, q) for q in range(A.right.n_states)]
    right_of = [q for (_, q) in A.pairs]
    return _Runtime(len(regs), sync, sync_final, right_of, right, right_final, tail_free)


def _is_tail_free(T: Transducer, q: int) -> bool:
    """True when ``q`` accepts whatever the rest of the input is."""
    if TRUE_FINAL[0] not in T.finals.get(q, ()):
        return False
    loops = [t for t in T.transitions if t.src == q and t.dst == q and t.reads]
    if any(not t.guard for t in loops):
        return True
    singles = {next(iter(t.guard)) for t in loops if len(t.guard) == 1}
    return any(a.negated() in singles for a in singles)


def _final_ok(f, regs) -> bool:
    if f is None:
        return False
    if f is True:
        return True
    return any(g(None, None, regs) for g in f)


class AtomRun:
    """Incremental evaluation of one prefix automaton on two growing traces.

    ``advance`` consumes whatever is available and returns ``True`` (some run
    accepts), ``False`` (no run can accept any more) or ``None`` (waiting for
    more letters or for a tape to terminate).
    """

    __slots__ = ("A", "rt", "left", "right", "stack", "visited", "waiting", "result", "expansions", "_seen_len")

    def __init__(self, A: PrefixAutomaton, left: Trace | None, right: Trace | None):
        self.A = A
        self.rt = A.compiled()
        self.left = left if left is not None else _EMPTY
        self.right = right if right is not None else _EMPTY
        init = (0, 0, (UNSET,) * self.rt.n_regs, 0, 0)
        self.stack = [init]
        self.visited = {init}
        self.waiting: list = []
        self.result: bool | None = None
        self.expansions = 0
        self._seen_len = (-1, False, -1, False)

    def frontier(self) -> list[tuple]:
        return list(self.stack) + list(self.waiting)

    def advance(self, budget: int | None = None) -> bool | None:
        if self.result is not None:
            return self.result
        left, right, rt = self.left, self.right, self.rt
        Lev, Rev = left.events, right.events
        snap = (len(Lev), left.terminated, len(Rev), right.terminated)
        if self.waiting and snap != self._seen_len:
            self.stack.extend(self.waiting)
            self.waiting = []
        self._seen_len = snap
        nL, Lterm, nR, Rterm = snap
        stack, visited, waiting = self.stack, self.visited, self.waiting
        steps = 0
        while stack:
            if budget is not None and steps >= budget:
                return None
            steps += 1
            self.expansions += 1
            c = stack.pop()
            mode, s, regs, pl, pr = c
            blocked = False
            if mode == 0:
                Lv = Lev[pl] if pl < nL else None
                Rv = Rev[pr] if pr < nR else None
                if pl == nL:
                    if Lterm:
                        if _final_ok(rt.sync_final[s], regs):
                            q = rt.right_of[s]
                            if rt.tail_free[q]:
                                self.result = True
                                return True
                            t = (1, q, regs, pl, pr)
                            if t not in visited:
                                visited.add(t)
                                stack.append(t)
                    else:
                        blocked = True
                for readL, readR, guard, update, dst in rt.sync[s]:
                    if readL and Lv is None:
                        continue
                    if readR and Rv is None:
                        if not Rterm:
                            blocked = True
                        continue
                    if guard is not None and not guard(Lv, Rv, regs):
                        continue
                    nregs = update(Lv, Rv, regs) if update is not None else regs
                    n = (0, dst, nregs, pl + readL, pr + readR)
                    if n not in visited:
                        visited.add(n)
                        stack.append(n)
            else:
                Rv = Rev[pr] if pr < nR else None
                if pr == nR:
                    if Rterm:
                        if _final_ok(rt.right_final[s], regs):
                            self.result = True
                            return True
                    else:
                        blocked = True
                for readR, guard, update, dst in rt.right[s]:
                    if readR and Rv is None:
                        continue
                    if guard is not None and not guard(None, Rv, regs):
                        continue
                    nregs = update(None, Rv, regs) if update is not None else regs
                    n = (1, dst, nregs, pl, pr + readR)
                    if n not in visited:
                        visited.add(n)
                        stack.append(n)
            if blocked:
                waiting.append(c)
        if not waiting:
            self.result = False
            return False
        return None


class _EmptyTrace:
    events: list = []
    terminated = True


_EMPTY = _EmptyTrace()


def accepts(A: PrefixAutomaton, w1: Sequence, w2: Sequence) -> bool:
    return A.accepts(w1, w2)


def relation(T: Transducer, alphabet: Sequence, max_in: int = 3, max_out: int = 6) -> set[tuple]:
    """Enumerated relation ``{(w, y)}`` of a single-tape transducer."""
    rel = set()
    for n in range(max_in + 1):
        for w in itertools.product(alphabet, repeat=n):
            for y in transduce(T, list(w), max_out):
                rel.add((tuple(w), y))
    return rel
