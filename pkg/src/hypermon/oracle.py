"""Brute-force reference semantics over finite sets of terminated traces.

Everything here is deliberately naive: trace formulas evaluate to explicit
sets of words, quantifiers enumerate, and Kleene star is unrolled up to a
length bound.  It exists to cross-check the monitor and the automata.
"""
from __future__ import annotations

import itertools
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass

from .errors import SpecificationError
from .formula import (
    And,
    Concat,
    Const,
    Epsilon,
    Exists,
    Forall,
    Formula,
    Leq,
    Not,
    Proj,
    Quantifier,
    Slice,
    Star,
    Stutter,
    TraceFormula,
    Union_,
    atoms,
    free_vars,
    passive,
    trace_vars,
)
from .trace_model import DataDomain, Trace, is_prefix, project, slice_word, stutter_reduce

Assignment = Mapping[str, Trace]
GeneratorInterp = Mapping[str, Callable[..., Iterable[Trace]]]


def _size(tf: TraceFormula, env: Assignment, domain: DataDomain) -> int:
    """Number of letter positions in ``tf`` once variables are substituted."""
    if isinstance(tf, Const):
        return 1
    if isinstance(tf, Proj):
        return len(project(env[tf.var], tf.proj, domain))
    if isinstance(tf, Slice):
        return _size(tf.body, env, domain) + abs(tf.i) + abs(tf.j) + 1
    if isinstance(tf, Star | Stutter):
        return _size(tf.body, env, domain)
    if isinstance(tf, Concat | Union_):
        return _size(tf.left, env, domain) + _size(tf.right, env, domain)
    return 0


def default_star_bound(atom: Leq, env: Assignment, domain: DataDomain) -> int:
    """Length bound for unrolling stars inside one comparison.

    Sized from the letters the atom can see; a configurable knob on
    :func:`evaluate` overrides it.
    """
    n1 = _size(atom.left, env, domain)
    n2 = _size(atom.right, env, domain)
    return n1 + n2 + 1


def eval_trace_formula(
    tf: TraceFormula, env: Assignment, domain: DataDomain, star_bound: int = 8
) -> frozenset[tuple]:
    """The set of words denoted by ``tf`` (stars cut at ``star_bound`` letters)."""
    if isinstance(tf, Epsilon):
        return frozenset({()})
    if isinstance(tf, Const):
        return frozenset({(tf.value,)})
    if isinstance(tf, Proj):
        if tf.var not in env:
            raise SpecificationError(f"trace variable '{tf.var}' is not assigned")
        return frozenset({project(env[tf.var], tf.proj, domain)})
    if isinstance(tf, Slice):
        return frozenset(slice_word(w, tf.i, tf.j) for w in eval_trace_formula(tf.body, env, domain, star_bound))
    if isinstance(tf, Stutter):
        return frozenset(stutter_reduce(w) for w in eval_trace_formula(tf.body, env, domain, star_bound))
    if isinstance(tf, Concat):
        a = eval_trace_formula(tf.left, env, domain, star_bound)
        b = eval_trace_formula(tf.right, env, domain, star_bound)
        return frozenset(x + y for x in a for y in b)
    if isinstance(tf, Union_):
        return eval_trace_formula(tf.left, env, domain, star_bound) | eval_trace_formula(
            tf.right, env, domain, star_bound
        )
    if isinstance(tf, Star):
        base = [w for w in eval_trace_formula(tf.body, env, domain, star_bound) if len(w) <= star_bound]
        result = {()}
        frontier = {()}
        while frontier:
            nxt = set()
            for u in frontier:
                for w in base:
                    v = u + w
                    if len(v) <= star_bound and v not in result:
                        nxt.add(v)
            result |= nxt
            frontier = nxt
        return frozenset(result)
    raise TypeError(f"not a trace formula: {tf!r}")


def eval_atom(atom: Leq, env: Assignment, domain: DataDomain, star_bound: int | None = None) -> bool:
    bound = star_bound if star_bound is not None else default_star_bound(atom, env, domain)
    left = eval_trace_formula(atom.left, env, domain, bound)
    right = eval_trace_formula(atom.right, env, domain, bound)
    return any(is_prefix(w1, w2) for w1 in left for w2 in right)


def evaluate(
    phi: Formula,
    traces: Sequence[Trace],
    domain: DataDomain,
    interp: GeneratorInterp | None = None,
    env: Assignment | None = None,
    star_bound: int | None = None,
) -> bool:
    """Satisfaction of ``phi`` by the trace set under ``interp`` and ``env``."""
    interp = interp or {}
    env = dict(env or {})
    missing = free_vars(phi) - set(env)
    if missing:
        raise SpecificationError(f"free variables without assignment: {sorted(missing)}")
    return _eval(phi, list(traces), domain, interp, env, star_bound)


def _range(q, traces, interp, env) -> list[Trace]:
    if q.source is None:
        return traces
    try:
        fn = interp[q.source.name]
    except KeyError:
        raise SpecificationError(f"generator '{q.source.name}' has no interpretation") from None
    return list(fn(*[env[a] for a in q.source.args]))


def _eval(phi, traces, domain, interp, env, star_bound) -> bool:
    if isinstance(phi, Leq):
        return eval_atom(phi, env, domain, star_bound)
    if isinstance(phi, Not):
        return not _eval(phi.body, traces, domain, interp, env, star_bound)
    if isinstance(phi, And):
        return _eval(phi.left, traces, domain, interp, env, star_bound) and _eval(
            phi.right, traces, domain, interp, env, star_bound
        )
    dom = _range(phi, traces, interp, env)
    results = (
        _eval(phi.body, traces, domain, interp, {**env, phi.var: t}, star_bound) for t in dom
    )
    if isinstance(phi, Exists):
        return any(results)
    return all(results)


# ---------------------------------------------------------------------------
# generator correctness


@dataclass
class CorrectnessResult:
    ok: bool
    assignment: dict | None = None
    trace: Trace | None = None

    def __bool__(self):
        return self.ok


def check_generator_correct(
    gen: Callable[..., Iterable[Trace]],
    polarity: str,
    var: str,
    args: Sequence[str],
    body: Formula,
    traces: Sequence[Trace],
    spec: Callable[..., Iterable[Trace]],
    domain: DataDomain,
    interp: GeneratorInterp | None = None,
    universe: Sequence[Trace] | None = None,
    orientation: str = "sound",
) -> CorrectnessResult:
    """Decide the correctness condition for ``Q var in gen(args) . body``.

    Assignments to the other free variables of ``body`` range over
    ``universe`` (the trace set by default).  For the universal polarity the
    ``"sound"`` orientation asks every trace of the reference function that
    falsifies the body to be matched by a generated trace that also
    falsifies it; ``"literal"`` uses the implication the other way round.
    """
    interp = interp or {}
    universe = list(universe if universe is not None else traces)
    others = sorted((free_vars(body) | set(args)) - {var})

    def holds(env, t):
        return _eval(body, list(traces), domain, interp, {**env, var: t}, None)

    for combo in itertools.product(universe, repeat=len(others)):
        env = dict(zip(others, combo))
        arg_traces = [env[a] for a in args]
        produced = list(gen(*arg_traces))
        specified = list(spec(*arg_traces))
        if polarity == "exists":
            for tf in produced:
                if holds(env, tf) and not any(holds(env, ts) for ts in specified):
                    return CorrectnessResult(False, env, tf)
        elif orientation == "literal":
            for ts in specified:
                if holds(env, ts) and not any(holds(env, tf) for tf in produced):
                    return CorrectnessResult(False, env, ts)
        else:
            for ts in specified:
                if not holds(env, ts) and all(holds(env, tf) for tf in produced):
                    return CorrectnessResult(False, env, ts)
    return CorrectnessResult(True)


def check_theorem1(
    phi: Formula,
    spec_interp: GeneratorInterp,
    runtime_interp: GeneratorInterp,
    traces: Sequence[Trace],
    domain: DataDomain,
) -> bool:
    """Check that a model under ``runtime_interp`` is a model of the passive version."""
    if not evaluate(phi, traces, domain, runtime_interp):
        return True
    return evaluate(passive(phi, spec_interp), traces, domain, spec_interp)


def constant_generator(traces: Sequence[Trace]) -> Callable[..., list[Trace]]:
    """The generator that ignores its arguments and returns ``traces``."""
    fixed = list(traces)

    def f_T(*_args):
        return fixed

    return f_T


# ---------------------------------------------------------------------------
# bounded good/bad classification

GOOD, BAD, INCONCLUSIVE = "good", "bad", "inconclusive-at-bound"


def extensions(
    traces: Sequence[Trace], alphabet: Sequence, max_events: int, max_new_traces: int
) -> Iterable[list[Trace]]:
    """Every terminated extension within the bounds.

    Open traces get up to ``max_events`` more letters, and up to
    ``max_new_traces`` fresh traces of at most ``max_events`` letters are added.
    """
    words = [()]
    for n in range(1, max_events + 1):
        words.extend(itertools.product(alphabet, repeat=n))
    per_trace = []
    for t in traces:
        if t.terminated:
            per_trace.append([t])
        else:
            per_trace.append(
                [Trace.of(t.id, list(t.events) + list(w), True) for w in words]
            )
    for base in itertools.product(*per_trace):
        for k in range(max_new_traces + 1):
            for fresh in itertools.combinations_with_replacement(range(len(words)), k):
                extra = [Trace.of(f"new{i}", words[w], True) for i, w in enumerate(fresh)]
                yield list(base) + extra


def classify_observation(
    phi: Formula,
    traces: Sequence[Trace],
    domain: DataDomain,
    alphabet: Sequence,
    interp: GeneratorInterp | None = None,
    max_events: int = 2,
    max_new_traces: int = 1,
    closed: bool = False,
) -> str:
    """Bounded approximation of the good/bad prefix sets.

    Returns ``"bad"`` when every extension within the bounds violates
    ``phi``, ``"good"`` when every one satisfies it, and
    ``"inconclusive-at-bound"`` otherwise.  With ``closed`` no fresh traces
    are added.
    """
    seen_true = seen_false = False
    new = 0 if closed else max_new_traces
    for ext in extensions(traces, alphabet, max_events, new):
        if evaluate(phi, ext, domain, interp):
            seen_true = True
        else:
            seen_false = True
        if seen_true and seen_false:
            return INCONCLUSIVE
    if seen_false:
        return BAD
    return GOOD


def atoms_of(phi: Formula) -> list[Leq]:
    out: list[Leq] = []
    for a in atoms(phi):
        if a not in out:
            out.append(a)
    return out


def variables_of_atom(atom: Leq) -> tuple[str | None, str | None]:
    lv = trace_vars(atom.left)
    rv = trace_vars(atom.right)
    return (next(iter(lv)) if lv else None, next(iter(rv)) if rv else None)


__all__ = [
    "eval_trace_formula",
    "eval_atom",
    "evaluate",
    "check_generator_correct",
    "check_theorem1",
    "constant_generator",
    "classify_observation",
    "extensions",
    "GOOD",
    "BAD",
    "INCONCLUSIVE",
    "Quantifier",
    "Forall",
]
