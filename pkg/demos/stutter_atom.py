"""The prefix automaton for a stutter-reduced atom.

Compiles ``~('a'; y(p)) <= 'a'; x(q)`` over variables x and y and prints the
synchronous automaton.  One register remembers the last letter written on
the left tape so that repeats can be skipped.

    python3 demos/stutter_atom.py
"""
from __future__ import annotations

from hypermon.formula import Concat, Const, Leq, Proj, Stutter
from hypermon.trace_model import DataDomain, Trace
from hypermon.transducer import compile_atom

dom = DataDomain(["x", "y"])
atom = Leq(Stutter(Concat(Const("a"), Proj("y", "p"))), Concat(Const("a"), Proj("x", "q")))
A = compile_atom(atom, dom)
print(f"{len(A.registers)} register(s), {A.sync.n_states} state(s)\n")
print(A.dump())

print()
for ys, xs in (("aab", "ab"), ("ab", "b"), ("bba", "bab"), ("", "")):
    p = Trace.of("p", [{"x": "a", "y": c} for c in ys])
    q = Trace.of("q", [{"x": c, "y": "a"} for c in xs])
    print(f"y(p)={ys!r:6} x(q)={xs!r:6} -> {A.holds({'p': p, 'q': q})}")
