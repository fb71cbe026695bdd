"""Random formulas and traces shared by the property and acceptance tests."""
from __future__ import annotations

import random

from hypermon.formula import (
    And,
    Concat,
    Const,
    Epsilon,
    Exists,
    Forall,
    GenTerm,
    Leq,
    Not,
    Proj,
    Slice,
    Star,
    Stutter,
    Union_,
)
from hypermon.trace_model import EPS, DataDomain, Trace

LETTERS = ("a", "b", "c")


def _rot(v):
    return {"a": "b", "b": "c", "c": "a"}[v["v"]]


def _drop_b(v):
    return EPS if v["v"] == "b" else v["v"]


DOMAIN = DataDomain(["v"], {"rot": _rot, "nob": _drop_b}, nonempty=["rot"], name="random")
PROJS = ("v", "rot", "nob")


def rand_const_tf(rng: random.Random, depth: int = 2, letters=LETTERS):
    r = rng.random()
    if depth <= 0 or r < 0.35:
        return Const(rng.choice(letters)) if rng.random() < 0.8 else Epsilon()
    k = rng.randrange(4)
    if k == 0:
        return Concat(rand_const_tf(rng, depth - 1, letters), rand_const_tf(rng, depth - 1, letters))
    if k == 1:
        return Union_(rand_const_tf(rng, depth - 1, letters), rand_const_tf(rng, depth - 1, letters))
    if k == 2:
        # keep iterated bodies short so the brute-force unrolling stays exact
        return Star(Const(rng.choice(letters)) if rng.random() < 0.7 else Concat(Const(rng.choice(letters)), Const(rng.choice(letters))))
    return Stutter(rand_const_tf(rng, depth - 1, letters))


def rand_var_tf(rng: random.Random, var: str, depth: int = 2):
    if depth <= 0:
        return Proj(rng.choice(PROJS), var)
    k = rng.randrange(7)
    if k == 0:
        return Proj(rng.choice(PROJS), var)
    if k == 1:
        return Slice(rand_var_tf(rng, var, depth - 1), rng.randint(-3, 3), rng.randint(-3, 3))
    if k == 2:
        return Stutter(rand_var_tf(rng, var, depth - 1))
    if k == 3:
        return Concat(rand_const_tf(rng, 1), rand_var_tf(rng, var, depth - 1))
    if k == 4:
        return Concat(rand_var_tf(rng, var, depth - 1), rand_const_tf(rng, 1))
    if k == 5:
        other = rand_var_tf(rng, var, depth - 1) if rng.random() < 0.5 else rand_const_tf(rng, 1)
        return Union_(rand_var_tf(rng, var, depth - 1), other)
    return Proj(rng.choice(PROJS), var)


def rand_side(rng: random.Random, var: str | None, depth: int = 2):
    if var is None:
        return rand_const_tf(rng, depth)
    return rand_var_tf(rng, var, depth)


def rand_atom(rng: random.Random, left_var="p", right_var="q", depth: int = 2) -> Leq:
    lv = left_var if rng.random() < 0.9 else None
    rv = right_var if rng.random() < 0.9 else None
    return Leq(rand_side(rng, lv, depth), rand_side(rng, rv, depth))


def rand_word(rng: random.Random, max_len: int = 5, letters=LETTERS) -> list[dict]:
    return [{"v": rng.choice(letters)} for _ in range(rng.randint(0, max_len))]


def rand_trace(rng: random.Random, tid: str, max_len: int = 5, letters=LETTERS) -> Trace:
    return Trace.of(tid, rand_word(rng, max_len, letters), True)


def rand_body(rng: random.Random, vars_: list[str], depth: int = 2):
    if depth <= 0 or rng.random() < 0.4:
        l, r = rng.choice(vars_), rng.choice(vars_)
        return rand_atom(rng, l, r, 1)
    k = rng.randrange(3)
    if k == 0:
        return Not(rand_body(rng, vars_, depth - 1))
    return And(rand_body(rng, vars_, depth - 1), rand_body(rng, vars_, depth - 1))


def rand_formula(rng: random.Random, generators: list[str] = ()):
    """Prenex formula with one or two quantifier blocks of up to two variables."""
    nblocks = rng.randint(1, 2)
    blocks = []
    names = iter("pqrs")
    bound: list[str] = []
    for _ in range(nblocks):
        pol = rng.choice(("forall", "exists"))
        src = None
        if generators and bound and rng.random() < 0.5:
            src = GenTerm(rng.choice(generators), (rng.choice(bound),))
        size = rng.randint(1, 2)
        vs = [next(names) for _ in range(size)]
        blocks.append((pol, src, vs))
        bound.extend(vs)
    body = rand_body(rng, bound)
    phi = body
    for pol, src, vs in reversed(blocks):
        for v in reversed(vs):
            phi = (Forall if pol == "forall" else Exists)(v, phi, src)
    return phi
