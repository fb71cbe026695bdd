"""Abstract syntax, concrete syntax and static checks for genHL formulas.

Concrete syntax (one formula per text, ``#`` starts a comment)::

    forall p, q . input(p) <= input(q) -> area(p) = area(q)
    forall p . exists q in eqarea(p) . act(p) != act(q)

Trace formulas: ``eps``, string or integer literals, ``proj(var)``,
``t[i:j]`` and ``t[i]``, ``t ; t``, ``t + t``, ``t*``, ``~(t)`` (stutter
reduction).  Comparisons: ``<=``, ``~<=``, ``=``, ``~=``, ``!=``.
Connectives: ``!``/``not``, ``&``/``and``, ``|``/``or``, ``->``, plus
``true``/``false``.  Derived forms are expanded while parsing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import FormulaSyntaxError, SpecificationError, UnsupportedFragmentError

# ---------------------------------------------------------------------------
# trace formulas


@dataclass(frozen=True)
class Epsilon:
    pass


@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class Proj:
    proj: str
    var: str


@dataclass(frozen=True)
class Slice:
    body: "TraceFormula"
    i: int
    j: int


@dataclass(frozen=True)
class Concat:
    left: "TraceFormula"
    right: "TraceFormula"


@dataclass(frozen=True)
class Union_:
    left: "TraceFormula"
    right: "TraceFormula"


@dataclass(frozen=True)
class Star:
    body: "TraceFormula"


@dataclass(frozen=True)
class Stutter:
    body: "TraceFormula"


TraceFormula = Union[Epsilon, Const, Proj, Slice, Concat, Union_, Star, Stutter]

# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class GenTerm:
    name: str
    args: tuple[str, ...]

    def __str__(self):
        return f"{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"
    source: GenTerm | None = None


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"
    source: GenTerm | None = None


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Leq:
    left: TraceFormula
    right: TraceFormula


Formula = Union[Exists, Forall, Not, And, Leq]
Quantifier = (Exists, Forall)

TRUE = Leq(Epsilon(), Epsilon())
FALSE = Not(TRUE)


def Or(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def Implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


def Eq(a: TraceFormula, b: TraceFormula) -> Formula:
    return And(Leq(a, b), Leq(b, a))


def StutterLeq(a: TraceFormula, b: TraceFormula) -> Formula:
    return Leq(Stutter(a), Stutter(b))


def StutterEq(a: TraceFormula, b: TraceFormula) -> Formula:
    return Eq(Stutter(a), Stutter(b))


# ---------------------------------------------------------------------------
# variables


def trace_vars(tf: TraceFormula) -> set[str]:
    if isinstance(tf, Proj):
        return {tf.var}
    if isinstance(tf, Slice | Star | Stutter):
        return trace_vars(tf.body)
    if isinstance(tf, Concat | Union_):
        return trace_vars(tf.left) | trace_vars(tf.right)
    return set()


def projections_of(tf: TraceFormula) -> set[str]:
    if isinstance(tf, Proj):
        return {tf.proj}
    if isinstance(tf, Slice | Star | Stutter):
        return projections_of(tf.body)
    if isinstance(tf, Concat | Union_):
        return projections_of(tf.left) | projections_of(tf.right)
    return set()


def free_vars(phi: Formula) -> set[str]:
    if isinstance(phi, Quantifier):
        inner = free_vars(phi.body) - {phi.var}
        if phi.source is not None:
            inner |= set(phi.source.args)
        return inner
    if isinstance(phi, Not):
        return free_vars(phi.body)
    if isinstance(phi, And):
        return free_vars(phi.left) | free_vars(phi.right)
    return trace_vars(phi.left) | trace_vars(phi.right)


def bound_vars(phi: Formula) -> set[str]:
    if isinstance(phi, Quantifier):
        return {phi.var} | bound_vars(phi.body)
    if isinstance(phi, Not):
        return bound_vars(phi.body)
    if isinstance(phi, And):
        return bound_vars(phi.left) | bound_vars(phi.right)
    return set()


def atoms(phi: Formula) -> Iterator[Leq]:
    if isinstance(phi, Leq):
        yield phi
    elif isinstance(phi, (Exists, Forall, Not)):
        yield from atoms(phi.body)
    else:
        yield from atoms(phi.left)
        yield from atoms(phi.right)


def generators_of(phi: Formula) -> set[str]:
    if isinstance(phi, Quantifier):
        own = {phi.source.name} if phi.source else set()
        return own | generators_of(phi.body)
    if isinstance(phi, Not):
        return generators_of(phi.body)
    if isinstance(phi, And):
        return generators_of(phi.left) | generators_of(phi.right)
    return set()


def is_quantifier_free(phi: Formula) -> bool:
    return not bound_vars(phi)


# ---------------------------------------------------------------------------
# static checks


def simple_violation(tf: TraceFormula) -> str | None:
    """Reason why a trace formula cannot be compiled, or None.

    A compilable side mentions at most one trace variable, never under a
    star, and never in both operands of a concatenation (both operands would
    have to read the same trace from the start).
    """
    vs = trace_vars(tf)
    if len(vs) > 1:
        return f"more than one trace variable ({', '.join(sorted(vs))})"

    def walk(t) -> str | None:
        if isinstance(t, Star) and trace_vars(t.body):
            return "trace variable under iteration"
        if isinstance(t, Concat) and trace_vars(t.left) and trace_vars(t.right):
            return "trace variable on both sides of a concatenation"
        for child in _children(t):
            r = walk(child)
            if r:
                return r
        return None

    return walk(tf)


def _children(t):
    if isinstance(t, Slice | Star | Stutter):
        return (t.body,)
    if isinstance(t, Concat | Union_):
        return (t.left, t.right)
    return ()


def check(phi: Formula, domain=None, require_simple: bool = True, generators=None) -> None:
    """Raise a SpecificationError subclass when ``phi`` is ill-formed."""
    seen: set[str] = set()

    def walk(f, bound_here: set[str]):
        if isinstance(f, Quantifier):
            if f.var in seen:
                raise SpecificationError(f"trace variable '{f.var}' is quantified twice")
            seen.add(f.var)
            if f.source is not None:
                if generators is not None and f.source.name not in generators:
                    raise SpecificationError(f"unknown generator '{f.source.name}'")
                later = bound_vars(f)
                for a in f.source.args:
                    if a in later:
                        raise SpecificationError(
                            f"generator argument '{a}' of {f.source} is bound inside its own scope"
                        )
            walk(f.body, bound_here | {f.var})
        elif isinstance(f, Not):
            walk(f.body, bound_here)
        elif isinstance(f, And):
            walk(f.left, bound_here)
            walk(f.right, bound_here)
        else:
            for side in (f.left, f.right):
                if domain is not None:
                    for p in projections_of(side):
                        if not domain.has(p):
                            raise SpecificationError(f"unknown projection '{p}'")
                if require_simple:
                    why = simple_violation(side)
                    if why:
                        raise UnsupportedFragmentError(f"atom {pretty_atom(f)} is not simple: {why}")

    walk(phi, set())


# ---------------------------------------------------------------------------
# negation and prenex structure


def negate(phi: Formula) -> Formula:
    """Negation pushed through leading quantifiers; double negations vanish."""
    if isinstance(phi, Exists):
        return Forall(phi.var, negate(phi.body), phi.source)
    if isinstance(phi, Forall):
        return Exists(phi.var, negate(phi.body), phi.source)
    if isinstance(phi, Not):
        return phi.body
    return Not(phi)


@dataclass(frozen=True)
class Block:
    polarity: str  # "forall" | "exists"
    source: GenTerm | None
    vars: tuple[str, ...]

    @property
    def existential(self) -> bool:
        return self.polarity == "exists"

    def flipped(self) -> Block:
        return Block("forall" if self.existential else "exists", self.source, self.vars)

    def __str__(self):
        src = f" in {self.source}" if self.source else ""
        return f"{self.polarity} {', '.join(self.vars)}{src}"


def to_prenex(phi: Formula) -> Formula:
    """Pull quantifiers to the front using only equivalence-preserving steps.

    Existentials may leave a conjunction and universals a disjunction
    regardless of whether their range is empty.  Anything else stays put, in
    which case :func:`quantifier_blocks` reports the formula as unsupported.
    """
    if isinstance(phi, Quantifier):
        cls = type(phi)
        return cls(phi.var, to_prenex(phi.body), phi.source)
    if isinstance(phi, Not):
        inner = to_prenex(phi.body)
        if isinstance(inner, Quantifier):
            return to_prenex(negate(inner))
        if isinstance(inner, Not):
            return inner.body
        return Not(inner)
    if isinstance(phi, And):
        left, right = to_prenex(phi.left), to_prenex(phi.right)
        # only when the pulled variable cannot capture anything on the other side
        if isinstance(left, Exists) and left.var not in free_vars(right) | bound_vars(right):
            return Exists(left.var, to_prenex(And(left.body, right)), left.source)
        if isinstance(right, Exists) and right.var not in free_vars(left) | bound_vars(left):
            return Exists(right.var, to_prenex(And(left, right.body)), right.source)
        return And(left, right)
    return phi


def quantifier_blocks(phi: Formula) -> tuple[list[Block], Formula]:
    """Split a closed prenex formula into maximal same-type blocks and a body."""
    blocks: list[Block] = []
    f = phi
    while True:
        if isinstance(f, Not) and isinstance(f.body, Quantifier):
            f = negate(f.body)
            continue
        if not isinstance(f, Quantifier):
            break
        pol = "exists" if isinstance(f, Exists) else "forall"
        if blocks and blocks[-1].polarity == pol and blocks[-1].source == f.source:
            last = blocks[-1]
            blocks[-1] = Block(pol, f.source, last.vars + (f.var,))
        else:
            blocks.append(Block(pol, f.source, (f.var,)))
        f = f.body
    if not is_quantifier_free(f):
        g = to_prenex(phi)
        if g != phi:
            return quantifier_blocks(g)
        raise UnsupportedFragmentError(
            "the formula is not in prenex form: a quantifier occurs below a boolean connective"
        )
    bound: set[str] = set()
    for b in blocks:
        if b.source:
            for a in b.source.args:
                if a not in bound:
                    raise UnsupportedFragmentError(
                        f"generator argument '{a}' of {b.source} is not bound by an earlier quantifier"
                    )
        bound.update(b.vars)
    return blocks, f


def from_blocks(blocks: list[Block], body: Formula) -> Formula:
    f = body
    for b in reversed(blocks):
        cls = Exists if b.existential else Forall
        for v in reversed(b.vars):
            f = cls(v, f, b.source)
    return f


def negate_body(body: Formula) -> Formula:
    return body.body if isinstance(body, Not) else Not(body)


def passive(phi: Formula, interp) -> Formula:
    """Drop generator sources whose names are not in ``interp``."""
    if isinstance(phi, Quantifier):
        src = phi.source if phi.source is not None and phi.source.name in interp else None
        return type(phi)(phi.var, passive(phi.body, interp), src)
    if isinstance(phi, Not):
        return Not(passive(phi.body, interp))
    if isinstance(phi, And):
        return And(passive(phi.left, interp), passive(phi.right, interp))
    return phi


# ---------------------------------------------------------------------------
# printing


def _lit(v) -> str:
    if isinstance(v, str):
        return "'" + v.replace("\\", "\\\\").replace("'", "\\'") + "'"
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecificationError(f"constant {v!r} has no concrete syntax")
    return str(v)


_TPREC = {Union_: 1, Concat: 2}


def pretty_trace(t: TraceFormula, prec: int = 0) -> str:
    if isinstance(t, Epsilon):
        return "eps"
    if isinstance(t, Const):
        return _lit(t.value)
    if isinstance(t, Proj):
        return f"{t.proj}({t.var})"
    if isinstance(t, Stutter):
        return f"~({pretty_trace(t.body)})"
    if isinstance(t, Star):
        return pretty_trace(t.body, 3) + "*"
    if isinstance(t, Slice):
        return f"{pretty_trace(t.body, 3)}[{t.i}:{t.j}]"
    p = _TPREC[type(t)]
    op = " + " if isinstance(t, Union_) else "; "
    s = pretty_trace(t.left, p) + op + pretty_trace(t.right, p + 1)
    return f"({s})" if p < prec else s


def pretty_atom(a: Leq) -> str:
    return f"{pretty_trace(a.left)} <= {pretty_trace(a.right)}"


def pretty(phi: Formula, prec: int = 0) -> str:
    """Concrete syntax for ``phi``; ``parse(pretty(phi)) == phi``."""
    # precedence: 0 quantifier / implication, 1 or, 2 and, 3 unary
    if isinstance(phi, Quantifier):
        kw = "exists" if isinstance(phi, Exists) else "forall"
        src = f" in {phi.source}" if phi.source else ""
        s = f"{kw} {phi.var}{src} . {pretty(phi.body, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(phi, Leq):
        if phi == TRUE:
            return "true"
        return pretty_atom(phi)
    if isinstance(phi, And):
        s = f"{pretty(phi.left, 2)} & {pretty(phi.right, 3)}"
        return f"({s})" if prec > 2 else s
    # Not
    inner = phi.body
    if inner == TRUE:
        return "false"
    if isinstance(inner, And):
        a, b = inner.left, inner.right
        if isinstance(a, Not) and isinstance(b, Not):
            s = f"{pretty(a.body, 1)} | {pretty(b.body, 2)}"
            return f"({s})" if prec > 1 else s
        if isinstance(b, Not):
            s = f"{pretty(a, 1)} -> {pretty(b.body, 0)}"
            return f"({s})" if prec > 0 else s
    return "!" + pretty(inner, 3)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<str>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<int>-?\d+)
  | (?P<op>~<=|~=|<=|!=|->|&&|\|\||[().,;+*\[\]:!&|=~])
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
    """,
    re.VERBOSE,
)

KEYWORDS = {"forall", "exists", "in", "true", "false", "eps", "and", "or", "not"}


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    pos, line, lstart = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "name" and s in KEYWORDS:
                kind = s
            toks.append(Tok(kind, s, line, pos - lstart + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            lstart = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - lstart + 1))
    return toks


def _unquote(s: str) -> str:
    body = s[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # helpers
    @property
    def cur(self) -> Tok:
        return self.toks[self.i]

    def at(self, *texts) -> bool:
        t = self.cur
        return t.text in texts and t.kind not in ("str",)

    def eat(self, text: str) -> Tok:
        if not self.at(text):
            self.fail(f"expected '{text}'")
        t = self.cur
        self.i += 1
        return t

    def fail(self, msg: str, tok: Tok | None = None):
        t = tok or self.cur
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise FormulaSyntaxError(f"{msg}, found {found}", t.line, t.col)

    def name(self) -> str:
        t = self.cur
        if t.kind != "name":
            self.fail("expected a name")
        self.i += 1
        return t.text

    # grammar
    def formula(self) -> Formula:
        if self.at("forall", "exists"):
            return self.quantified()
        left = self.disjunction()
        if self.at("->"):
            self.i += 1
            return Implies(left, self.formula())
        return left

    def quantified(self) -> Formula:
        kw = self.cur.text
        self.i += 1
        names = [self.name()]
        while self.at(","):
            self.i += 1
            names.append(self.name())
        source = None
        if self.at("in"):
            self.i += 1
            g = self.name()
            self.eat("(")
            args: list[str] = []
            if not self.at(")"):
                args.append(self.name())
                while self.at(","):
                    self.i += 1
                    args.append(self.name())
            self.eat(")")
            source = GenTerm(g, tuple(args))
        self.eat(".")
        body = self.formula()
        cls = Forall if kw == "forall" else Exists
        for v in reversed(names):
            body = cls(v, body, source)
        return body

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.at("|", "||", "or"):
            self.i += 1
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.at("&", "&&", "and"):
            self.i += 1
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        if self.at("!", "not"):
            self.i += 1
            return Not(self.unary())
        if self.at("forall", "exists"):
            return self.quantified()
        if self.at("true"):
            self.i += 1
            return TRUE
        if self.at("false"):
            self.i += 1
            return FALSE
        if self.at("("):
            # either a parenthesised formula or a trace formula starting with '('
            save = self.i
            try:
                return self.comparison()
            except FormulaSyntaxError as first:
                self.i = save
                self.eat("(")
                try:
                    f = self.formula()
                    self.eat(")")
                except FormulaSyntaxError:
                    raise first from None
                return f
        return self.comparison()

    def comparison(self) -> Formula:
        left = self.tunion()
        t = self.cur
        op = t.text if t.kind == "op" else None
        if op not in ("<=", "~<=", "=", "~=", "!="):
            self.fail("expected a comparison ('<=', '~<=', '=', '~=', '!=')")
        self.i += 1
        right = self.tunion()
        if op == "<=":
            return Leq(left, right)
        if op == "~<=":
            return StutterLeq(left, right)
        if op == "=":
            return Eq(left, right)
        if op == "~=":
            return StutterEq(left, right)
        return Not(Eq(left, right))

    def tunion(self) -> TraceFormula:
        t = self.tconcat()
        while self.at("+"):
            self.i += 1
            t = Union_(t, self.tconcat())
        return t

    def tconcat(self) -> TraceFormula:
        t = self.tpost()
        while self.at(";"):
            self.i += 1
            t = Concat(t, self.tpost())
        return t

    def tpost(self) -> TraceFormula:
        t = self.tprim()
        while True:
            if self.at("*"):
                self.i += 1
                t = Star(t)
            elif self.at("["):
                self.i += 1
                i = self.integer()
                j = i
                if self.at(":"):
                    self.i += 1
                    j = self.integer()
                self.eat("]")
                t = Slice(t, i, j)
            else:
                return t

    def integer(self) -> int:
        t = self.cur
        if t.kind != "int":
            self.fail("expected an integer")
        self.i += 1
        return int(t.text)

    def tprim(self) -> TraceFormula:
        t = self.cur
        if t.kind == "eps":
            self.i += 1
            return Epsilon()
        if t.kind == "str":
            self.i += 1
            return Const(_unquote(t.text))
        if t.kind == "int":
            self.i += 1
            return Const(int(t.text))
        if t.text == "~" and t.kind == "op":
            self.i += 1
            self.eat("(")
            body = self.tunion()
            self.eat(")")
            return Stutter(body)
        if t.text == "(" and t.kind == "op":
            self.i += 1
            body = self.tunion()
            self.eat(")")
            return body
        if t.kind == "name":
            self.i += 1
            self.eat("(")
            v = self.name()
            self.eat(")")
            return Proj(t.text, v)
        self.fail("expected a trace formula")


def parse(text: str, domain=None, require_simple: bool = True, generators=None) -> Formula:
    """Parse concrete syntax into a :data:`Formula` and run :func:`check`."""
    p = _Parser(text)
    f = p.formula()
    if p.cur.kind != "eof":
        p.fail("unexpected trailing input")
    check(f, domain=domain, require_simple=require_simple, generators=generators)
    return f


def parse_trace_formula(text: str) -> TraceFormula:
    p = _Parser(text)
    t = p.tunion()
    if p.cur.kind != "eof":
        p.fail("unexpected trailing input")
    return t


def load_formula(path: str, **kw) -> Formula:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), **kw)
