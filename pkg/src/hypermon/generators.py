"""Generator objects: trace sets computed on demand from argument traces.

A :class:`GeneratorObject` wraps a plain function from argument traces to
a finite trace set.  For each argument tuple it keeps one
:class:`GeneratorInstance` whose snapshot is empty and open until every
argument trace has terminated; then the function runs once and the instance
closes.
"""
from __future__ import annotations

import itertools
import zlib
from collections import deque
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from random import Random
from typing import Any, Protocol

from .errors import GeneratorError
from .trace_model import Trace, Valuation

GenFn = Callable[..., Iterable[Trace]]


class GeneratorInstance:
    """The trace set ``f(args)`` as seen by a monitor."""

    __slots__ = ("owner", "args", "traces", "closed")

    def __init__(self, owner: GeneratorObject, args: tuple[Trace, ...]):
        self.owner = owner
        self.args = args
        self.traces: list[Trace] = []
        self.closed = False

    def update(self) -> None:
        if self.closed or not all(t.terminated for t in self.args):
            return
        self.traces = list(self.owner.fn(*self.args))
        self.closed = True
        self.owner.revision += 1
        self.owner.computed += 1

    def snapshot(self) -> tuple[list[Trace], bool]:
        self.update()
        return list(self.traces), self.closed


class GeneratorObject:
    def __init__(self, name: str, fn: GenFn, arity: int = 1):
        self.name = name
        self.fn = fn
        self.arity = arity
        self.revision = 0
        self.computed = 0
        self._instances: dict[tuple[Trace, ...], GeneratorInstance] = {}

    def source(self, args: tuple[Trace, ...]) -> GeneratorInstance:
        if len(args) != self.arity:
            raise GeneratorError(f"generator '{self.name}' takes {self.arity} argument(s), got {len(args)}")
        inst = self._instances.get(args)
        if inst is None:
            inst = GeneratorInstance(self, args)
            self._instances[args] = inst
        return inst

    def query(self, args: Sequence[Trace]) -> tuple[list[Trace], bool]:
        return self.source(tuple(args)).snapshot()

    def __call__(self, *args: Trace) -> list[Trace]:
        """Plain function view, for the reference evaluator."""
        return list(self.fn(*args))

    def __repr__(self):
        return f"GeneratorObject({self.name!r})"


class GeneratorRegistry(dict):
    """Name → :class:`GeneratorObject`."""

    def register(self, name: str, factory: GenFn | GeneratorObject, arity: int = 1) -> GeneratorObject:
        obj = factory if isinstance(factory, GeneratorObject) else GeneratorObject(name, factory, arity)
        self[name] = obj
        return obj

    def query(self, name: str, args: Sequence[Trace]) -> tuple[list[Trace], bool]:
        try:
            gen = self[name]
        except KeyError:
            raise GeneratorError(f"unknown generator '{name}'") from None
        return gen.query(args)

    def functions(self) -> dict[str, GenFn]:
        return {k: v.__call__ for k, v in self.items()}


def constant(traces: Sequence[Trace]) -> GenFn:
    fixed = list(traces)
    return lambda *_: fixed


# ---------------------------------------------------------------------------
# system handles for the robot scenarios


class SystemHandle(Protocol):
    def inputs_of(self, trace: Trace) -> tuple: ...

    def run(self, inputs: tuple, rng: Random, tid: str) -> Trace: ...

    def same_area(self, trace: Trace, mode: str) -> list[Trace]: ...


def _seed(*parts: Any) -> int:
    return zlib.crc32(":".join(map(str, parts)).encode())


def samples(system: SystemHandle, n: int = 5, seed: int = 0) -> GenFn:
    """``n`` fresh runs of the system on the inputs of the argument trace."""

    def f(pi: Trace) -> list[Trace]:
        inputs = system.inputs_of(pi)
        return [system.run(inputs, Random(_seed(seed, pi.id, i)), f"{pi.id}~s{i}") for i in range(n)]

    return f


def eqarea(system: SystemHandle, mode: str = "1W") -> GenFn:
    """Runs with the same area word as the argument (all of them, or one witness)."""
    if mode not in ("AAT", "1W"):
        raise GeneratorError(f"eqarea mode must be AAT or 1W, not {mode!r}")

    def f(pi: Trace) -> list[Trace]:
        return system.same_area(pi, mode)

    return f


# ---------------------------------------------------------------------------
# operation histories


EMPTY = "empty"


@dataclass(frozen=True)
class OpEvent:
    proc: Any
    op: str
    param: Any
    inv: int
    res: int | None

    def valuation(self) -> Valuation:
        return Valuation({"proc": self.proc, "op": self.op, "param": self.param, "inv": self.inv, "res": self.res})

    @staticmethod
    def of(v: Mapping) -> OpEvent:
        try:
            return OpEvent(v["proc"], v["op"], v.get("param"), v["inv"], v.get("res"))
        except KeyError as e:
            raise GeneratorError(f"operation event lacks field {e}") from None


def history(trace: Trace) -> list[OpEvent]:
    """Operations of a trace, validated: ``inv < res`` and distinct timestamps."""
    ops = [OpEvent.of(v) for v in trace.events]
    stamps: set = set()
    for o in ops:
        if o.op not in ("push", "pop"):
            raise GeneratorError(f"unknown operation {o.op!r}")
        for t in (o.inv, o.res):
            if t is None:
                continue
            if t in stamps:
                raise GeneratorError(f"timestamp {t} used twice in trace '{trace.id}'")
            stamps.add(t)
        if o.res is not None and not o.inv < o.res:
            raise GeneratorError(f"response before invocation in trace '{trace.id}'")
    return ops


class SequentialModel(Protocol):
    def initial(self) -> Any: ...

    def apply(self, state: Any, op: OpEvent) -> Any | None:
        """Next state, or ``None`` when the response is impossible."""


class FifoModel:
    """Immutable FIFO queue; popping an empty queue answers ``"empty"``."""

    def initial(self) -> tuple:
        return ()

    def apply(self, state: tuple, op: OpEvent):
        if op.op == "push":
            return state + (op.param,)
        if not state:
            return state if op.param == EMPTY else None
        return state[1:] if state[0] == op.param else None


MODELS: dict[str, SequentialModel] = {"queue": FifoModel()}


def happens_before(a: OpEvent, b: OpEvent) -> bool:
    return a.res is not None and a.res < b.inv


def linearize(ops: Sequence[OpEvent], model: SequentialModel | None = None) -> list[OpEvent] | None:
    """Backtracking search for a legal order extending happens-before.

    Failed (done-set, model state) pairs are remembered so each is explored
    once.
    """
    model = model or FifoModel()
    n = len(ops)
    order = sorted(range(n), key=lambda i: ops[i].inv)
    full = (1 << n) - 1
    failed: set = set()
    path: list[int] = []

    def minimal(mask: int) -> list[int]:
        min_res = min((ops[i].res for i in order if not mask >> i & 1 and ops[i].res is not None), default=None)
        out = []
        for i in order:
            if mask >> i & 1:
                continue
            if min_res is not None and ops[i].inv > min_res:
                break
            out.append(i)
        return out

    def dfs(mask: int, state) -> bool:
        if mask == full:
            return True
        key = (mask, state)
        if key in failed:
            return False
        for i in minimal(mask):
            nxt = model.apply(state, ops[i])
            if nxt is None:
                continue
            path.append(i)
            if dfs(mask | 1 << i, nxt):
                return True
            path.pop()
        failed.add(key)
        return False

    import sys

    old = sys.getrecursionlimit()
    if n + 100 > old:
        sys.setrecursionlimit(n + 1000)
    try:
        ok = dfs(0, model.initial())
    finally:
        sys.setrecursionlimit(old)
    return [ops[i] for i in path] if ok else None


def brute_force_linearizable(ops: Sequence[OpEvent], model: SequentialModel | None = None) -> bool:
    """All permutations, kept only for cross-checking small histories."""
    model = model or FifoModel()
    for perm in itertools.permutations(ops):
        if any(happens_before(perm[j], perm[i]) for i in range(len(perm)) for j in range(i + 1, len(perm))):
            continue
        state = model.initial()
        for o in perm:
            state = model.apply(state, o)
            if state is None:
                break
        else:
            return True
    return False


def replay(ops: Sequence[OpEvent], model: SequentialModel | None = None) -> bool:
    """Whether a sequential history is legal for the model."""
    model = model or FifoModel()
    state = model.initial()
    for o in ops:
        state = model.apply(state, o)
        if state is None:
            return False
    return True


def lin(model: str = "queue") -> GenFn:
    m = MODELS[model]

    def f(pi: Trace) -> list[Trace]:
        seq = linearize(history(pi), m)
        if seq is None:
            return []
        return [Trace(f"{pi.id}~lin", [o.valuation() for o in seq], True)]

    return f


def legal() -> GenFn:
    """Certificate check: replays on an independent ``collections.deque``."""

    def f(pi: Trace) -> list[Trace]:
        q: deque = deque()
        for v in pi.events:
            if v["op"] == "push":
                q.append(v["param"])
            elif q:
                if q.popleft() != v["param"]:
                    return []
            elif v["param"] != EMPTY:
                return []
        return [pi]

    return f


def ext(responses: Sequence[Any] = (EMPTY,)) -> GenFn:
    """Completions of pending operations (``res`` missing) by response events."""
    if responses is None:
        raise GeneratorError("ext needs a finite response domain")
    responses = list(responses)

    def f(pi: Trace) -> list[Trace]:
        ops = [OpEvent.of(v) for v in pi.events]
        pending = [i for i, o in enumerate(ops) if o.res is None]
        if not pending:
            return [pi]
        top = max(max(o.inv, o.res or 0) for o in ops)
        out = []
        k = 0
        for perm in itertools.permutations(pending):
            for vals in itertools.product(responses, repeat=len(perm)):
                new = list(ops)
                for t, (i, val) in enumerate(zip(perm, vals)):
                    o = new[i]
                    param = o.param if o.op == "push" else val
                    new[i] = OpEvent(o.proc, o.op, param, o.inv, top + 1 + t)
                out.append(Trace(f"{pi.id}~ext{k}", [o.valuation() for o in new], True))
                k += 1
        return out

    return f


def sub() -> GenFn:
    """All prefixes, the empty one and the full trace included."""

    def f(pi: Trace) -> list[Trace]:
        return [Trace(f"{pi.id}~pre{i}", list(pi.events[:i]), True) for i in range(len(pi.events) + 1)]

    return f


# ---------------------------------------------------------------------------
# option parsing for ``name=builtin[:k=v,...]``


@dataclass
class GenSpec:
    name: str
    builtin: str
    options: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def parse(text: str) -> GenSpec:
        if "=" not in text:
            raise GeneratorError(f"expected name=builtin[:options], got {text!r}")
        name, rest = text.split("=", 1)
        builtin, _, opts = rest.partition(":")
        options = {}
        for part in filter(None, opts.split(",")):
            k, sep, v = part.partition("=")
            if not sep:
                raise GeneratorError(f"malformed generator option {part!r}")
            options[k.strip()] = v.strip()
        return GenSpec(name.strip(), builtin.strip(), options)


BUILTINS = ("samples", "eqarea", "lin", "legal", "ext", "sub")


def build(spec: GenSpec, system: SystemHandle | None = None, seed: int = 0) -> GeneratorObject:
    o = spec.options
    b = spec.builtin
    if b in ("samples", "eqarea") and system is None:
        raise GeneratorError(f"generator '{b}' needs a system description (meta.json next to the traces)")
    if b == "samples":
        fn = samples(system, int(o.get("n", 5)), int(o.get("seed", seed)))
    elif b == "eqarea":
        fn = eqarea(system, o.get("mode", "1W"))
    elif b == "lin":
        model = o.get("model", "queue")
        if model not in MODELS:
            raise GeneratorError(f"unknown sequential model {model!r}")
        fn = lin(model)
    elif b == "legal":
        fn = legal()
    elif b == "ext":
        if "responses" not in o:
            raise GeneratorError("ext needs responses=v1|v2|...")
        fn = ext([_literal(x) for x in o["responses"].split("|")])
    elif b == "sub":
        fn = sub()
    else:
        raise GeneratorError(f"unknown built-in generator {b!r}; choose from {', '.join(BUILTINS)}")
    return GeneratorObject(spec.name, fn)


def _literal(s: str):
    try:
        return int(s)
    except ValueError:
        return s
