"""Concurrent FIFO queue histories and sequential helpers.

Two producers push distinct numbers and two consumers pop, all in
parallel.  Each operation gets an invocation time, a linearization point
and a response time; the queue is applied at the linearization points, so
correct-mode histories are linearizable by construction.  Times are
replaced by their ranks so every timestamp is a distinct integer.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from random import Random

from ..generators import EMPTY, FifoModel, OpEvent
from ..trace_model import DataDomain, Observation, Trace

PRODUCERS = ("p0", "p1")
CONSUMERS = ("c0", "c1")


def queue_domain() -> DataDomain:
    return DataDomain(["proc", "op", "param", "inv", "res"], name="queue")


def reference_queue() -> FifoModel:
    return FifoModel()


@dataclass
class _Op:
    proc: str
    op: str
    param: object
    inv: float
    lp: float
    res: float


def gen_queue_history(rng: Random, nops: int, jitter: float = 1.0, mode: str = "correct", tid: str = "h") -> Trace:
    ops: list[_Op] = []
    for k, proc in enumerate(PRODUCERS + CONSUMERS):
        t = rng.random() * jitter
        for i in range(nops):
            inv = t + rng.random() * jitter
            lp = inv + rng.random() * jitter + 1e-6
            res = lp + rng.random() * jitter + 1e-6
            if proc in PRODUCERS:
                ops.append(_Op(proc, "push", k * 10000 + i + 1, inv, lp, res))
            else:
                ops.append(_Op(proc, "pop", None, inv, lp, res))
            t = res
    q: deque = deque()
    popped: list = []
    for o in sorted(ops, key=lambda o: o.lp):
        if o.op == "push":
            q.append(o.param)
        elif q:
            o.param = q.popleft()
            popped.append(o)
        else:
            o.param = EMPTY
    if mode == "bug":
        _inject_bug(rng, ops, popped)
    elif mode != "correct":
        raise ValueError(f"mode must be 'correct' or 'bug', not {mode!r}")
    stamps = sorted(x for o in ops for x in (o.inv, o.res))
    rank = {x: i for i, x in enumerate(stamps)}
    events = [
        OpEvent(o.proc, o.op, o.param, rank[o.inv], rank[o.res]).valuation()
        for o in sorted(ops, key=lambda o: o.inv)
    ]
    return Trace(tid, events, True)


def _inject_bug(rng: Random, ops: list[_Op], popped: list[_Op]) -> None:
    """Make one pop return a value that was already taken (or a bogus one)."""
    pops = sorted((o for o in ops if o.op == "pop"), key=lambda o: o.lp)
    if not pops:
        return
    if len(popped) >= 2:
        first, victim = sorted(rng.sample(popped, 2), key=lambda o: o.lp)
        victim.param = first.param
    else:
        rng.choice(pops).param = -1


def gen_queue_histories(
    seed: int, nops: int = 3, count: int = 10, jitter: float = 1.0, mode: str = "correct"
) -> list[Trace]:
    rng = Random(seed)
    return [gen_queue_history(rng, nops, jitter, mode, f"h{i}") for i in range(count)]


def queue_observation(traces: list[Trace]) -> Observation:
    return Observation(traces, closed=True)


def exceeds(trace_or_ops, k: int) -> bool:
    """Whether the queue holds more than ``k`` elements after some prefix."""
    size = 0
    for v in _ops(trace_or_ops):
        if v == "push":
            size += 1
            if size > k:
                return True
        elif size > 0:
            size -= 1
    return False


def _ops(x):
    if isinstance(x, Trace):
        return [v["op"] for v in x.events]
    return [v if isinstance(v, str) else v["op"] for v in x]


def bounded_regex(k: int) -> str:
    """Trace-formula text for all push/pop words keeping the size at most ``k``.

    ``D[i]`` are the words that start and end at size ``i`` without going
    below ``i`` (popping on empty is allowed at size 0); ``P[i]`` are the
    prefixes of such words.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    d = ["eps"] * (k + 1)
    if k == 0:
        return "('pop')*"
    for i in range(k - 1, -1, -1):
        inner = f"'push'; {d[i + 1]}; 'pop'" if d[i + 1] != "eps" else "'push'; 'pop'"
        d[i] = f"('pop' + {inner})*" if i == 0 else f"({inner})*"
    p = "eps"
    for i in range(k - 1, -1, -1):
        p = f"{d[i]}; (eps + 'push'; {p})"
    return p


def bounded_formula_text(var: str, k: int) -> str:
    return f"op({var}) <= {bounded_regex(k)}"


LIN_FORMULA = "forall p . exists l in lin(p) . true"
LIN_LEGAL_FORMULA = "forall p . exists l in lin(p) . exists c in legal(l) . true"


def lin_bounded_formula(k: int = 2) -> str:
    return f"forall p . exists l in lin(p) . {bounded_formula_text('l', k)}"
