"""Recursive quantifier-instantiation monitor.

A node owns the first remaining quantifier block.  Each new trace in the
block's range spawns children for every assignment of the block variables
that uses it; the last block is delegated to a :class:`BasicMonitor`.
Existential blocks are handled through ``exists X. psi == not forall X. not psi``.
"""
from __future__ import annotations

import logging
import time
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

from .basic_monitor import DEFAULT_GIVE_UP, AtomCache, BasicMonitor, TraceSource, _tuples_with
from .errors import SpecificationError, UnsupportedFragmentError
from .formula import Block, Formula, check, negate_body, quantifier_blocks
from .trace_model import DataDomain, Observation, Trace, generic_domain
from .verdict import Stats, Verdict

log = logging.getLogger("hypermon.monitor")


@dataclass
class MonitorConfig:
    timeout: float | None = 30.0
    give_up: int = DEFAULT_GIVE_UP
    budget: int | None = 20000
    # an existential block over observed traces after a universal one can
    # only be decided once the observation is closed
    allow_passive_alternation: bool = True

    def __post_init__(self):
        if self.timeout is not None and self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.give_up <= 0:
            raise ValueError("give-up bound must be positive")


@dataclass
class MonitorResult:
    verdict: Verdict
    status: str
    witness: dict[str, str] | None
    stats: Stats
    elapsed: float
    steps: int

    def as_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "status": self.status,
            "witness": self.witness,
            "stats": self.stats.as_dict(),
            "elapsed": round(self.elapsed, 6),
            "steps": self.steps,
        }


class _Context:
    def __init__(self, observation, generators, domain, config: MonitorConfig):
        self.observation = observation
        self.generators = generators
        self.domain = domain
        self.config = config
        self.stats = Stats()
        self.cache = AtomCache(domain)

    def source(self, block: Block, env: Mapping[str, Trace]) -> TraceSource:
        if block.source is None:
            return self.observation
        try:
            gen = self.generators[block.source.name]
        except KeyError:
            raise SpecificationError(f"generator '{block.source.name}' is not registered") from None
        return gen.source(tuple(env[a] for a in block.source.args))


class MonitorNode:
    """One node of the sub-monitor tree."""

    def __init__(self, ctx: _Context, blocks: list[Block], body: Formula, env: dict[str, Trace]):
        self.ctx = ctx
        self.blocks = blocks
        self.block = blocks[0]
        self.body = body
        self.env = env
        self.existential = self.block.existential
        if self.existential:
            self.child_blocks = [b.flipped() for b in blocks[1:]]
            self.child_body = negate_body(body)
        else:
            self.child_blocks = list(blocks[1:])
            self.child_body = body
        self.children: list[MonitorNode] = []
        self.basic: BasicMonitor | None = None
        self.n_seen = 0
        self.gave_up = False
        self.verdict: Verdict | None = None
        self.witness: dict[str, str] | None = None

    @property
    def is_basic(self) -> bool:
        return len(self.blocks) == 1

    def step(self) -> Verdict:
        if self.verdict is not None:
            return self.verdict
        if self.is_basic:
            return self._handle_basic()
        ctx = self.ctx
        traces, closed = ctx.source(self.block, self.env).snapshot()
        limit = len(traces)
        if limit > ctx.config.give_up:
            limit = ctx.config.give_up
            self.gave_up = True
        k = len(self.block.vars)
        for n in range(self.n_seen, limit):
            for combo in _tuples_with(n, k):
                env = dict(self.env)
                for v, i in zip(self.block.vars, combo):
                    env[v] = traces[i]
                self.children.append(MonitorNode(ctx, self.child_blocks, self.child_body, env))
                ctx.stats.children_created += 1
        self.n_seen = max(self.n_seen, limit)
        alive = []
        for child in self.children:
            v = child.step()
            if v is Verdict.FALSE:
                self.witness = child.witness or {k: t.id for k, t in child.env.items()}
                self.verdict = Verdict.TRUE if self.existential else Verdict.FALSE
                self.children = []
                return self.verdict
            if v is Verdict.TRUE:
                continue
            if v is Verdict.UNKNOWN_GAVE_UP:
                self.gave_up = True
                continue
            alive.append(child)
        ctx.stats.resolved += len(self.children) - len(alive)
        self.children = alive
        if not alive and (closed or self.gave_up):
            if self.gave_up:
                return Verdict.UNKNOWN_GAVE_UP
            self.verdict = Verdict.FALSE if self.existential else Verdict.TRUE
            return self.verdict
        return Verdict.UNKNOWN

    def _handle_basic(self) -> Verdict:
        ctx = self.ctx
        if self.basic is None:
            self.basic = BasicMonitor(
                self.block.vars,
                self.child_body,
                self.env,
                ctx.source(self.block, self.env),
                ctx.cache,
                ctx.stats,
                ctx.config.give_up,
                ctx.config.budget,
            )
        v = self.basic.step()
        if v.conclusive:
            self.witness = self.basic.witness or ({k: t.id for k, t in self.env.items()} or None)
            self.verdict = v.negated() if self.existential else v
            self.basic = None
            return self.verdict
        return v

    def describe(self, depth: int = 0) -> list[str]:
        """Indented outline of the live tree, for debugging and docs."""
        pad = "  " * depth
        assigned = ", ".join(f"{k}={t.id}" for k, t in self.env.items())
        head = f"{pad}[{'; '.join(str(b) for b in self.blocks)}] {{{assigned}}}"
        lines = [head]
        for c in self.children:
            lines.extend(c.describe(depth + 1))
        return lines


def prepare(phi: Formula, domain: DataDomain | None, generators: Mapping | None, config: MonitorConfig):
    """Validate ``phi`` and split it into blocks and a body."""
    check(phi, domain, require_simple=True, generators=set(generators or {}))
    blocks, body = quantifier_blocks(phi)
    if not blocks:
        raise UnsupportedFragmentError("the formula has no quantifier")
    if not config.allow_passive_alternation:
        for prev, cur in zip(blocks, blocks[1:]):
            if cur.source is None and cur.polarity != prev.polarity:
                raise UnsupportedFragmentError(
                    f"block '{cur}' ranges over observed traces after a block of the other polarity; "
                    "bind it to a generator"
                )
    return blocks, body


class Monitor:
    """Drives a monitor tree over an observation.

    ``step`` performs one round over the tree; ``run`` loops until a
    conclusive verdict, a give-up, a timeout, or a stall (no progress
    possible without new input).
    """

    def __init__(
        self,
        phi: Formula,
        observation: Observation,
        generators: Mapping | None = None,
        domain: DataDomain | None = None,
        config: MonitorConfig | None = None,
    ):
        self.config = config or MonitorConfig()
        self.generators = dict(generators or {})
        self.domain = domain or generic_domain(observation.traces)
        self.blocks, self.body = prepare(phi, self.domain, self.generators, self.config)
        self.observation = observation
        self.ctx = _Context(observation, self.generators, self.domain, self.config)
        self.root = MonitorNode(self.ctx, self.blocks, self.body, {})
        self.verdict = Verdict.UNKNOWN
        self.steps = 0

    @property
    def stats(self) -> Stats:
        return self.ctx.stats

    @property
    def witness(self) -> dict[str, str] | None:
        return self.root.witness

    def step(self) -> Verdict:
        if self.verdict.conclusive:
            return self.verdict
        self.steps += 1
        self.ctx.stats.steps += 1
        self.verdict = self.root.step()
        return self.verdict

    def _fingerprint(self) -> tuple:
        s = self.ctx.stats
        gens = tuple(getattr(g, "revision", 0) for g in self.generators.values())
        return (s.tuples, s.atoms_stepped, s.children_created, s.atom_runs, s.resolved, self.observation.revision, gens)

    def run(self, timeout: float | None = ...) -> MonitorResult:
        timeout = self.config.timeout if timeout is ... else timeout
        start = time.perf_counter()
        status = None
        last = None
        while True:
            v = self.step()
            if v.conclusive or v is Verdict.UNKNOWN_GAVE_UP:
                status = v.value
                break
            fp = self._fingerprint()
            if fp == last:
                status = Verdict.UNKNOWN.value
                break
            last = fp
            if timeout is not None and time.perf_counter() - start > timeout:
                status = "timeout"
                break
        elapsed = time.perf_counter() - start
        self.ctx.stats.events_consumed = sum(len(t.events) for t in self.observation.traces)
        log.debug("monitor finished: %s after %d steps", status, self.steps)
        return MonitorResult(self.verdict, status, self.witness, self.ctx.stats, elapsed, self.steps)


def monitor(
    phi: Formula,
    observation: Observation,
    generators: Mapping | None = None,
    domain: DataDomain | None = None,
    config: MonitorConfig | None = None,
):
    """Yield the verdict after each step until it is conclusive or no progress is possible."""
    m = Monitor(phi, observation, generators, domain, config)
    last = None
    while True:
        v = m.step()
        yield v
        if v.conclusive or v is Verdict.UNKNOWN_GAVE_UP:
            return
        fp = m._fingerprint()
        if fp == last:
            return
        last = fp


def run_monitor(
    phi: Formula,
    observation: Observation,
    generators: Mapping | None = None,
    domain: DataDomain | None = None,
    config: MonitorConfig | None = None,
) -> MonitorResult:
    return Monitor(phi, observation, generators, domain, config).run()
