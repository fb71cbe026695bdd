"""Robot on a grid: workloads for observational determinism and opacity.

Cells are ``(row, col)``.  Areas are square blocks; an observer sees only the
area of each step.  Every trace event carries three variables:

``input``
    the public input word, then the delimiter ``•``, then ``#`` padding
``area``
    area id of the cell the robot is in at this step
``act``
    ``left``, ``right``, ``up``, ``down`` or ``stand``
"""
from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field
from random import Random
from typing import Any

from ..errors import GeneratorError
from ..trace_model import DataDomain, Observation, Trace, Valuation

DELIM = "•"
PAD = "#"
MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}

Cell = tuple[int, int]


@dataclass(frozen=True)
class Grid:
    width: int = 10
    height: int = 10
    block: int = 2

    @property
    def areas_per_row(self) -> int:
        return (self.width + self.block - 1) // self.block

    @property
    def n_areas(self) -> int:
        return self.areas_per_row * ((self.height + self.block - 1) // self.block)

    def area(self, cell: Cell) -> int:
        r, c = cell
        return (r // self.block) * self.areas_per_row + c // self.block

    def canonical(self, area: int) -> Cell:
        return ((area // self.areas_per_row) * self.block, (area % self.areas_per_row) * self.block)

    def cells(self) -> list[Cell]:
        return [(r, c) for r in range(self.height) for c in range(self.width)]

    def inside(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width


def step(cell: Cell, act: str) -> Cell:
    if act == "stand":
        return cell
    dr, dc = MOVES[act]
    return (cell[0] + dr, cell[1] + dc)


def closer_moves(cell: Cell, goal: Cell) -> list[str]:
    """Moves that reduce the Manhattan distance to ``goal``, in a fixed order."""
    out = []
    if goal[0] < cell[0]:
        out.append("up")
    if goal[0] > cell[0]:
        out.append("down")
    if goal[1] < cell[1]:
        out.append("left")
    if goal[1] > cell[1]:
        out.append("right")
    return out


def robot_domain() -> DataDomain:
    return DataDomain(["input", "area", "act"], name="robot")


def _hash(*parts: Any) -> int:
    return zlib.crc32(":".join(map(str, parts)).encode())


def input_word(trace: Trace) -> tuple:
    """The input areas at the start of a trace, up to the delimiter."""
    out = []
    for v in trace.events:
        a = v["input"]
        if a == DELIM:
            return tuple(out)
        out.append(a)
    return tuple(out)


def make_trace(tid: str, inputs: tuple, cells: list[Cell], acts: list[str], grid: Grid) -> Trace:
    """Event ``i`` records the area of ``cells[i]`` and the action taken there."""
    # pad so that the whole input word and the delimiter fit
    while len(acts) < len(inputs) + 1:
        cells.append(cells[-1])
        acts.append("stand")
    events = []
    for i, (cell, act) in enumerate(zip(cells, acts)):
        inp = inputs[i] if i < len(inputs) else (DELIM if i == len(inputs) else PAD)
        events.append(Valuation({"input": inp, "area": grid.area(cell), "act": act}))
    return Trace(tid, events, True)


# ---------------------------------------------------------------------------
# observational determinism


@dataclass
class ODSystem:
    """Deterministic strategy; targets in ``leaky`` reveal themselves.

    The robot visits the canonical cell of each input area in order.  A
    robot whose secret target is leaky then walks on to the target; any
    other robot stops at the last waypoint.
    """

    grid: Grid = field(default_factory=Grid)
    strategy_seed: int = 0
    leaky: frozenset = frozenset()
    start: Cell = (0, 0)

    kind = "od"

    def route(self, inputs: tuple, target: Cell) -> tuple[list[Cell], list[str]]:
        goals = [self.grid.canonical(a) for a in inputs]
        if target in self.leaky:
            goals.append(target)
        cell = self.start
        cells, acts = [cell], []
        for g in goals:
            while cell != g:
                opts = closer_moves(cell, g)
                act = opts[_hash(self.strategy_seed, cell, g) % len(opts)]
                acts.append(act)
                cell = step(cell, act)
                cells.append(cell)
        acts.append("stand")
        return cells, acts

    def run(self, inputs: tuple, rng: Random, tid: str) -> Trace:
        target = rng.choice(self.grid.cells())
        cells, acts = self.route(inputs, target)
        return make_trace(tid, inputs, cells, acts, self.grid)

    def run_with(self, inputs: tuple, target: Cell, tid: str) -> Trace:
        cells, acts = self.route(inputs, target)
        return make_trace(tid, inputs, cells, acts, self.grid)

    def inputs_of(self, trace: Trace) -> tuple:
        return input_word(trace)

    def same_area(self, trace: Trace, mode: str) -> list[Trace]:
        raise GeneratorError("eqarea is defined for the opacity system only")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "grid": asdict(self.grid),
            "strategy_seed": self.strategy_seed,
            "leaky": sorted(list(c) for c in self.leaky),
            "start": list(self.start),
        }


def waypoint_pool(grid: Grid, rng: Random, size: int = 5) -> list[int]:
    return sorted(rng.sample(range(grid.n_areas), size))


@dataclass
class ODWorkload:
    system: ODSystem
    traces: list[Trace]
    targets: dict[str, Cell]
    pool: list[int]

    def observation(self, closed: bool = True) -> Observation:
        return Observation(self.traces, closed=closed)

    def meta(self) -> dict:
        return {
            "system": self.system.to_json(),
            "pool": self.pool,
            "targets": {k: list(v) for k, v in self.targets.items()},
        }


def gen_od_traces(
    seed: int,
    input_length: int = 4,
    count: int = 100,
    strategy_seed: int | None = None,
    leak: float = 0.5,
    pool_size: int = 5,
    grid: Grid | None = None,
) -> ODWorkload:
    """Random inputs drawn from a small pool of areas, random secret targets.

    ``leak`` is the fraction of cells that are leaky targets; ``0`` gives a
    leak-free strategy.
    """
    grid = grid or Grid()
    rng = Random(seed)
    sseed = strategy_seed if strategy_seed is not None else rng.randrange(1 << 30)
    srng = Random(sseed)
    cells = grid.cells()
    leaky = frozenset(c for c in cells if srng.random() < leak) if leak > 0 else frozenset()
    pool = waypoint_pool(grid, srng, pool_size)
    system = ODSystem(grid, sseed, leaky)
    traces, targets = [], {}
    for i in range(count):
        inputs = tuple(rng.choice(pool) for _ in range(input_length))
        target = rng.choice(cells)
        tid = f"t{i}"
        traces.append(system.run_with(inputs, target, tid))
        targets[tid] = target
    return ODWorkload(system, traces, targets, pool)


def od_violating_pairs(workload: ODWorkload) -> list[tuple[str, str]]:
    """Trace pairs with equal inputs whose area words differ."""
    by_input: dict[tuple, list[Trace]] = {}
    for t in workload.traces:
        by_input.setdefault(input_word(t), []).append(t)
    out = []
    for group in by_input.values():
        for i, a in enumerate(group):
            for b in group[i + 1 :]:
                if [v["area"] for v in a.events] != [v["area"] for v in b.events]:
                    out.append((a.id, b.id))
    return out


# ---------------------------------------------------------------------------
# initial-state opacity


@dataclass
class OpacitySystem:
    """Nondeterministic robot with several secret initial cells.

    In the opaque variant the initial cells share an area and at step 0 the
    robot may either stand or swap to another initial cell, so every run
    has a twin with the same areas but different actions.  In the
    non-opaque variant the initial cells lie in different areas and the
    strategy is deterministic.
    """

    grid: Grid = field(default_factory=Grid)
    opaque: bool = True
    initial: tuple = ((0, 0), (0, 1))
    strategy_seed: int = 0
    aat_limit: int = 200000

    kind = "opacity"

    def goals(self, inputs: tuple) -> list[Cell]:
        return [self.grid.canonical(a) for a in inputs]

    def options(self, cell: Cell, t: int, goal_idx: int, goals: list[Cell]) -> list[str]:
        """Allowed actions at ``cell`` at time ``t`` while heading to ``goals[goal_idx]``."""
        if goal_idx >= len(goals):
            return []
        g = goals[goal_idx]
        if self.opaque:
            if t == 0:
                opts = ["stand"]
                for a in MOVES:
                    if step(cell, a) in self.initial and step(cell, a) != cell:
                        opts.append(a)
                return opts
            return closer_moves(cell, g)
        moves = closer_moves(cell, g)
        return [moves[_hash(self.strategy_seed, cell, g) % len(moves)]]

    def _advance(self, cell: Cell, goal_idx: int, goals: list[Cell]) -> int:
        while goal_idx < len(goals) and cell == goals[goal_idx]:
            goal_idx += 1
        return goal_idx

    def run(self, inputs: tuple, rng: Random, tid: str) -> Trace:
        goals = self.goals(inputs)
        cell = rng.choice(list(self.initial))
        cells, acts = [cell], []
        gi = self._advance(cell, 0, goals) if not self.opaque else 0
        t = 0
        while True:
            if t > 0 or not self.opaque:
                gi = self._advance(cell, gi, goals)
            opts = self.options(cell, t, gi, goals)
            if not opts:
                break
            act = rng.choice(opts)
            acts.append(act)
            cell = step(cell, act)
            cells.append(cell)
            t += 1
        acts.append("stand")
        return make_trace(tid, inputs, cells, acts, self.grid)

    def inputs_of(self, trace: Trace) -> tuple:
        return input_word(trace)

    def same_area(self, trace: Trace, mode: str) -> list[Trace]:
        """Runs on the same inputs whose area word matches ``trace``.

        ``"AAT"`` returns all of them (capped at ``aat_limit``); ``"1W"``
        returns the first one found whose actions differ, or nothing.
        """
        inputs = input_word(trace)
        goals = self.goals(inputs)
        areas = [v["area"] for v in trace.events]
        acts = [v["act"] for v in trace.events]
        n = len(areas)
        found: list[Trace] = []
        counter = [0]

        def emit(path_cells, path_acts):
            counter[0] += 1
            tr = make_trace(f"{trace.id}~eq{counter[0]}", inputs, list(path_cells), list(path_acts), self.grid)
            return tr

        for start in self.initial:
            if self.grid.area(start) != areas[0]:
                continue
            stack = [(start, 0, 0, (start,), ())]
            while stack:
                cell, t, gi, cs, ac = stack.pop()
                if t > 0 or not self.opaque:
                    gi = self._advance(cell, gi, goals)
                opts = self.options(cell, t, gi, goals)
                if not opts:
                    # finished: the trace ends with a final stand and padding
                    cand_acts = ac + ("stand",)
                    cand = emit(cs, cand_acts)
                    if [v["area"] for v in cand.events] != areas:
                        continue
                    if mode == "1W":
                        if [v["act"] for v in cand.events] != acts:
                            return [cand]
                        continue
                    found.append(cand)
                    if len(found) >= self.aat_limit:
                        return found
                    continue
                if t + 1 >= n:
                    continue
                for a in reversed(opts):
                    nxt = step(cell, a)
                    if self.grid.area(nxt) != areas[t + 1]:
                        continue
                    stack.append((nxt, t + 1, gi, cs + (nxt,), ac + (a,)))
        return found if mode == "AAT" else []

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "grid": asdict(self.grid),
            "opaque": self.opaque,
            "initial": [list(c) for c in self.initial],
            "strategy_seed": self.strategy_seed,
            "aat_limit": self.aat_limit,
        }


@dataclass
class OpacityWorkload:
    system: OpacitySystem
    traces: list[Trace]

    def observation(self, closed: bool = True) -> Observation:
        return Observation(self.traces, closed=closed)

    def meta(self) -> dict:
        return {"system": self.system.to_json()}


def gen_opacity_traces(
    seed: int, input_length: int = 8, count: int = 100, opaque: bool = True, grid: Grid | None = None
) -> OpacityWorkload:
    grid = grid or Grid()
    rng = Random(seed)
    if opaque:
        system = OpacitySystem(grid, True, ((0, 0), (0, 1)), seed)
    else:
        system = OpacitySystem(grid, False, ((0, 0), (0, grid.block), (grid.block, 0)), seed)
    traces = []
    for i in range(count):
        inputs = []
        while len(inputs) < input_length:
            a = rng.randrange(grid.n_areas)
            if not inputs or inputs[-1] != a:
                inputs.append(a)
        traces.append(system.run(tuple(inputs), rng, f"t{i}"))
    return OpacityWorkload(system, traces)


def system_from_json(d: dict):
    grid = Grid(**d.get("grid", {}))
    if d["kind"] == "od":
        return ODSystem(grid, d["strategy_seed"], frozenset(tuple(c) for c in d["leaky"]), tuple(d.get("start", (0, 0))))
    if d["kind"] == "opacity":
        return OpacitySystem(
            grid, d["opaque"], tuple(tuple(c) for c in d["initial"]), d.get("strategy_seed", 0), d.get("aat_limit", 200000)
        )
    raise GeneratorError(f"unknown system kind {d['kind']!r}")


def dump_meta(meta: dict) -> str:
    return json.dumps(meta, sort_keys=True, indent=1)
