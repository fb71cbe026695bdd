"""Experiment drivers shared by the CLI, the demos and the acceptance tests."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from random import Random

from ..formula import parse
from ..generators import GeneratorObject, eqarea, legal, lin, samples
from ..monitor import Monitor, MonitorConfig
from ..trace_model import Observation
from ..verdict import Verdict
from .queue import LIN_FORMULA, LIN_LEGAL_FORMULA, gen_queue_histories, lin_bounded_formula, queue_domain
from .robot import Grid, ODSystem, gen_od_traces, gen_opacity_traces, robot_domain

OD_FORMULA = "forall p, q . input(p) <= input(q) -> area(p) = area(q)"
OD_SAMPLES_FORMULA = "forall p . forall q in samples(p) . area(p) = area(q)"
OPACITY_FORMULA = "forall p . exists q in eqarea(p) . act(p) != act(q)"


def _drain(m: Monitor, deadline: float | None) -> Verdict:
    """Step until conclusive or until nothing changes."""
    last = None
    while True:
        v = m.step()
        if v.conclusive or v is Verdict.UNKNOWN_GAVE_UP:
            return v
        fp = m._fingerprint()
        if fp == last:
            return v
        last = fp
        if deadline is not None and time.perf_counter() > deadline:
            return v


@dataclass
class ODTrial:
    seed: int
    traces_to_violation: int | None
    verdict: str
    elapsed: float


def od_trial(
    seed: int,
    n_samples: int | None,
    input_length: int = 4,
    give_up: int = 2048,
    leak: float = 0.5,
    timeout: float | None = 60.0,
) -> ODTrial:
    """Feed fresh traces one at a time until the monitor reports a violation.

    ``n_samples=None`` monitors the plain formula over observed pairs;
    otherwise the samples generator supplies comparison traces.
    """
    wl = gen_od_traces(seed, input_length, 0, leak=leak)
    system: ODSystem = wl.system
    rng = Random(seed * 7919 + 1)
    dom = robot_domain()
    obs = Observation()
    if n_samples is None:
        phi = parse(OD_FORMULA, dom)
        gens = {}
    else:
        gens = {"samples": GeneratorObject("samples", samples(system, n_samples, seed))}
        phi = parse(OD_SAMPLES_FORMULA, dom, generators=set(gens))
    m = Monitor(phi, obs, gens, dom, MonitorConfig(timeout=timeout, give_up=give_up))
    start = time.perf_counter()
    deadline = start + timeout if timeout else None
    cells = system.grid.cells()
    v = Verdict.UNKNOWN
    for i in range(give_up):
        inputs = tuple(rng.choice(wl.pool) for _ in range(input_length))
        obs.add(system.run_with(inputs, rng.choice(cells), f"t{i}"))
        v = _drain(m, deadline)
        if v is Verdict.FALSE:
            return ODTrial(seed, i + 1, v.value, time.perf_counter() - start)
        if deadline is not None and time.perf_counter() > deadline:
            return ODTrial(seed, None, "timeout", time.perf_counter() - start)
    return ODTrial(seed, None, Verdict.UNKNOWN_GAVE_UP.value, time.perf_counter() - start)


def od_bench(trials: int = 10, n_values=(None, 1, 5), input_length: int = 4, seed: int = 0, give_up: int = 2048):
    """Rows ``(label, median traces to violation, detected, trials)``."""
    rows = []
    for n in n_values:
        res = [od_trial(seed + k, n, input_length, give_up) for k in range(trials)]
        counts = [r.traces_to_violation for r in res]
        found = [c for c in counts if c is not None]
        # undetected trials count as the give-up bound, as in a capped experiment
        capped = [c if c is not None else give_up for c in counts]
        label = "no samples" if n is None else f"{n} sample(s)"
        rows.append({
            "monitor": label,
            "median_traces": statistics.median(capped),
            "mean_traces": round(statistics.mean(capped), 2),
            "detected": len(found),
            "trials": trials,
            "seconds": round(sum(r.elapsed for r in res), 3),
        })
    return rows


@dataclass
class OpacityRun:
    mode: str
    opaque: bool
    verdict: str
    traces_processed: int
    cpu: float
    status: str


def opacity_run(
    seed: int, mode: str, opaque: bool = True, input_length: int = 8, count: int = 100, timeout: float = 30.0
) -> OpacityRun:
    """Stream ``count`` traces through the eqarea-based opacity monitor."""
    wl = gen_opacity_traces(seed, input_length, count, opaque)
    dom = robot_domain()
    gens = {"eqarea": GeneratorObject("eqarea", eqarea(wl.system, mode))}
    phi = parse(OPACITY_FORMULA, dom, generators=set(gens))
    obs = Observation()
    m = Monitor(phi, obs, gens, dom, MonitorConfig(timeout=timeout))
    c0 = time.process_time()
    w0 = time.perf_counter()
    deadline = w0 + timeout
    processed = 0
    v = Verdict.UNKNOWN
    status = "ok"
    for t in wl.traces:
        obs.add(t)
        v = _drain(m, deadline)
        processed += 1
        if v.conclusive:
            break
        if time.perf_counter() > deadline:
            status = "timeout"
            break
    if not v.conclusive and status == "ok":
        obs.close()
        v = _drain(m, deadline)
    return OpacityRun(mode, opaque, v.value, processed, time.process_time() - c0, status)


def queue_bench(nops_values=(8, 16, 32), seed: int = 0, count: int = 1, timeout: float = 60.0):
    """CPU seconds per formula and history size, like the linearizability table."""
    dom = queue_domain()
    formulas = {"lin": LIN_FORMULA, "lin + legal": LIN_LEGAL_FORMULA, "lin + bounded": lin_bounded_formula(2)}
    rows = []
    for label, text in formulas.items():
        row = {"formula": label}
        for nops in nops_values:
            traces = gen_queue_histories(seed + nops, nops, count)
            gens = {"lin": GeneratorObject("lin", lin()), "legal": GeneratorObject("legal", legal())}
            phi = parse(text, dom, generators=set(gens))
            obs = Observation(traces, closed=True)
            c0 = time.process_time()
            res = Monitor(phi, obs, gens, dom, MonitorConfig(timeout=timeout)).run()
            row[f"nops={nops}"] = round(time.process_time() - c0, 4)
            row[f"verdict@{nops}"] = res.status
        rows.append(row)
    return rows


def markdown_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for r in rows:
        lines.append("| " + " | ".join(str(r.get(c, "")) for c in cols) + " |")
    return "\n".join(lines)


def csv_table(rows: list[dict]) -> str:
    import csv
    import io

    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
