"""Checking concurrent queue histories for linearizability.

``lin`` returns one sequential witness for a history, or nothing when none
exists; ``legal`` re-checks that witness against a FIFO queue.  A history
generated in bug mode has a pop that returns an already-taken value.

    python3 demos/linearizability.py
"""
from __future__ import annotations

import time

from hypermon.formula import parse
from hypermon.generators import GeneratorObject, history, legal, lin
from hypermon.monitor import Monitor, MonitorConfig
from hypermon.scenarios.queue import LIN_FORMULA, LIN_LEGAL_FORMULA, gen_queue_histories, queue_domain
from hypermon.trace_model import Observation

dom = queue_domain()


def check(text, traces):
    gens = {"lin": GeneratorObject("lin", lin()), "legal": GeneratorObject("legal", legal())}
    phi = parse(text, dom, generators=set(gens))
    start = time.perf_counter()
    res = Monitor(phi, Observation(traces, closed=True), gens, dom, MonitorConfig(timeout=60)).run()
    return res, time.perf_counter() - start


bug = gen_queue_histories(3, nops=2, count=10, mode="bug")
res, _ = check(LIN_FORMULA, bug)
print(f"10 buggy histories: {res.verdict.value}, witness {res.witness}")
if res.witness:
    bad = next(t for t in bug if t.id == res.witness["p"])
    for op in sorted(history(bad), key=lambda o: o.inv):
        print(f"   {op.proc} {op.op}({op.param})  [{op.inv}, {op.res}]")

for nops in (8, 16, 32, 50):
    good = gen_queue_histories(nops, nops=nops, count=1)
    for label, text in (("lin", LIN_FORMULA), ("lin+legal", LIN_LEGAL_FORMULA)):
        res, secs = check(text, good)
        print(f"nops={nops:>2} {label:<9}: {res.verdict.value} in {secs:.3f}s")
