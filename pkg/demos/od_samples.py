"""Catching a leaky robot with and without a sampling generator.

A robot walks through public waypoints and then, for some secret targets,
walks on to the target.  An observer who only sees grid areas can tell the
targets apart, which breaks observational determinism.

Plain monitoring must wait for two observed runs with the same input.  With
``samples`` the monitor re-runs the system on each observed input and
compares against those runs instead.

    python3 demos/od_samples.py
"""
from __future__ import annotations

import statistics

from hypermon.scenarios.bench import OD_FORMULA, OD_SAMPLES_FORMULA, od_trial

TRIALS = 10

print("formula without generator:", OD_FORMULA)
print("formula with samples:     ", OD_SAMPLES_FORMULA)
print()
for label, n in (("no generator", None), ("1 sample", 1), ("5 samples", 5)):
    runs = [od_trial(seed, n, input_length=4) for seed in range(TRIALS)]
    counts = [r.traces_to_violation for r in runs]
    shown = [c if c is not None else "-" for c in counts]
    found = [c for c in counts if c is not None]
    med = statistics.median(found) if found else "n/a"
    print(f"{label:>12}: traces until violation {shown}  median {med}")
