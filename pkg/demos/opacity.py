"""Initial-state opacity with an equal-area generator in two modes.

The robot starts in one of several secret cells.  The system is opaque when
every run has a twin with the same observable areas but different actions.
``eqarea`` searches for such twins; ``1W`` stops at the first one found while
``AAT`` lists them all, which is far more expensive.

    python3 demos/opacity.py
"""
from __future__ import annotations

from hypermon.scenarios.bench import OPACITY_FORMULA, opacity_run

print("formula:", OPACITY_FORMULA)
for mode, opaque in (("1W", True), ("AAT", True), ("1W", False)):
    r = opacity_run(seed=1, mode=mode, opaque=opaque, count=100, timeout=60)
    kind = "opaque" if opaque else "non-opaque"
    print(f"{mode:>3} on {kind:<10}: verdict {r.verdict:<5} after {r.traces_processed:>3} traces, cpu {r.cpu:.2f}s")
