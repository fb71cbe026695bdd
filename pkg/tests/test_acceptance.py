"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (visible without ``-s``)
and then asserts.  Run just these with ``pytest tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import json
import os
import random
import statistics
import subprocess
import sys
import time
from pathlib import Path

import pytest

from hypermon import oracle
from hypermon.formula import Concat, Const, Leq, Proj, Stutter, parse
from hypermon.generators import GeneratorObject, legal, lin
from hypermon.monitor import Monitor, MonitorConfig
from hypermon.scenarios.bench import od_trial, opacity_run
from hypermon.scenarios.queue import LIN_FORMULA, LIN_LEGAL_FORMULA, gen_queue_histories, queue_domain
from hypermon.trace_model import DataDomain, Observation, Trace, is_prefix, load_traces, stutter_reduce
from hypermon.transducer import compile_atom, compose_sequential, compile_trace_formula, prefix_automaton, transduce
from hypermon.verdict import Verdict
from randgen import DOMAIN, rand_atom, rand_formula, rand_trace
from test_transducer import LD, composed_reference, letter_machines, product_reference, rand_tf, words

TESTS = Path(__file__).parent
ROOT = TESTS.parent


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}", flush=True)
        assert ok, detail

    return emit


def _table_generator(rng, pool):
    table = {}

    def f(t):
        if t.id not in table:
            table[t.id] = rng.sample(pool, rng.randint(0, len(pool)))
        return table[t.id]

    return f


def test_criterion_1_monitor_matches_oracle(report):
    rng = random.Random(20240611)
    n, agree, inconclusive = 1000, 0, 0
    start = time.perf_counter()
    for _ in range(n):
        traces = [rand_trace(rng, f"t{i}", 5) for i in range(rng.randint(0, 3))]
        pool = traces + [rand_trace(rng, f"x{i}", 5) for i in range(2)]
        gens = {g: GeneratorObject(g, _table_generator(rng, pool)) for g in ("f", "g")}
        phi = rand_formula(rng, ["f", "g"])
        res = Monitor(phi, Observation(traces, closed=True), gens, DOMAIN, MonitorConfig(timeout=None)).run()
        if not res.verdict.conclusive:
            inconclusive += 1
            continue
        agree += res.verdict is Verdict.of(oracle.evaluate(phi, traces, DOMAIN, gens))
    elapsed = time.perf_counter() - start
    ok = agree == n and elapsed < 120
    report(1, ok, f"{agree}/{n} agree, {inconclusive} inconclusive, {elapsed:.1f}s")


def test_criterion_2_atoms_and_composition(report):
    rng = random.Random(7)
    atoms, wrong = 500, 0
    for _ in range(atoms):
        atom = rand_atom(rng)
        A = compile_atom(atom, DOMAIN)
        for _ in range(8):
            env = {"p": rand_trace(rng, "p", 5), "q": rand_trace(rng, "q", 5)}
            wrong += A.holds(env) != oracle.eval_atom(atom, env, DOMAIN)

    comp_bad = prod_bad = 0
    ms = letter_machines()
    for T, U in itertools.product(ms, repeat=2):
        C = compose_sequential(T, U)
        comp_bad += sum(transduce(C, list(w), max_out=6) != composed_reference(T, U, w) for w in words("ab", 4))
    for _ in range(30):
        T = compile_trace_formula(rand_tf(rng), LD)
        U = rng.choice(ms)
        C = compose_sequential(T, U)
        comp_bad += sum(transduce(C, list(w), max_out=6) != composed_reference(T, U, w) for w in words("abc", 3))
    for T1, T2 in itertools.product(ms[:6], repeat=2):
        P = prefix_automaton(T1, T2, domain=LD)
        for w1 in words("ab", 4):
            for w2 in words("ab", 4):
                prod_bad += P.accepts(list(w1), list(w2)) != product_reference(T1, T2, w1, w2)
    ok = wrong == 0 and comp_bad == 0 and prod_bad == 0
    report(2, ok, f"{atoms} atoms with {wrong} mismatches; compose {comp_bad}, product {prod_bad} mismatches")


def _drawn_automaton(ys, xs) -> bool:
    """The two-state, one-register picture of this atom, taken literally."""
    r = "a"
    if len(ys) > len(xs):
        return False
    for y, x in zip(ys, xs):
        if y != x:
            return False
        r = y
    return True


def test_criterion_3_stutter_atom(report):
    dom = DataDomain(["x", "y"])
    atom = Leq(Stutter(Concat(Const("a"), Proj("y", "p"))), Concat(Const("a"), Proj("x", "q")))
    A = compile_atom(atom, dom)
    rng = random.Random(3)
    checked = wrong = drawn_off = 0
    for ys in words("ab", 4):
        for xs in words("ab", 4):
            tp = Trace.of("p", [{"y": y, "x": rng.choice("ab")} for y in ys])
            tq = Trace.of("q", [{"x": x, "y": rng.choice("ab")} for x in xs])
            env = {"p": tp, "q": tq}
            truth = is_prefix(stutter_reduce(("a",) + ys), ("a",) + xs)
            got = A.holds(env)
            wrong += got != truth or oracle.eval_atom(atom, env, dom) != truth
            # the picture omits transitions; where it differs, it is the one at odds with the semantics
            drawn_off += _drawn_automaton(ys, xs) != got
            checked += 1
    ok = wrong == 0 and len(A.registers) == 1
    report(3, ok, f"{checked} pairs, {wrong} mismatches vs brute force, {len(A.registers)} register(s); "
                  f"literal drawing differs on {drawn_off} pairs")


def test_criterion_4_od_samples(report):
    start = time.perf_counter()
    with_samples = [od_trial(k, 5, input_length=4).traces_to_violation for k in range(10)]
    without = [od_trial(k, None, input_length=4).traces_to_violation for k in range(10)]
    elapsed = time.perf_counter() - start
    # undetected trials count as infinitely late
    m5 = statistics.median(c if c is not None else float("inf") for c in with_samples)
    m0 = statistics.median(c if c is not None else float("inf") for c in without)
    ok = m5 <= 5 and m0 >= 4 * m5 and elapsed < 300
    report(4, ok, f"median with 5 samples {m5}, without {m0}, {elapsed:.1f}s")


def test_criterion_5_opacity(report):
    one = opacity_run(1, "1W", opaque=True, count=100, timeout=30)
    leaky = opacity_run(1, "1W", opaque=False, count=100, timeout=30)
    aat = opacity_run(1, "AAT", opaque=True, count=100, timeout=60)
    ok = (
        one.traces_processed >= 100
        and one.verdict != "false"
        and one.status == "ok"
        and leaky.verdict == "false"
        and one.cpu < aat.cpu
    )
    report(
        5, ok,
        f"1W {one.traces_processed} traces verdict {one.verdict} cpu {one.cpu:.2f}s; "
        f"non-opaque {leaky.verdict}; AAT cpu {aat.cpu:.2f}s",
    )


def _lin_verdict(text, trace):
    dom = queue_domain()
    gens = {"lin": GeneratorObject("lin", lin()), "legal": GeneratorObject("legal", legal())}
    phi = parse(text, dom, generators=set(gens))
    return Monitor(phi, Observation([trace], closed=True), gens, dom, MonitorConfig(timeout=60)).run()


def test_criterion_6_linearizability(report):
    fixtures = load_traces(str(TESTS / "data" / "lin_fixtures.jsonl"))
    expected = json.loads((TESTS / "data" / "lin_fixtures_expected.json").read_text())
    f1_bad = f2_bad = 0
    for t in fixtures:
        v1 = _lin_verdict(LIN_FORMULA, t).verdict
        v2 = _lin_verdict(LIN_LEGAL_FORMULA, t).verdict
        f1_bad += v1 is not Verdict.of(expected[t.id])
        f2_bad += v2 is not v1
    big = gen_queue_histories(50, nops=50, count=1)[0]
    start = time.perf_counter()
    res = _lin_verdict(LIN_FORMULA, big)
    elapsed = time.perf_counter() - start
    ok = len(expected) == 20 and f1_bad == 0 and f2_bad == 0 and res.verdict.conclusive and elapsed < 60
    report(6, ok, f"formula 1 wrong on {f1_bad}/20, formula 2 disagrees on {f2_bad}; "
                  f"nops=50 gives {res.verdict.value} in {elapsed:.2f}s")


INVARIANT_SUITES = [
    "tests/test_trace_model.py::TestStutter",
    "tests/test_trace_model.py::TestSlice",
    "tests/test_transducer.py::TestBasics::test_stutter_idempotent",
    "tests/test_transducer.py::TestBasics::test_slice_total_all_signs",
    "tests/test_formula.py::TestNegate",
    "tests/test_monitor.py::TestTree::test_stability",
    "tests/test_basic_monitor.py::TestBasicMonitor::test_early_false_among_satisfied",
    "tests/test_generators.py::TestInstances::test_snapshots_form_a_chain",
    "tests/test_generators.py::TestLinearize",
    "tests/test_transducer.py::TestCompose",
    "tests/test_transducer.py::TestProduct",
]


def _branch_coverage(data: dict, path: Path, fn) -> tuple[int, int]:
    import inspect

    lines, first = inspect.getsourcelines(fn)
    span = range(first, first + len(lines))
    entry = next(v for k, v in data["files"].items() if Path(k).resolve() == path.resolve())
    executed = [a for a in entry["executed_branches"] if a[0] in span]
    missing = [a for a in entry["missing_branches"] if a[0] in span]
    return len(executed), len(executed) + len(missing)


def test_criterion_7_invariants_and_coverage(report, tmp_path):
    from hypermon import transducer

    env = {**os.environ, "COVERAGE_FILE": str(tmp_path / ".coverage")}
    run = subprocess.run(
        [sys.executable, "-m", "coverage", "run", "--branch", "--source=hypermon", "-m", "pytest", "-q",
         "-p", "no:cacheprovider", *INVARIANT_SUITES],
        cwd=ROOT, env=env, capture_output=True, text=True, timeout=900,
    )
    out = tmp_path / "cov.json"
    subprocess.run([sys.executable, "-m", "coverage", "json", "-o", str(out)], cwd=ROOT, env=env,
                   capture_output=True, check=True, timeout=120)
    data = json.loads(out.read_text())
    src = Path(transducer.__file__)
    hit = total = 0
    for fn in (transducer.compose_sequential, transducer.prefix_product):
        h, t = _branch_coverage(data, src, fn)
        hit, total = hit + h, total + t
    pct = 100.0 * hit / total if total else 0.0
    ok = run.returncode == 0 and pct >= 95.0
    tail = run.stdout.strip().splitlines()[-1] if run.stdout.strip() else run.stderr[-200:]
    report(7, ok, f"invariant suites: {tail}; composition branch coverage {pct:.1f}% ({hit}/{total})")
