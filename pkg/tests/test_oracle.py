from __future__ import annotations

import itertools
import random

import pytest

from hypermon import catalog, oracle
from hypermon.errors import SpecificationError
from hypermon.formula import (
    Concat,
    Const,
    Epsilon,
    Not,
    Proj,
    Stutter,
    Union_,
    parse,
    passive,
    quantifier_blocks,
)
from hypermon.trace_model import Trace
from randgen import DOMAIN, rand_formula, rand_trace

SEC = catalog.security_domain()
AB = [{"v": "a"}, {"v": "b"}]


def tv(tid, letters, terminated=True):
    return Trace.of(tid, [{"v": x} for x in letters], terminated)


class TestTraceFormulas:
    def test_concat_with_projection(self):
        t = tv("t", "b")
        assert oracle.eval_trace_formula(Concat(Const("a"), Proj("v", "p")), {"p": t}, DOMAIN, 3) == {("a", "b")}

    def test_union_with_eps(self):
        assert oracle.eval_trace_formula(Union_(Epsilon(), Const("a")), {}, DOMAIN, 3) == {(), ("a",)}

    def test_stutter(self):
        t = tv("t", "aab")
        assert oracle.eval_trace_formula(Stutter(Proj("v", "p")), {"p": t}, DOMAIN, 3) == {("a", "b")}

    def test_unassigned_variable(self):
        with pytest.raises(SpecificationError):
            oracle.eval_trace_formula(Proj("v", "p"), {}, DOMAIN, 3)


def od_pair():
    t0 = Trace.of("t0", [{"inL": 1, "inH": 1, "outL": 1}])
    t1 = Trace.of("t1", [{"inL": 1, "inH": 0, "outL": 0}])
    return t0, t1


class TestEvaluate:
    def test_od_violated_by_example(self):
        phi = parse("forall p, q . inL(p)[0] = inL(q)[0] -> outL(p) ~<= outL(q)", SEC)
        assert not oracle.evaluate(phi, list(od_pair()), SEC)
        assert oracle.evaluate(phi, [od_pair()[0]], SEC)

    def test_vacuous_forall(self):
        assert oracle.evaluate(parse("forall p . v(p) <= eps", DOMAIN), [], DOMAIN)

    def test_empty_exists(self):
        assert not oracle.evaluate(parse("exists p . eps <= v(p)", DOMAIN), [], DOMAIN)

    def test_missing_generator(self):
        phi = parse("forall p . exists q in f(p) . v(p) <= v(q)", DOMAIN, generators={"f"})
        with pytest.raises(SpecificationError):
            oracle.evaluate(phi, [tv("a", "ab")], DOMAIN, {})

    def test_constant_generator_matches_passive(self):
        rng = random.Random(8)
        for _ in range(200):
            traces = [rand_trace(rng, f"t{i}", 4) for i in range(rng.randint(0, 3))]
            phi = rand_formula(rng, ["f"])
            fT = oracle.constant_generator(traces)
            assert oracle.evaluate(phi, traces, DOMAIN, {"f": fT}) == oracle.evaluate(
                passive(phi, {}), traces, DOMAIN
            )

    def test_negation(self):
        rng = random.Random(9)
        for _ in range(200):
            traces = [rand_trace(rng, f"t{i}", 4) for i in range(rng.randint(0, 3))]
            phi = rand_formula(rng)
            assert oracle.evaluate(Not(phi), traces, DOMAIN) == (not oracle.evaluate(phi, traces, DOMAIN))

    def test_universal_subset_closure(self):
        rng = random.Random(10)
        checked = 0
        while checked < 150:
            traces = [rand_trace(rng, f"t{i}", 4) for i in range(rng.randint(1, 3))]
            phi = rand_formula(rng)
            blocks, _ = quantifier_blocks(phi)
            if any(b.existential for b in blocks):
                continue
            checked += 1
            if oracle.evaluate(phi, traces, DOMAIN):
                for k in range(len(traces)):
                    for sub in itertools.combinations(traces, k):
                        assert oracle.evaluate(phi, list(sub), DOMAIN)


class TestGeneratorCorrectness:
    body = parse("forall p, q . v(p) = v(q)", DOMAIN).body.body

    def universe(self):
        words = [w for n in range(3) for w in itertools.product("ab", repeat=n)]
        return [tv(f"u{i}", w) for i, w in enumerate(words)]

    def test_subset_is_correct_for_exists(self):
        U = self.universe()
        spec = oracle.constant_generator(U)
        gen = oracle.constant_generator(U[:3])
        res = oracle.check_generator_correct(gen, "exists", "q", ["p"], self.body, U, spec, DOMAIN)
        assert res.ok

    def test_superset_is_correct_for_forall(self):
        U = self.universe()
        spec = oracle.constant_generator(U[:3])
        gen = oracle.constant_generator(U)
        res = oracle.check_generator_correct(gen, "forall", "q", ["p"], self.body, U, spec, DOMAIN)
        assert res.ok

    def test_outside_trace_is_caught(self):
        U = self.universe()
        spec = oracle.constant_generator(U[:2])
        intruder = tv("x", "bb")
        gen = oracle.constant_generator(U[:2] + [intruder])
        res = oracle.check_generator_correct(gen, "exists", "q", ["p"], self.body, U + [intruder], spec, DOMAIN)
        assert not res.ok and res.trace is intruder


class TestInterpretationSoundness:
    def test_identity_interpretation(self):
        phi = catalog.get("od_test")
        traces = [
            Trace.of("a", [{"pub": 1, "label": "s"}, {"pub": 2}]),
            Trace.of("b", [{"pub": 1, "label": "s"}, {"pub": 3}]),
        ]
        interp = {"test": oracle.constant_generator(traces)}
        assert not oracle.evaluate(phi, traces, SEC, interp)
        assert oracle.check_theorem1(phi, interp, interp, traces, SEC)

    def test_random_correct_runtime_interpretations(self):
        rng = random.Random(4)
        for _ in range(500):
            traces = [rand_trace(rng, f"t{i}", 3) for i in range(rng.randint(0, 3))]
            phi = rand_formula(rng, ["f"])
            blocks, _ = quantifier_blocks(phi)
            gen_blocks = [b for b in blocks if b.source]
            spec = oracle.constant_generator(traces)
            # under-approximate for existential use, over-approximate for universal use
            extra = [rand_trace(rng, "x", 3)]
            polarities = {b.existential for b in gen_blocks}
            if len(polarities) != 1:
                runtime = spec
            elif polarities == {True}:
                runtime = oracle.constant_generator(traces[: rng.randint(0, len(traces))])
            else:
                runtime = oracle.constant_generator(traces + extra)
            assert oracle.check_theorem1(phi, {"f": spec}, {"f": runtime}, traces, DOMAIN)


class TestClassify:
    def test_od_example_is_bad(self):
        phi = parse("forall p, q . inL(p)[0] = inL(q)[0] -> outL(p) ~<= outL(q)", SEC)
        t0, t1 = od_pair()
        assert oracle.classify_observation(phi, [t0, t1], SEC, [], max_events=0, max_new_traces=0) == oracle.BAD

    def test_tautology_is_good(self):
        phi = parse("forall p . eps <= v(p)", DOMAIN)
        assert oracle.classify_observation(phi, [], DOMAIN, AB) == oracle.GOOD

    def test_alternation_on_open_observation(self):
        phi = parse("forall p . exists q . v(p) = v(q) and not v(q) <= eps", DOMAIN)
        O = [tv("a", "a", terminated=False)]
        assert oracle.classify_observation(phi, O, DOMAIN, AB, max_events=1) == oracle.INCONCLUSIVE

    def test_bad_is_stable_under_bigger_bounds(self):
        phi = parse("forall p, q . v(p) = v(q)", DOMAIN)
        O = [tv("a", "a"), tv("b", "b")]
        for bound in (0, 1, 2):
            assert oracle.classify_observation(phi, O, DOMAIN, AB, max_events=bound, max_new_traces=1) == oracle.BAD
