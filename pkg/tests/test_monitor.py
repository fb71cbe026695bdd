from __future__ import annotations

import random

import pytest

from hypermon import oracle
from hypermon.errors import SpecificationError, UnsupportedFragmentError
from hypermon.formula import Not, negate, parse, quantifier_blocks
from hypermon.generators import GeneratorObject, constant
from hypermon.monitor import Monitor, MonitorConfig, monitor, run_monitor
from hypermon.trace_model import Observation, Trace
from hypermon.verdict import Verdict
from randgen import DOMAIN, rand_formula, rand_trace


def tv(tid, letters, terminated=True):
    return Trace.of(tid, [{"v": x} for x in letters], terminated)


def random_instance(rng):
    traces = [rand_trace(rng, f"t{i}", 5) for i in range(rng.randint(0, 3))]
    pool = traces + [rand_trace(rng, f"f{i}", 5) for i in range(2)]

    def table_gen():
        tab = {}

        def f(t):
            if t.id not in tab:
                tab[t.id] = rng.sample(pool, rng.randint(0, len(pool)))
            return tab[t.id]

        return f

    gens = {g: GeneratorObject(g, table_gen()) for g in ("f", "g")}
    return traces, gens, rand_formula(rng, ["f", "g"])


class TestAgreement:
    def test_random_closed_instances(self):
        rng = random.Random(42)
        for _ in range(300):
            traces, gens, phi = random_instance(rng)
            r = Monitor(phi, Observation(traces, closed=True), gens, DOMAIN, MonitorConfig(timeout=None)).run()
            assert r.verdict.conclusive
            assert r.verdict is Verdict.of(oracle.evaluate(phi, traces, DOMAIN, gens))

    def test_duality(self):
        rng = random.Random(43)
        for _ in range(150):
            traces, gens, phi = random_instance(rng)
            a = Monitor(phi, Observation(traces, closed=True), gens, DOMAIN, MonitorConfig(timeout=None)).run()
            b = Monitor(negate(phi), Observation(traces, closed=True), gens, DOMAIN, MonitorConfig(timeout=None)).run()
            assert b.verdict is a.verdict.negated()

    def test_not_prefix_accepted(self):
        phi = parse("forall p . eps <= v(p)", DOMAIN)
        r = run_monitor(Not(phi), Observation([tv("a", "a")], closed=True), domain=DOMAIN)
        assert r.verdict is Verdict.FALSE


class TestTree:
    def test_children_count(self):
        phi = parse("forall p, q . exists r . eps <= v(r)", DOMAIN)
        traces = [tv(f"t{i}", "ab") for i in range(3)]
        m = Monitor(phi, Observation(traces, closed=True), {}, DOMAIN)
        assert m.run().verdict is Verdict.TRUE
        assert m.stats.children_created == 9

    def test_stability(self):
        phi = parse("forall p, q . v(p) = v(q)", DOMAIN)
        obs = Observation([tv("a", "a"), tv("b", "b")])
        m = Monitor(phi, obs, {}, DOMAIN)
        first = None
        for _ in range(5):
            v = m.step()
            if v.conclusive and first is None:
                first = v
        assert first is Verdict.FALSE
        obs.add(tv("c", "a"))
        assert m.step() is Verdict.FALSE

    def test_passive_alternation_free_is_conclusive(self):
        rng = random.Random(44)
        for _ in range(150):
            traces = [rand_trace(rng, f"t{i}", 4) for i in range(rng.randint(0, 3))]
            phi = rand_formula(rng)
            if len(quantifier_blocks(phi)[0]) != 1:
                continue
            r = run_monitor(phi, Observation(traces, closed=True), domain=DOMAIN)
            assert r.verdict.conclusive

    def test_generator_witness(self):
        phi = parse("forall p . exists q in f(p) . v(p) = v(q)", DOMAIN, generators={"f"})
        a, b = tv("a", "ab"), tv("b", "ba")
        twin = tv("twin", "ab")
        gens = {"f": GeneratorObject("f", lambda t: [twin] if t.id == "a" else [])}
        r = run_monitor(phi, Observation([a, b], closed=True), gens, DOMAIN)
        assert r.verdict is Verdict.FALSE
        assert r.witness["p"] == "b"

    def test_open_observation_stays_unknown(self):
        phi = parse("forall p . eps <= v(p)", DOMAIN)
        r = run_monitor(phi, Observation([tv("a", "a")]), domain=DOMAIN)
        assert r.verdict is Verdict.UNKNOWN and r.status == "unknown"

    def test_give_up_is_not_conclusive(self):
        phi = parse("forall p . eps <= v(p)", DOMAIN)
        traces = [tv(f"t{i}", "a") for i in range(6)]
        r = run_monitor(phi, Observation(traces, closed=True), domain=DOMAIN, config=MonitorConfig(give_up=4))
        assert r.verdict is Verdict.UNKNOWN_GAVE_UP

    def test_give_up_in_inner_block(self):
        phi = parse("forall p . exists q in f(p) . v(p) <= v(q) and not v(p) <= v(q)", DOMAIN, generators={"f"})
        many = [tv(f"g{i}", "a") for i in range(6)]
        gens = {"f": GeneratorObject("f", constant(many))}
        r = run_monitor(phi, Observation([tv("a", "a")], closed=True), gens, DOMAIN, MonitorConfig(give_up=3))
        assert r.verdict is Verdict.UNKNOWN_GAVE_UP

    def test_streaming_generator(self):
        phi = parse("forall p . v(p) <= 'a'; 'b'", DOMAIN)
        obs = Observation()
        obs.add(tv("x", "ab"))
        obs.add(tv("y", "abb"))
        verdicts = list(monitor(phi, obs, domain=DOMAIN))
        assert verdicts[-1] is Verdict.FALSE

    def test_timeout_status(self):
        phi = parse("forall p, q . v(p) <= v(q) or v(q) <= v(p)", DOMAIN)
        traces = [tv(f"t{i}", "ab" * 20) for i in range(30)]
        m = Monitor(phi, Observation(traces, closed=True), {}, DOMAIN, MonitorConfig(timeout=0.001, budget=1))
        r = m.run()
        assert r.status == "timeout" and not r.verdict.conclusive

    def test_describe(self):
        phi = parse("forall p . exists q . v(p) = v(q)", DOMAIN)
        m = Monitor(phi, Observation([tv("a", "a")], closed=True), {}, DOMAIN)
        m.run()
        assert m.root.describe()


class TestValidation:
    def test_unregistered_generator(self):
        phi = parse("forall p . exists q in f(p) . v(p) = v(q)", DOMAIN, generators={"f"})
        with pytest.raises(SpecificationError):
            Monitor(phi, Observation([tv("a", "a")], closed=True), {}, DOMAIN).run()

    def test_passive_alternation_flag(self):
        phi = parse("forall p . exists q . v(p) = v(q)", DOMAIN)
        cfg = MonitorConfig(allow_passive_alternation=False)
        with pytest.raises(UnsupportedFragmentError):
            Monitor(phi, Observation(), {}, DOMAIN, cfg)

    def test_quantifier_free_rejected(self):
        with pytest.raises(SpecificationError):
            Monitor(parse("eps <= eps", DOMAIN), Observation(), {}, DOMAIN)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            MonitorConfig(timeout=0)
        with pytest.raises(ValueError):
            MonitorConfig(give_up=0)
