from __future__ import annotations

import io
import json
import re
from random import Random

import pytest

from hypermon import oracle
from hypermon.formula import parse
from hypermon.generators import brute_force_linearizable, history, linearize
from hypermon.scenarios.bench import OD_FORMULA, markdown_table, csv_table
from hypermon.scenarios.queue import (
    bounded_regex,
    exceeds,
    gen_queue_histories,
    lin_bounded_formula,
    queue_domain,
)
from hypermon.scenarios.robot import (
    DELIM,
    PAD,
    Grid,
    dump_meta,
    gen_od_traces,
    gen_opacity_traces,
    input_word,
    od_violating_pairs,
    robot_domain,
    system_from_json,
)
from hypermon.trace_model import read_jsonl, write_jsonl

RD = robot_domain()


def roundtrip(traces):
    buf = io.StringIO()
    write_jsonl(traces, buf, close=True)
    text = buf.getvalue()
    obs = read_jsonl(io.StringIO(text))
    again = io.StringIO()
    write_jsonl(obs.traces, again, close=True)
    return text, again.getvalue(), obs


class TestGrid:
    def test_areas_partition_cells(self):
        g = Grid()
        counts = {}
        for c in g.cells():
            counts[g.area(c)] = counts.get(g.area(c), 0) + 1
        assert len(counts) == g.n_areas == 25
        assert set(counts.values()) == {4}
        for a in range(g.n_areas):
            assert g.area(g.canonical(a)) == a

    def test_ragged_grid(self):
        g = Grid(5, 5, 2)
        assert g.n_areas == 9
        assert {g.area(c) for c in g.cells()} == set(range(9))


class TestOD:
    def test_deterministic(self):
        a, b = gen_od_traces(3, count=20), gen_od_traces(3, count=20)
        assert [t.events for t in a.traces] == [t.events for t in b.traces]
        assert a.meta() == b.meta()

    def test_input_projection_shape(self):
        wl = gen_od_traces(5, input_length=4, count=10)
        for t in wl.traces:
            word = [v["input"] for v in t.events]
            assert word[4] == DELIM
            assert set(word[5:]) <= {PAD}
            assert all(a in wl.pool for a in word[:4])
            assert input_word(t) == tuple(word[:4])
            assert t.terminated

    def test_route_is_contiguous(self):
        wl = gen_od_traces(6, count=10)
        for t in wl.traces:
            acts = [v["act"] for v in t.events]
            assert acts[-1] == "stand"
            assert set(acts) <= {"up", "down", "left", "right", "stand"}

    def test_leak_free_has_no_violations(self):
        wl = gen_od_traces(7, input_length=2, count=40, leak=0.0)
        assert od_violating_pairs(wl) == []
        phi = parse(OD_FORMULA, RD)
        assert oracle.evaluate(phi, wl.traces[:12], RD)

    def test_planted_violations_are_minimal_pairs(self):
        wl = gen_od_traces(8, input_length=2, count=40, pool_size=2)
        pairs = od_violating_pairs(wl)
        assert pairs
        phi = parse(OD_FORMULA, RD)
        by_id = {t.id: t for t in wl.traces}
        for a, b in pairs[:15]:
            assert not oracle.evaluate(phi, [by_id[a], by_id[b]], RD)
            assert oracle.evaluate(phi, [by_id[a]], RD)
            assert oracle.evaluate(phi, [by_id[b]], RD)

    def test_meta_rebuilds_system(self):
        wl = gen_od_traces(9, count=3)
        meta = json.loads(dump_meta(wl.meta()))
        sys2 = system_from_json(meta["system"])
        for t in wl.traces:
            target = tuple(meta["targets"][t.id])
            assert sys2.run_with(input_word(t), target, t.id).events == t.events

    def test_jsonl_roundtrip(self):
        wl = gen_od_traces(10, count=5)
        first, second, obs = roundtrip(wl.traces)
        assert first == second
        assert obs.closed
        assert [t.events for t in obs.traces] == [t.events for t in wl.traces]


class TestOpacity:
    def test_opaque_runs_have_twins(self):
        wl = gen_opacity_traces(1, input_length=4, count=10)
        for t in wl.traces:
            assert wl.system.same_area(t, "1W")

    def test_non_opaque_has_lonely_run(self):
        wl = gen_opacity_traces(1, input_length=4, count=10, opaque=False)
        assert any(not wl.system.same_area(t, "1W") for t in wl.traces)

    def test_aat_contains_trace_itself(self):
        wl = gen_opacity_traces(2, input_length=3, count=5)
        for t in wl.traces:
            assert any(u.events == t.events for u in wl.system.same_area(t, "AAT"))

    def test_meta_roundtrip_and_unknown_kind(self):
        wl = gen_opacity_traces(3, input_length=3, count=1)
        assert system_from_json(wl.meta()["system"]) == wl.system
        with pytest.raises(Exception):
            system_from_json({"kind": "submarine"})

    def test_jsonl_roundtrip(self):
        first, second, _ = roundtrip(gen_opacity_traces(4, input_length=3, count=4).traces)
        assert first == second


class TestQueue:
    def test_correct_histories_linearizable(self):
        for t in gen_queue_histories(11, nops=3, count=30):
            ops = history(t)
            assert brute_force_linearizable(ops) if len(ops) <= 8 else linearize(ops) is not None

    def test_bug_histories_include_violation(self):
        traces = gen_queue_histories(12, nops=3, count=20, mode="bug")
        assert any(linearize(history(t)) is None for t in traces)

    def test_small_bug_checked_by_brute_force(self):
        traces = gen_queue_histories(13, nops=1, count=30, mode="bug")
        verdicts = [brute_force_linearizable(history(t)) for t in traces]
        assert not all(verdicts)
        for t, v in zip(traces, verdicts):
            assert v == (linearize(history(t)) is not None)

    def test_stamps_are_distinct_ranks(self):
        for t in gen_queue_histories(14, nops=4, count=5):
            stamps = sorted(x for v in t.events for x in (v["inv"], v["res"]))
            assert stamps == list(range(len(stamps)))

    def test_deterministic_and_roundtrip(self):
        a = gen_queue_histories(15, nops=3, count=4)
        b = gen_queue_histories(15, nops=3, count=4)
        assert [t.events for t in a] == [t.events for t in b]
        first, second, _ = roundtrip(a)
        assert first == second

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            gen_queue_histories(0, mode="chaos")

    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    def test_bounded_regex_matches_exceeds(self, k):
        from itertools import product

        from hypermon.formula import parse_trace_formula

        qd = queue_domain()
        tf = parse_trace_formula(bounded_regex(k))
        lang = oracle.eval_trace_formula(tf, {}, qd, 6)
        for n in range(7):
            for w in product(("push", "pop"), repeat=n):
                if not exceeds(list(w), k):
                    assert any(u[: len(w)] == w for u in lang)
                else:
                    assert not any(u[: len(w)] == w for u in lang)

    def test_bounded_formula_parses(self):
        parse(lin_bounded_formula(2), queue_domain(), generators={"lin"})
        with pytest.raises(ValueError):
            bounded_regex(-1)


def test_tables():
    rows = [{"a": 1, "b": "x"}, {"a": 2, "b": "y"}]
    md = markdown_table(rows)
    assert md.splitlines()[0].count("|") == 3 and re.search(r"\|\s*2\s*\|", md)
    assert csv_table(rows).splitlines()[0] == "a,b"
