from __future__ import annotations

import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypermon.errors import SpecificationError, UpdateError
from hypermon.trace_model import (
    EPS,
    DataDomain,
    Observation,
    Trace,
    Valuation,
    is_prefix,
    project,
    read_jsonl,
    slice_word,
    stutter_prefix,
    stutter_reduce,
    write_jsonl,
)

words = st.lists(st.sampled_from("abcd"), max_size=12).map(tuple)


def low_domain():
    return DataDomain(["inL", "inH", "outL"])


class TestProject:
    def test_single_event(self):
        t = Trace.of("t0", [{"inL": 1, "inH": 1, "outL": 1}])
        assert project(t, "outL", low_domain()) == (1,)

    def test_empty_trace(self):
        assert project(Trace.of("e", []), "inL", low_domain()) == ()

    def test_eps_letters_are_dropped(self):
        dom = DataDomain(["op"], {"inv_only": lambda v: v["op"] if v["op"] == "inv" else EPS})
        t = Trace.of("t", [{"op": "inv"}, {"op": "res"}, {"op": "inv"}])
        assert project(t, "inv_only", dom) == ("inv", "inv")

    def test_unknown_projection(self):
        with pytest.raises(SpecificationError):
            project(Trace.of("t", [{"inL": 0}]), "nope", low_domain())


class TestSlice:
    def test_negative_index(self):
        assert slice_word(("v0", "v1", "v2"), -2, -2) == ("v1",)

    def test_first(self):
        assert slice_word(("v0", "v1"), 0, 0) == ("v0",)

    def test_reversed_bounds_give_empty(self):
        assert slice_word(("v0", "v1"), 1, 0) == ()

    def test_out_of_range(self):
        assert slice_word(("a",), 0, 3) == ()
        assert slice_word((), -1, -1) == ()

    @given(words, st.integers(-8, 8), st.integers(-8, 8))
    def test_total_and_bounded(self, w, i, j):
        out = slice_word(w, i, j)
        assert len(out) <= len(w)
        # the result is always a contiguous factor
        assert out == () or any(w[k : k + len(out)] == out for k in range(len(w)))

    @given(words)
    def test_full_range_is_identity(self, w):
        if w:
            assert slice_word(w, 0, len(w) - 1) == w


class TestStutter:
    def test_examples(self):
        assert stutter_reduce("aaabba") == tuple("aba")
        assert stutter_reduce("") == ()
        assert stutter_reduce("abc") == tuple("abc")

    @given(words)
    def test_idempotent(self, w):
        assert stutter_reduce(stutter_reduce(w)) == stutter_reduce(w)

    def test_stutter_prefix_examples(self):
        assert stutter_prefix("aab", "abb")
        assert not stutter_prefix("ba", "ab")
        assert stutter_prefix("", "xyz")

    @given(words)
    def test_stutter_prefix_reflexive(self, w):
        assert stutter_prefix(w, w)

    @given(words, words, words)
    def test_stutter_prefix_transitive(self, a, b, c):
        if stutter_prefix(a, b) and stutter_prefix(b, c):
            assert stutter_prefix(a, c)

    def test_is_prefix(self):
        assert is_prefix((), ("a",))
        assert not is_prefix(("a", "b"), ("a",))


class TestObservation:
    def test_build_and_terminate(self):
        obs = Observation()
        obs.add_trace("t1")
        obs.append_event("t1", {"x": 1})
        obs.append_event("t1", {"x": 2})
        obs.terminate_trace("t1")
        t = obs["t1"]
        assert len(t) == 2 and t.terminated

    def test_append_after_termination(self):
        obs = Observation([Trace.of("t", [{"x": 1}])])
        with pytest.raises(UpdateError):
            obs.append_event("t", {"x": 2})

    def test_duplicate_id(self):
        obs = Observation()
        obs.add_trace("t")
        with pytest.raises(UpdateError):
            obs.add_trace("t")

    def test_unknown_id(self):
        with pytest.raises(UpdateError):
            Observation().append_event("ghost", {"x": 1})

    def test_closed_rejects_new_traces(self):
        obs = Observation(closed=True)
        with pytest.raises(UpdateError):
            obs.add_trace("t")
        assert obs.close() == obs.revision

    def test_revision_strictly_increases(self):
        obs = Observation()
        revs = [obs.add_trace("a"), obs.append_event("a", {"x": 0}), obs.add_trace("b"), obs.terminate_trace("a")]
        assert revs == sorted(set(revs))

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 3)), max_size=20))
    def test_replay_reconstructs(self, ops):
        obs = Observation()
        for tid, val in ops:
            name = f"t{tid}"
            if name not in obs:
                obs.add_trace(name)
            if val == 3 and not obs[name].terminated:
                obs.terminate_trace(name)
            elif not obs[name].terminated:
                obs.append_event(name, {"x": val})
        assert Observation.replay(obs.deltas_since(0)).same_as(obs)

    def test_deltas_since(self):
        obs = Observation()
        obs.add_trace("a")
        mark = obs.revision
        obs.append_event("a", {"x": 1})
        assert [d.kind for d in obs.deltas_since(mark)] == ["event"]


class TestJsonl:
    def test_round_trip(self):
        traces = [
            Trace.of("a", [{"x": 1, "y": [1, 2]}, {"x": "•", "y": None}]),
            Trace("b", [Valuation({"x": 0})], False),
        ]
        buf = io.StringIO()
        write_jsonl(traces, buf, close=True)
        text = buf.getvalue()
        obs = read_jsonl(text.splitlines())
        assert obs.closed
        assert obs["a"].events == traces[0].events and obs["a"].terminated
        assert not obs["b"].terminated
        again = io.StringIO()
        write_jsonl(obs.traces, again, close=True)
        assert again.getvalue() == text

    def test_blank_lines_ignored(self):
        lines = ["", json.dumps({"trace": "t", "event": {"x": 1}}), "  ", json.dumps({"trace": "t", "end": True})]
        obs = read_jsonl(lines)
        assert obs["t"].terminated and len(obs["t"]) == 1

    def test_valuation_hashable(self):
        assert hash(Valuation({"a": [1, 2]})) == hash(Valuation({"a": [1, 2]}))
