from hypothesis import given
from hypothesis import strategies as st

from gcaverify.core import Assign, GCASystem, Pattern, Receive, Send
from gcaverify.expr import Const, parse_expr
from gcaverify.mechanisms import BoundedInt
from gcaverify.schedules import enumerate_da_traces, run_sync
from gcaverify.traces import (
    Step,
    Trace,
    classify_valid_receives,
    destutter,
    project,
    prune_counterexample,
    stutter_equiv,
)

words = st.lists(st.sampled_from("xyz"), max_size=12)


def test_destutter_paper_example():
    assert "".join(destutter("xxxyyzzz")) == "xyz"


def test_destutter_keeps_non_adjacent_repeats():
    assert "".join(destutter("xyxy")) == "xyxy"
    assert destutter("") == ()


@given(words)
def test_destutter_idempotent(w):
    assert destutter(destutter(w)) == destutter(w)
    d = destutter(w)
    assert all(a != b for a, b in zip(d, d[1:]))


def test_stutter_equiv_examples():
    assert stutter_equiv("xxyz", "xyzz")
    assert not stutter_equiv("xy", "yx")


@given(words, words, words)
def test_stutter_equiv_is_an_equivalence(a, b, c):
    assert stutter_equiv(a, a)
    assert stutter_equiv(a, b) == stutter_equiv(b, a)
    if stutter_equiv(a, b) and stutter_equiv(b, c):
        assert stutter_equiv(a, c)


@given(words, st.lists(st.integers(1, 3), max_size=12))
def test_repeating_letters_preserves_class(w, reps):
    stretched = [x for x, r in zip(w, reps + [1] * len(w)) for _ in range(r)]
    assert stutter_equiv(w, stretched)


def test_valid_receives():
    a = Pattern(("a",), (), (Send("a"), Receive("a")))
    assert classify_valid_receives(a.actions) == {2}
    assert classify_valid_receives((Receive("a"),)) == frozenset()
    twice = (Send("a"), Receive("a"), Receive("a"))
    assert classify_valid_receives(twice) == {2}


def test_second_receive_never_changes_state():
    pattern = Pattern(("a",), (), (Assign("a", parse_expr("a[x] + 1")), Send("a"), Receive("a"), Receive("a")))
    system = GCASystem(pattern, 2, domains={"a": BoundedInt(0, 5)})
    for t in enumerate_da_traces(system, 2).traces:
        for before, label, after in zip(t.states, t.labels, t.states[1:]):
            if label.kind == "action" and label.actions[0][1] == 4:
                m = label.actions[0][0]
                assert before.machines[m - 1].values == after.machines[m - 1].values


def _system():
    pattern = Pattern(("a", "b"), (), (Assign("a", Const(1)), Send("a"), Receive("a"), Assign("b", parse_expr("a[x+1]"))))
    return GCASystem(pattern, 3, domains={"a": BoundedInt(0, 3), "b": BoundedInt(0, 3)})


def test_projection_keeps_length_and_only_one_machine():
    system = _system()
    t = enumerate_da_traces(system, 1, limit=1).traces[0]
    p = project(t, 1)
    assert len(p) == len(t)
    assert p[0] == (t.states[0].machines[0].values, t.states[0].machines[0].next)
    # steps of machines 2 and 3 leave machine 1's projection unchanged
    for (x, y), label in zip(zip(p, p[1:]), t.labels):
        if label.kind == "action" and label.actions[0][0] != 1:
            assert x == y


def test_sync_projection_has_no_repeats():
    system = _system()
    (t,) = run_sync(system, 1)
    p = project(t, 2)
    assert all(a != b for a, b in zip(p[: system.k + 1], p[1 : system.k + 1]))


def test_prune_counts_projection_changes():
    system = _system()
    t = enumerate_da_traces(system, 2, limit=1).traces[0]
    p = project(t, 1)
    changes = sum(1 for a, b in zip(p, p[1:]) if a != b)
    markers = sum(1 for l in t.labels if l.kind == "jump" or l.faults)
    pruned = prune_counterexample(t, 1)
    assert len(pruned.labels) <= changes + markers + 1
    assert destutter(project(pruned, 1)) == destutter(p)


def test_prune_without_stuttering_is_identity():
    system = _system()
    (t,) = run_sync(system, 1)
    assert prune_counterexample(t, 1) == t


def test_prune_keeps_loop_entry():
    states = tuple(_system().initial_config() for _ in range(4))
    labels = tuple(Step("sync", ((1, 1),)) for _ in range(3))
    t = Trace(states, labels, (), loop=2)
    pruned = prune_counterexample(t, 1)
    assert pruned.loop is not None
    assert pruned.states[pruned.loop] == t.states[2]
