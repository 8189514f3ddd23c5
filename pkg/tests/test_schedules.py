import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import all_interleavings, random_model
from gcaverify.core import Assign, GCASystem, Pattern, Receive, Send, exec_action
from gcaverify.expr import BinOp, Const, EnvRef, Ref, parse_expr
from gcaverify.mechanisms import BoundedInt
from gcaverify.schedules import (
    Infeasible,
    TimedSchedule,
    UnsupportedPattern,
    check_da_timed,
    da_interleavings,
    enumerate_da_traces,
    run_sync,
    satisfies_da,
    simulate,
    synthesize_window_schedule,
)
from gcaverify.traces import destutter, project


def ring_system(n=3, env=False):
    pattern = Pattern(("a", "b"), ("u",) if env else (), (
        Assign("a", BinOp("+", Ref("a", 0), EnvRef("u") if env else Const(1))),
        Send("a"),
        Receive("a"),
        Assign("b", BinOp("+", Ref("a", 1), Ref("a", 2 if n >= 3 else 1))),
    ))
    update = {"u": (Const(0), Const(1))} if env else {}
    return GCASystem(pattern, n, domains={"a": BoundedInt(0, 9), "b": BoundedInt(0, 20)}, env_update=update)


SIMPLE = Pattern(("a", "b"), (), (Assign("a", Const(1)), Send("a"), Receive("a"), Assign("b", Ref("a", 1))))


def test_run_sync_shape():
    system = ring_system()
    (trace,) = run_sync(system, 1)
    assert len(trace.labels) == system.k + 1
    assert [l.kind for l in trace.labels] == ["sync"] * system.k + ["jump"]
    assert trace.labels[0].actions == ((1, 1), (2, 1), (3, 1))


def test_run_sync_end_state_equals_every_da_run():
    system = ring_system()
    (sync,) = run_sync(system, 1)
    runs = enumerate_da_traces(system, 1)
    assert runs.complete and len(runs) > 1
    for t in runs.traces:
        for m in (1, 2, 3):
            assert t.states[-1].machines[m - 1].values == sync.states[-1].machines[m - 1].values


def test_run_sync_n1_is_the_sequential_run():
    pattern = Pattern(("a",), (), (Assign("a", parse_expr("a[x] + 1")), Send("a"), Receive("a")))
    system = GCASystem(pattern, 1, domains={"a": BoundedInt(0, 9)})
    (trace,) = run_sync(system, 2)
    c = system.initial_config()
    seq = [c]
    for _ in range(system.k):
        c = exec_action(c, 1, system)
        seq.append(c)
    assert trace.states[: system.k + 1] == tuple(seq)


def test_run_sync_branches_on_environment():
    system = ring_system(n=2, env=True)
    assert len(run_sync(system, 1)) == 4
    assert len(run_sync(system, 2)) == 16


def test_da_interleavings_match_bruteforce_filter():
    for n, pattern in ((2, SIMPLE), (2, Pattern(("a",), (), (Send("a"), Receive("a"), Send("a"), Receive("a"))))):
        brute = {i for i in all_interleavings(n, pattern.k) if satisfies_da(i, pattern, n)}
        fast = set(da_interleavings(pattern, n))
        assert fast == brute
        for i in fast:
            sends = [t for t, (m, p) in enumerate(i) if p == 2]
            recvs = [t for t, (m, p) in enumerate(i) if p == 3]
            if pattern is SIMPLE:
                assert max(sends) < min(recvs)


def test_da_vacuous_without_messages():
    pattern = Pattern(("a",), (), (Assign("a", Const(1)), Assign("a", Const(0))))
    assert len(list(da_interleavings(pattern, 2))) == 6


def test_receive_before_send_excluded():
    # machine 2 receives before machine 1 has sent
    bad = ((1, 1), (2, 1), (2, 2), (2, 3), (1, 2), (1, 3), (1, 4), (2, 4))
    assert not satisfies_da(bad, SIMPLE, 2)
    assert bad not in set(da_interleavings(SIMPLE, 2))


def test_da_interleavings_with_three_machines_against_filter():
    pattern = Pattern(("a",), (), (Send("a"), Receive("a")))
    brute = {i for i in all_interleavings(3, 2) if satisfies_da(i, pattern, 3)}
    assert set(da_interleavings(pattern, 3)) == brute
    assert len(brute) == 36  # 3! orders of sends times 3! orders of receives


def test_enumerate_reports_truncation():
    system = ring_system()
    runs = enumerate_da_traces(system, 1, limit=5)
    assert len(runs) == 5 and not runs.complete


def test_enumerated_traces_satisfy_da():
    system = ring_system(n=2)
    for t in enumerate_da_traces(system, 1).traces:
        order = tuple(l.actions[0] for l in t.labels if l.kind == "action")
        assert satisfies_da(order, system.pattern, 2)


def test_interleavings_stutter_equivalent_to_lockstep():
    for seed in range(6):
        g = random_model(seed, max_k=4, max_n=2)
        system = g.system
        syncs = run_sync(system, 2)
        by_choice = {tuple(str(l) for l in t.labels if l.kind == "jump"): t for t in syncs}
        for t in enumerate_da_traces(system, 2, limit=20_000).traces:
            twin = by_choice[tuple(str(l) for l in t.labels if l.kind == "jump")]
            for m in range(1, system.n + 1):
                assert destutter(project(t, m)) == destutter(project(twin, m))


# ---------------------------------------------------------------- timed schedules


def window(tau=2, T=10):
    times = {}
    for m in (1, 2, 3):
        times[(m, 1)] = (0, 1)
        times[(m, 2)] = (2, 3)
        times[(m, 3)] = (6, 7)
        times[(m, 4)] = (8, 9)
    return TimedSchedule(times, tau, T)


def test_window_schedule_satisfied():
    assert check_da_timed(window(), SIMPLE) == []


def test_receive_exactly_at_bound_is_violation():
    s = window()
    times = dict(s.times)
    times[(2, 3)] = (5, 7)  # send end 3 + tau 2 = 5, strict inequality fails
    (v,) = [v for v in check_da_timed(TimedSchedule(times, 2, 10), SIMPLE) if v.receiver == 2][:1]
    assert v.kind == "send-receive" and v.slack == 0
    assert len(check_da_timed(TimedSchedule(times, 2, 10), SIMPLE)) == 3


def test_successor_send_violation():
    pattern = Pattern(("a",), (), (Send("a"), Receive("a"), Send("a")))
    times = {(m, 1): (0, 1) for m in (1, 2)}
    times.update({(m, 2): (4, 5) for m in (1, 2)})
    times[(1, 3)] = (5, 6)  # starts exactly when the receives end
    times[(2, 3)] = (6, 7)
    out = check_da_timed(TimedSchedule(times, 1, 10), pattern)
    assert {(v.kind, v.send, v.receive, v.sender) for v in out} == {("receive-send", 3, 2, 1)}


def _direct(schedule, pattern):
    """Independent evaluation of both inequalities over all machine pairs."""
    bad = set()
    acts = pattern.actions
    ms = sorted({m for m, _ in schedule.times})
    for b, act in enumerate(acts, 1):
        if not isinstance(act, Receive):
            continue
        before = [p for p in range(1, b) if isinstance(acts[p - 1], Send) and acts[p - 1].array == act.array]
        after = [p for p in range(b + 1, len(acts) + 1) if isinstance(acts[p - 1], Send) and acts[p - 1].array == act.array]
        for i, j in itertools.product(ms, ms):
            if before and not Fraction(schedule.times[(i, before[-1])][1]) + Fraction(schedule.tau_net) < Fraction(schedule.times[(j, b)][0]):
                bad.add(("send-receive", before[-1], b, i, j))
            if after and not Fraction(schedule.times[(j, b)][1]) < Fraction(schedule.times[(i, after[0])][0]):
                bad.add(("receive-send", after[0], b, i, j))
    return bad


def test_random_schedules_against_direct_evaluation():
    rng = random.Random(7)
    pattern = Pattern(("a",), (), (Send("a"), Receive("a"), Assign("a", Const(0)), Send("a"), Receive("a")))
    for _ in range(200):
        times = {}
        for m in (1, 2, 3):
            t = Fraction(0)
            for p in range(1, pattern.k + 1):
                s = t + Fraction(rng.randint(0, 4), 2)
                e = s + Fraction(rng.randint(0, 2), 2)
                times[(m, p)] = (s, e)
                t = e
        sched = TimedSchedule(times, Fraction(rng.randint(0, 3), 2), 100)
        got = {(v.kind, v.send, v.receive, v.sender, v.receiver) for v in check_da_timed(sched, pattern)}
        assert got == _direct(sched, pattern)


def test_synthesized_window_schedule_passes():
    sched = synthesize_window_schedule(SIMPLE, 1, 10, 3)
    assert check_da_timed(sched, SIMPLE) == []
    assert sched.times[(2, 3)] == (3, Fraction(7, 2))


def test_synthesis_infeasible_and_unsupported():
    with pytest.raises(Infeasible):
        synthesize_window_schedule(SIMPLE, 10, 10, 3)
    dup = Pattern(("b",), (), (Send("b"), Receive("b"), Send("b")))
    with pytest.raises(UnsupportedPattern):
        synthesize_window_schedule(dup, 1, 10, 2)


def test_schedule_with_unknown_action_rejected():
    from gcaverify.expr import ModelError

    times = dict(window().times)
    times[(1, 9)] = (9, 9.5)
    with pytest.raises(ModelError):
        check_da_timed(TimedSchedule(times, 2, 10), SIMPLE)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.sampled_from([Fraction(1, 2), 1, 2]))
def test_moving_any_receive_earlier_is_reported(shift_machine, tau):
    pattern = Pattern(("a", "c"), (), (Send("a"), Receive("a"), Assign("c", Const(1)), Send("c"), Receive("c")))
    sched = synthesize_window_schedule(pattern, tau, 40, 3)
    assert check_da_timed(sched, pattern) == []
    for beta in (2, 5):
        m = shift_machine % 3 + 1
        alpha = beta - 1
        latest = max(sched.times[(i, alpha)][1] for i in (1, 2, 3))
        s, e = sched.times[(m, beta)]
        new_start = latest + Fraction(tau) - Fraction(1, 4)
        times = dict(sched.times)
        times[(m, beta)] = (new_start, new_start + (e - s))
        out = check_da_timed(TimedSchedule(times, tau, 40), pattern)
        assert out and all(v.kind == "send-receive" and v.receive == beta and v.receiver == m for v in out)
        assert all(v.slack == new_start - (sched.times[(v.sender, alpha)][1] + Fraction(tau)) for v in out)


# ---------------------------------------------------------------- simulation


def test_simulate_is_reproducible_and_modes_agree():
    system = ring_system(n=3, env=True)
    a1 = simulate(system, 3, seed=11, mode="async")
    a2 = simulate(system, 3, seed=11, mode="async")
    s = simulate(system, 3, seed=11, mode="sync")
    assert a1 == a2
    for m in (1, 2, 3):
        assert destutter(project(a1, m)) == destutter(project(s, m))
    order = [l.actions[0] for l in a1.labels if l.kind == "action"][: 3 * system.k]
    assert satisfies_da(tuple(order), system.pattern, 3)
