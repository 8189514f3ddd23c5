"""The nine acceptance criteria, one test each, with their time limits.

Every test carries a ``criterion`` marker; the conftest prints one PASS or
FAIL line per criterion at the end of the session.
"""

import math
import random
import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import test_faults as fault_cases
from helpers import naive_depths, random_fault_model, random_model
from gcaverify import bundled_model
from gcaverify.checker import build_product, check_invariant, check_ltl, cross_validate_theorem1
from gcaverify.expr import CORRECT, ERRONEOUS
from gcaverify.faults import FaultAutomaton, FaultSpec, ltbf_budget
from gcaverify.logic import eval_formula, parse_formula
from gcaverify.modelfile import load_model
from gcaverify.report import check_report, cross_report
from gcaverify.schedules import TimedSchedule, check_da_timed, synthesize_window_schedule
from gcaverify.traces import destutter, project, prune_counterexample, stutter_equiv

criterion = pytest.mark.criterion


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


@criterion(1, "lockstep equivalence on 20 generated models")
def test_criterion_1_generated_models():
    with Timer() as t:
        reports = []
        for seed in range(20):
            g = random_model(seed)
            assert g.system.n in (2, 3) and g.system.k <= 6
            reports.append(cross_validate_theorem1(g.system, g.formula, 2, machine=g.machine))
    assert sum(r.divergences for r in reports) == 0, [d for r in reports for d in r.details]
    assert all(r.compared == r.traces > 0 for r in reports)
    assert t.seconds < 60


@criterion(2, "lockstep equivalence with fault automata on 12 models")
def test_criterion_2_fault_models():
    with Timer() as t:
        reports = []
        for seed in range(12):
            g = random_fault_model(seed, max_k=4)
            reports.append(cross_validate_theorem1(g.system, g.formula, 2, g.automaton, g.machine))
    assert sum(r.divergences for r in reports) == 0, [d for r in reports for d in r.details]
    assert all(r.compared > 0 for r in reports)
    assert t.seconds < 120


@criterion(3, "the five fault effects on three-machine fixtures")
def test_criterion_3_fault_effects():
    with Timer() as t:
        fault_cases.test_wrong_result_writes_psi_of_good_value()
        fault_cases.test_wrong_result_fault_abstraction_forces_erroneous()
        fault_cases.test_fail_silent_only_moves_cursor()
        fault_cases.test_message_loss_skips_one_receiver()
        fault_cases.test_corruption_sends_constant_to_one_receiver()
        fault_cases.test_masquerade_retags_one_message()
    assert t.seconds < 5


def _own(system, config, array, machine=1):
    return config.machines[machine - 1].values[system.array_index[array]][machine - 1]


@criterion(4, "faulty balanced-rod design yields the alternating-fault counterexample")
def test_criterion_4_tmr_faulty():
    with Timer() as t:
        model = load_model(bundled_model("balanced_rod_faulty"))
        prop = model.property("Correct_DigOutput1_Result")
        v = check_ltl(build_product(model.system, model.automaton), prop.formula, prop.machine)
    assert v.status == "violated"
    trace, system = v.counterexample, model.system
    jumps = [i for i, l in enumerate(trace.labels) if l.kind == "jump"]
    assert len(jumps) == 1  # the violation is reached in the second period
    end1, start2, end2 = trace.states[jumps[0]], trace.states[jumps[0] + 1], trace.states[-1]
    # one unit is faulty per period, and the faulty unit changes
    acts1 = model.automaton.labels[trace.fault_states[0].location]
    acts2 = model.automaton.labels[trace.fault_states[-1].location]
    assert acts1 == {"in1"} and acts2 == {"in2"}
    # period 1: everyone votes machine 1 out and machine 2 becomes responsible
    assert _own(system, end1, "Status") == 0b001 and _own(system, end1, "Trigger") == 2
    # the error survives the jump in ErrorSum while the input is clean again
    assert _own(system, start2, "ErrorSum") == ERRONEOUS
    assert _own(system, end2, "MeasureAnd") == CORRECT
    # period 2: machines 1 and 2 agree on the wrong result, machine 3 is voted out
    assert _own(system, end2, "Status") == 0b100
    assert _own(system, end2, "Trigger") == 1
    assert _own(system, end2, "Result") == ERRONEOUS
    assert _own(system, end2, "DigOutput") == ERRONEOUS
    assert t.seconds < 300


@criterion(5, "fixed balanced-rod design holds")
def test_criterion_5_tmr_fixed():
    with Timer() as t:
        model = load_model(bundled_model("balanced_rod_fixed"))
        graph = build_product(model.system, model.automaton)
        verdicts = [check_ltl(graph, p.formula, p.machine) for p in model.properties]
    assert graph.complete and verdicts and all(v.holds for v in verdicts)
    faulty = load_model(bundled_model("balanced_rod_faulty")).automaton
    assert model.automaton.labels == faulty.labels and model.automaton.edges == faulty.edges
    assert t.seconds < 300


@criterion(6, "window schedule passes and early receives are reported")
def test_criterion_6_timed_da():
    with Timer() as t:
        model = load_model(bundled_model("neighbor_window"))
        pattern, n, T = model.system.pattern, model.system.n, model.system.period
        tau = Fraction(model.schedule.tau_net)
        assert check_da_timed(model.schedule, pattern) == []
        sched = synthesize_window_schedule(pattern, tau, T, n)
        assert check_da_timed(sched, pattern) == []
        receives = [b for b, a in enumerate(pattern.actions, 1) if type(a).__name__ == "Receive"]
        for m in range(1, n + 1):
            for b in receives:
                alpha = max(p for p in range(1, b) if type(pattern.actions[p - 1]).__name__ == "Send")
                latest = max(Fraction(sched.times[(i, alpha)][1]) for i in range(1, n + 1))
                s, e = sched.times[(m, b)]
                start = latest + tau - Fraction(1, 3)
                times = dict(sched.times)
                times[(m, b)] = (start, start + Fraction(e) - Fraction(s))
                out = check_da_timed(TimedSchedule(times, tau, T), pattern)
                assert out
                for viol in out:
                    assert (viol.kind, viol.receive, viol.receiver, viol.send) == ("send-receive", b, m, alpha)
                    assert viol.slack == start - (Fraction(sched.times[(viol.sender, alpha)][1]) + tau)
                    assert "+ tau_net <" in str(viol)
    assert t.seconds < 1


def _ltbf_oracle(eta, T):
    eta, T = Fraction(eta), Fraction(T)
    q = eta / T
    cap = -((-T.numerator * eta.denominator) // (eta.numerator * T.denominator))  # ceiling division
    spacing = q.numerator // q.denominator - 1 if q > 3 else None
    return cap, spacing


@criterion(7, "LTBF arithmetic and the spacing gate")
def test_criterion_7_ltbf():
    with Timer() as t:
        rng = random.Random(2024)
        for _ in range(100):
            T = Fraction(rng.randint(1, 40), rng.randint(1, 4))
            eta = Fraction(rng.randint(1, 400), rng.randint(1, 4))
            b = ltbf_budget(eta, T)
            assert (b.per_period, b.spacing) == _ltbf_oracle(eta, T)
        for eta in range(1, 13):
            a = FaultAutomaton(("ok", "bad"), ("ok", "bad"), {"ok": ("ok", "bad"), "bad": ("ok", "bad")},
                               {"ok": frozenset(), "bad": frozenset({"f"})},
                               (FaultSpec("f", "f", "FailSilent", 1, 1),), eta, 1)
            gap = a.budget.spacing or 0
            # (state, clean periods since the last fault); every run of 30 periods is covered
            frontier = {(s, 0 if a.active(s) else gap + 1) for s in a.initial_states()}
            for _ in range(30):
                nxt = set()
                for s, clean in frontier:
                    for x in a.successors(s):
                        if a.active(x):
                            assert clean >= gap
                            nxt.add((x, 0))
                        else:
                            nxt.add((x, min(clean + 1, gap + 1)))
                frontier = nxt
    assert t.seconds < 1


@criterion(8, "stutter algebra and pruning soundness")
def test_criterion_8_stutter_and_pruning():
    with Timer() as t:
        assert "".join(destutter("xxxyyzzz")) == "xyz"
        rng = random.Random(8)
        for _ in range(300):
            a, b, c = ("".join(rng.choice("xyz") for _ in range(rng.randint(0, 8))) for _ in range(3))
            assert destutter(destutter(a)) == destutter(a)
            assert stutter_equiv(a, a)
            assert stutter_equiv(a, b) == stutter_equiv(b, a)
            if stutter_equiv(a, b) and stutter_equiv(b, c):
                assert stutter_equiv(a, c)
        checked = 0
        cases = [(random_model(s).system, random_model(s).formula, random_model(s).machine, None) for s in range(20)]
        for name in ("balanced_rod_faulty", "liveness_failsilent", "single_counter", "neighbor_sum"):
            model = load_model(bundled_model(name))
            cases += [(model.system, p.formula, p.machine, model.automaton) for p in model.properties]
        for system, formula, machine, automaton in cases:
            v = check_ltl(build_product(system, automaton), formula, machine)
            if v.holds:
                continue
            trace = v.counterexample
            pruned = prune_counterexample(trace, machine)
            assert destutter(project(pruned, machine)) == destutter(project(trace, machine))
            checked += 1
    assert checked >= 10
    assert t.seconds < 5


@criterion(9, "shortest counterexamples and byte-identical reports")
def test_criterion_9_determinism():
    with Timer() as t:
        for seed in range(10):
            g = random_model(seed)
            prop = parse_formula(f"m{g.machine}.a != 2")
            v = check_invariant(build_product(g.system), prop, g.machine)
            bad = [d for (c, _), d in naive_depths(g.system).items()
                   if not eval_formula([c], prop, g.system, g.machine)]
            if bad:
                assert len(v.counterexample.states) - 1 == min(bad)
        for name in ("balanced_rod_faulty", "balanced_rod_fixed", "liveness_failsilent", "neighbor_sum"):
            model = load_model(bundled_model(name))
            outputs = set()
            for workers in (1, 4, 1, 3):
                graph = build_product(model.system, model.automaton, workers=workers)
                results = [(p, check_ltl(graph, p.formula, p.machine)) for p in model.properties]
                outputs.add((check_report(model, results, "text"), check_report(model, results, "json")))
            assert len(outputs) == 1
        model = load_model(bundled_model("single_counter"))
        runs = {cross_report(model, [(p.name, cross_validate_theorem1(model.system, p.formula, 2, machine=p.machine))
                                     for p in model.properties], "text") for _ in range(3)}
        assert len(runs) == 1
    assert t.seconds < 30
