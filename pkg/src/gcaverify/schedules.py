"""Synchronous lockstep runs, deterministic-assumption interleavings and timed schedules."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .core import (
    GCASystem,
    Pattern,
    Receive,
    Send,
    SystemConfig,
    apply_jump,
    env_choices,
    period_finished,
)
from .expr import ModelError
from .faults import FaultAutomaton, FaultRun, FaultSpec, FaultState, step_machine
from .traces import Step, Trace, value_key


# --------------------------------------------------------------------------- fault context of one period


@dataclass(frozen=True)
class PeriodFaults:
    """Fault flags raised for one period and the per-period firing cap."""

    faults: tuple[FaultSpec, ...] = ()
    active: frozenset[str] = frozenset()
    cap: int | None = None

    @classmethod
    def of(cls, automaton: FaultAutomaton | None, state: FaultState | None) -> "PeriodFaults":
        if automaton is None or state is None:
            return cls()
        budget = automaton.budget
        return cls(automaton.faults, automaton.active(state), budget.per_period if budget else None)

    def allows(self, fired: int) -> frozenset[str]:
        if self.cap is not None and fired >= self.cap:
            return frozenset()
        return self.active


NO_FAULTS = PeriodFaults()


# --------------------------------------------------------------------------- synchronous steps


def _order_branches(before: SystemConfig, after: SystemConfig):
    """Alternative queue orders for same-tag messages appended in one composite step.

    Returns ``[(config, order_label)]``; a single entry with an empty label when
    no receiver got two different payloads under one tag.
    """
    choices = []  # (receiver, tag, payloads in natural order)
    for r, (old, new) in enumerate(zip(before.machines, after.machines), 1):
        appended = new.queue[len(old.queue):]
        groups: dict[tuple, list] = {}
        for msg in appended:
            groups.setdefault((msg.array, msg.slot), []).append(msg.payload)
        for tag, payloads in sorted(groups.items()):
            distinct = []
            for p in payloads:
                if p not in distinct:
                    distinct.append(p)
            if len(distinct) > 1:
                choices.append((r, tag, distinct))
    if not choices:
        return [(after, ())]
    out = []
    for picks in itertools.product(*(c[2] for c in choices)):
        machines = list(after.machines)
        label = []
        for (r, tag, _), last in zip(choices, picks):
            ms = machines[r - 1]
            old_len = len(before.machines[r - 1].queue)
            appended = list(ms.queue[old_len:])
            moved = [m for m in appended if (m.array, m.slot) == tag and m.payload == last]
            rest = [m for m in appended if not ((m.array, m.slot) == tag and m.payload == last)]
            machines[r - 1] = replace(ms, queue=ms.queue[:old_len] + tuple(rest + moved))
            label.append((r, tag[0], tag[1], last))
        out.append((SystemConfig(tuple(machines), after.tick, after.micro), tuple(label)))
    out.sort(key=lambda item: value_key(item[1]))
    return out


def sync_step(
    config: SystemConfig, system: GCASystem, pf: PeriodFaults = NO_FAULTS, fired: int = 0
) -> list[tuple[SystemConfig, Step, int]]:
    """One composite step: every machine executes its next action, machines 1..n in turn.

    Returns every successor with its label and the updated firing count; there
    is more than one only when a masquerade makes the message order ambiguous.
    """
    cur = config
    names = []
    actions = []
    for m in range(1, system.n + 1):
        pos = cur.machines[m - 1].next
        actions.append((m, pos))
        cur, fault = step_machine(cur, m, system, pf.faults, pf.allows(fired))
        if fault is not None:
            fired += 1
            names.append(fault.name)
    faults = tuple(sorted(names))
    return [
        (succ, Step("sync", tuple(actions), faults, order=order), fired)
        for succ, order in _order_branches(config, cur)
    ]


def jump_successors(config: SystemConfig, system: GCASystem, automaton: FaultAutomaton | None,
                    state: FaultState | None, faulty_period: bool):
    """``(config, fault_state, Step)`` for every environment choice and automaton successor."""
    if automaton is None:
        nexts = [None]
    else:
        nexts = automaton.successors(state, faulty_period)
    out = []
    for choice, succ in ((c, apply_jump(config, system, c)) for c in env_choices(config, system)):
        for nxt in nexts:
            if nxt is None:
                step = Step("jump", env=choice)
            else:
                acts = tuple(sorted(automaton.active(nxt)))
                step = Step("jump", location=nxt.location, acts=acts, env=choice)
            out.append((succ, nxt, step))
    out.sort(key=lambda item: item[2].key())
    return out


# --------------------------------------------------------------------------- explicit runs


def _fault_plan(automaton, fault_run, periods):
    if fault_run is not None:
        if len(fault_run.states) < periods:
            raise ModelError("fault run shorter than the requested number of periods")
        if automaton is None:
            raise ModelError("a fault run needs its automaton")
    return automaton


def _explore(system: GCASystem, periods: int, automaton, fault_run, period_paths, limit=None):
    """Depth-first composition of per-period segments into whole traces."""
    if periods < 1:
        raise ValueError("periods must be at least 1")
    automaton = _fault_plan(automaton, fault_run, periods)
    if automaton is None:
        starts = [None]
    elif fault_run is not None:
        starts = [fault_run.states[0]]
    else:
        starts = automaton.initial_states()
    produced = 0

    def rec(p, config, fstate, states, labels, fstates):
        nonlocal produced
        pf = PeriodFaults.of(automaton, fstate)
        for seg_states, seg_labels, fired in period_paths(config, pf):
            end = seg_states[-1]
            if fault_run is not None:
                want = fault_run.states[p + 1] if p + 1 < len(fault_run.states) else None
            seen_choices = set()
            for succ, nxt, step in jump_successors(end, system, automaton, fstate, fired > 0):
                if fault_run is not None:
                    if want is not None and nxt.location != want.location:
                        continue
                    if want is None:
                        # past the end of a fixed run: one successor per environment choice
                        if step.env in seen_choices:
                            continue
                        seen_choices.add(step.env)
                st = states + seg_states[1:] + (succ,)
                lb = labels + seg_labels + (step,)
                fs = fstates + (fstate,) * (len(seg_states) - 1) + (nxt,)
                if p + 1 == periods:
                    if limit is not None and produced >= limit:
                        raise _CapReached
                    produced += 1
                    yield Trace(st, lb, fs if automaton is not None else ())
                else:
                    yield from rec(p + 1, succ, nxt, st, lb, fs)

    init = system.initial_config()
    for f0 in starts:
        yield from rec(0, init, f0, (init,), (), (f0,))


class _CapReached(Exception):
    pass


def _sync_paths(system: GCASystem):
    def paths(config, pf):
        frontier = [((config,), (), 0)]
        for _ in range(system.k):
            nxt = []
            for states, labels, fired in frontier:
                for succ, step, f in sync_step(states[-1], system, pf, fired):
                    nxt.append((states + (succ,), labels + (step,), f))
            frontier = nxt
        return frontier
    return paths


def run_sync(system: GCASystem, periods: int, fault_run: FaultRun | None = None,
             automaton: FaultAutomaton | None = None) -> list[Trace]:
    """All lockstep traces of ``periods`` periods (k composite steps then a jump, per period).

    Branching comes from environment choices, the fault automaton (unless a
    fixed ``fault_run`` is given) and ambiguous masquerade message orders.
    """
    out = []
    for trace in _explore(system, periods, automaton, fault_run, _sync_paths(system)):
        if trace not in out:
            out.append(trace)
    return out


# --------------------------------------------------------------------------- deterministic assumption


def da_barriers(pattern: Pattern) -> tuple[int, ...]:
    """``barrier[p-1]``: every machine must have completed that many actions before any runs position ``p``.

    For a receive at β of array a, the predecessor send α of a must be done on
    all machines; for the successor send γ, the receive β must be done on all.
    Constraints are applied per array.
    """
    actions = pattern.actions
    barrier = [0] * len(actions)
    for beta, action in enumerate(actions, 1):
        if not isinstance(action, Receive):
            continue
        sends = [p for p, a in enumerate(actions, 1) if isinstance(a, Send) and a.array == action.array]
        before = [p for p in sends if p < beta]
        after = [p for p in sends if p > beta]
        if before:
            barrier[beta - 1] = max(barrier[beta - 1], max(before))
        if after:
            gamma = min(after)
            barrier[gamma - 1] = max(barrier[gamma - 1], beta)
    return tuple(barrier)


def enabled_machines(config: SystemConfig, system: GCASystem, barriers: Sequence[int]) -> list[int]:
    k = system.k
    done = [k if ms.next is None else ms.next - 1 for ms in config.machines]
    floor = min(done)
    return [m for m, ms in enumerate(config.machines, 1) if ms.next is not None and floor >= barriers[ms.next - 1]]


def satisfies_da(interleaving: Sequence[tuple[int, int]], pattern: Pattern, n: int) -> bool:
    """Pairwise check of the ordering constraints, with time replaced by list position."""
    at = {inst: t for t, inst in enumerate(interleaving)}
    actions = pattern.actions
    for beta, action in enumerate(actions, 1):
        if not isinstance(action, Receive):
            continue
        sends = [p for p, a in enumerate(actions, 1) if isinstance(a, Send) and a.array == action.array]
        alpha = max((p for p in sends if p < beta), default=None)
        gamma = min((p for p in sends if p > beta), default=None)
        for j in range(1, n + 1):
            for i in range(1, n + 1):
                if alpha is not None and not at[(i, alpha)] < at[(j, beta)]:
                    return False
                if gamma is not None and not at[(j, beta)] < at[(i, gamma)]:
                    return False
    return True


def da_interleavings(pattern: Pattern, n: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """Every DA-compliant ordering of one period's n*k action instances."""
    barriers = da_barriers(pattern)
    k = pattern.k

    def rec(done, prefix):
        if all(d == k for d in done):
            yield tuple(prefix)
            return
        floor = min(done)
        for m in range(n):
            p = done[m] + 1
            if p <= k and floor >= barriers[p - 1]:
                done[m] += 1
                prefix.append((m + 1, p))
                yield from rec(done, prefix)
                prefix.pop()
                done[m] -= 1

    yield from rec([0] * n, [])


def _async_paths(system: GCASystem):
    barriers = da_barriers(system.pattern)

    def paths(config, pf):
        out = []

        def rec(cur, states, labels, fired):
            ready = enabled_machines(cur, system, barriers)
            if not ready:
                if not period_finished(cur):
                    raise ModelError("deterministic assumption deadlocks this pattern")
                out.append((states, labels, fired))
                return
            for m in ready:
                pos = cur.machines[m - 1].next
                succ, fault = step_machine(cur, m, system, pf.faults, pf.allows(fired))
                step = Step("action", ((m, pos),), (fault.name,) if fault else ())
                rec(succ, states + (succ,), labels + (step,), fired + (fault is not None))

        rec(config, (config,), (), 0)
        return out
    return paths


@dataclass(frozen=True)
class DAEnumeration:
    traces: tuple[Trace, ...]
    complete: bool
    limit: int | None = None

    def __len__(self) -> int:
        return len(self.traces)


def enumerate_da_traces(system: GCASystem, periods: int, limit: int | None = None,
                        fault_run: FaultRun | None = None,
                        automaton: FaultAutomaton | None = None) -> DAEnumeration:
    """Explicit traces for every DA-compliant interleaving of every period.

    Each interleaving is paired with every environment and fault-automaton
    choice.  When ``limit`` traces have been produced and more exist, the
    result is flagged incomplete.
    """
    traces = []
    complete = True
    try:
        for trace in _explore(system, periods, automaton, fault_run, _async_paths(system), limit):
            traces.append(trace)
    except _CapReached:
        complete = False
    return DAEnumeration(tuple(traces), complete, limit)


# --------------------------------------------------------------------------- timed schedules


def _exact(x) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class TimedSchedule:
    """Start and end time of every ``(machine, position)`` instance within one period."""

    times: Mapping[tuple[int, int], tuple[float, float]]
    tau_net: float
    period: float

    @property
    def machines(self) -> tuple[int, ...]:
        return tuple(sorted({m for m, _ in self.times}))

    def check_well_formed(self, k: int) -> None:
        T = _exact(self.period)
        for m in self.machines:
            prev_end = None
            for p in range(1, k + 1):
                if (m, p) not in self.times:
                    raise ModelError(f"schedule has no times for machine {m} action {p}")
                s, e = (_exact(t) for t in self.times[(m, p)])
                if s > e:
                    raise ModelError(f"machine {m} action {p} ends before it starts")
                if s < 0 or e >= T:
                    raise ModelError(f"machine {m} action {p} leaves the period [0, {self.period})")
                if prev_end is not None and s < prev_end:
                    raise ModelError(f"machine {m} action {p} overlaps its predecessor")
                prev_end = e


@dataclass(frozen=True)
class TimedViolation:
    kind: str  # "send-receive" or "receive-send"
    send: int
    receive: int
    sender: int
    receiver: int
    slack: Fraction  # right side minus left side; <= 0 means violated

    def __str__(self) -> str:
        if self.kind == "send-receive":
            rel = (f"send end of action {self.send} on m{self.sender} + tau_net "
                   f"< receive start of action {self.receive} on m{self.receiver}")
        else:
            rel = (f"receive end of action {self.receive} on m{self.receiver} "
                   f"< send start of action {self.send} on m{self.sender}")
        return f"violated: {rel} (slack {float(self.slack):g})"


def check_da_timed(schedule: TimedSchedule, pattern: Pattern) -> list[TimedViolation]:
    """Every failed instance of the two strict timing inequalities."""
    k = pattern.k
    for (m, p) in schedule.times:
        if not 1 <= p <= k:
            raise ModelError(f"schedule refers to unknown action {p} of machine {m}")
    schedule.check_well_formed(k)
    tau = _exact(schedule.tau_net)
    t = {key: (_exact(s), _exact(e)) for key, (s, e) in schedule.times.items()}
    machines = schedule.machines
    actions = pattern.actions
    out = []
    for beta, action in enumerate(actions, 1):
        if not isinstance(action, Receive):
            continue
        sends = [p for p, a in enumerate(actions, 1) if isinstance(a, Send) and a.array == action.array]
        alpha = max((p for p in sends if p < beta), default=None)
        gamma = min((p for p in sends if p > beta), default=None)
        for j in machines:
            r_start, r_end = t[(j, beta)]
            for i in machines:
                if alpha is not None:
                    slack = r_start - (t[(i, alpha)][1] + tau)
                    if slack <= 0:
                        out.append(TimedViolation("send-receive", alpha, beta, i, j, slack))
                if gamma is not None:
                    slack = t[(i, gamma)][0] - r_end
                    if slack <= 0:
                        out.append(TimedViolation("receive-send", gamma, beta, i, j, slack))
    return out


class UnsupportedPattern(ModelError):
    pass


class Infeasible(Exception):
    pass


def synthesize_window_schedule(pattern: Pattern, tau_net, period, n: int,
                               duration=Fraction(1, 2), gap=Fraction(1, 2)) -> TimedSchedule:
    """Lockstep schedule that opens a window of length tau_net between sends and receives.

    Every machine runs action p in the same slot.  A receive starts ``gap``
    after the window following its predecessor send closes; a send starts
    ``gap`` after the preceding receive ends.
    """
    sends = [a.array for a in pattern.actions if isinstance(a, Send)]
    dup = sorted({a for a in sends if sends.count(a) > 1})
    if dup:
        raise UnsupportedPattern(f"duplicate send of {', '.join(dup)}: no fixed window separates them")
    tau, T = _exact(tau_net), _exact(period)
    duration, gap = _exact(duration), _exact(gap)
    if tau >= T:
        raise Infeasible(f"tau_net {tau_net} is not shorter than the period {period}")
    t = Fraction(0)
    last_send_end: dict[str, Fraction] = {}
    last_recv_end: dict[str, Fraction] = {}
    slots = {}
    for p, action in enumerate(pattern.actions, 1):
        start = t
        if isinstance(action, Receive) and action.array in last_send_end:
            start = max(start, last_send_end[action.array] + tau + gap)
        if isinstance(action, Send) and action.array in last_recv_end:
            start = max(start, last_recv_end[action.array] + gap)
        end = start + duration
        slots[p] = (start, end)
        if isinstance(action, Send):
            last_send_end[action.array] = end
        if isinstance(action, Receive):
            last_recv_end[action.array] = end
        t = end + gap
    if slots and max(e for _, e in slots.values()) >= T:
        need = float(max(e for _, e in slots.values()))
        raise Infeasible(f"the window schedule needs {need:g} time units but the period is {period}")
    times = {(m, p): se for m in range(1, n + 1) for p, se in slots.items()}
    return TimedSchedule(times, tau_net, period)


# --------------------------------------------------------------------------- random runs


def simulate(system: GCASystem, periods: int, seed: int, mode: str = "sync",
             automaton: FaultAutomaton | None = None) -> Trace:
    """One run with every branch resolved at random.

    Environment and fault-automaton choices come from one random stream and
    the interleaving (or lockstep message order) from another, so an async
    and a sync run with the same seed see the same choices.
    """
    import random

    if mode not in ("sync", "async"):
        raise ValueError(f"unknown mode {mode!r}")
    if periods < 1:
        raise ValueError("periods must be at least 1")
    choices = random.Random(f"{seed}:choices")
    sched = random.Random(f"{seed}:schedule")
    barriers = da_barriers(system.pattern)
    config = system.initial_config()
    fstate = choices.choice(automaton.initial_states()) if automaton is not None else None
    states, labels, fstates = [config], [], [fstate]
    for _ in range(periods):
        pf = PeriodFaults.of(automaton, fstate)
        fired = 0
        if mode == "sync":
            for _ in range(system.k):
                config, step, fired = sched.choice(sync_step(config, system, pf, fired))
                states.append(config)
                labels.append(step)
                fstates.append(fstate)
        else:
            while True:
                ready = enabled_machines(config, system, barriers)
                if not ready:
                    if not period_finished(config):
                        raise ModelError("deterministic assumption deadlocks this pattern")
                    break
                m = sched.choice(ready)
                pos = config.machines[m - 1].next
                config, fault = step_machine(config, m, system, pf.faults, pf.allows(fired))
                fired += fault is not None
                states.append(config)
                labels.append(Step("action", ((m, pos),), (fault.name,) if fault else ()))
                fstates.append(fstate)
        config, fstate, step = choices.choice(jump_successors(config, system, automaton, fstate, fired > 0))
        states.append(config)
        labels.append(step)
        fstates.append(fstate)
    return Trace(tuple(states), tuple(labels), tuple(fstates) if automaton is not None else ())
