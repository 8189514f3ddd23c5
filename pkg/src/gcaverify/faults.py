"""Fault 8-tuples, their effects, and the tick-level fault automaton."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .core import (
    Assign,
    GCASystem,
    MachineState,
    Message,
    Receive,
    Send,
    SystemConfig,
    _set_value,
    advance,
    current_action,
    exec_action,
    replace_machines,
)
from .expr import ERRONEOUS, Const, Expr, Hole, ModelError, Value
from .mechanisms import FaultAbstraction

FAULT_TYPES = ("WrongResult", "FailSilent", "MessageLoss", "Corruption", "Masquerade")


@dataclass(frozen=True)
class FaultSpec:
    """One fault ``(act, type, sigma, i, j, k, k', psi)``.

    ``position`` is j, the action's index in the pattern; ``machine`` is i.
    ``psi`` is an expression over ``$`` (the value the fault replaces); when
    omitted it forces Erroneous under fault abstraction and, for Corruption,
    delivers the constant ``k2``.
    """

    name: str
    act: str
    type: str
    position: int
    machine: int
    k: int | None = None
    k2: int | None = None
    psi: Expr | None = None

    def validate(self, system: GCASystem) -> None:
        if self.type not in FAULT_TYPES:
            raise ModelError(f"fault {self.name}: unknown type {self.type}")
        if not 1 <= self.machine <= system.n:
            raise ModelError(f"fault {self.name}: machine {self.machine} outside 1..{system.n}")
        if not 1 <= self.position <= system.k:
            raise ModelError(f"fault {self.name}: position {self.position} outside 1..{system.k}")
        action = system.pattern.actions[self.position - 1]
        if self.type == "WrongResult" and not isinstance(action, Assign):
            raise ModelError(f"fault {self.name}: WrongResult must attach to an assignment, not {action}")
        if self.type in ("MessageLoss", "Corruption", "Masquerade") and not isinstance(action, Send):
            raise ModelError(f"fault {self.name}: {self.type} must attach to a send, not {action}")
        if self.type in ("MessageLoss", "Corruption"):
            if self.k is None or not 1 <= self.k <= system.n or self.k == self.machine:
                raise ModelError(f"fault {self.name}: {self.type} needs a target k != {self.machine}")
        if self.type == "Corruption" and self.psi is None and self.k2 is None \
                and not isinstance(system.domain(action.array), FaultAbstraction):
            raise ModelError(f"fault {self.name}: Corruption needs psi or k2")
        if self.type == "Masquerade":
            if self.k2 is None or not 1 <= self.k2 <= system.n or self.k2 == self.machine:
                raise ModelError(f"fault {self.name}: Masquerade needs a receiver k' != {self.machine}")
            if self.k is None or not 1 <= self.k <= system.n or self.k == self.k2:
                raise ModelError(f"fault {self.name}: Masquerade needs an impersonated k other than k'")


def _error_value(fault: FaultSpec, system: GCASystem, array: str, config: SystemConfig, value: Value) -> Value:
    if fault.psi is not None:
        return system.eval_into(array, fault.psi, config, fault.machine, hole=value)
    if isinstance(system.domain(array), FaultAbstraction):
        return ERRONEOUS
    if fault.type == "Corruption":
        return fault.k2
    raise ModelError(f"fault {fault.name} needs an error function for {array}")


def apply_fault(config: SystemConfig, fault: FaultSpec, system: GCASystem) -> SystemConfig:
    """Execute ``fault.machine``'s next action with the fault's effect instead of the normal one."""
    i = fault.machine
    action = current_action(config, i, system)
    ms = config.machines[i - 1]
    if ms.next != fault.position:
        raise ModelError(f"fault {fault.name} attached to position {fault.position}, machine is at {ms.next}")
    nxt = advance(ms.next, system.k)

    if fault.type == "FailSilent":
        # no value or queue changes; the cursor still advances
        return replace_machines(config, {i: replace(ms, next=nxt)})

    ai = system.array_index[action.array]
    if fault.type == "WrongResult":
        good = system.eval_into(action.array, action.expr, config, i)
        bad = _error_value(fault, system, action.array, config, good)
        return replace_machines(config, {i: replace(ms, values=_set_value(ms, ai, i, bad), next=nxt)})

    value = ms.values[ai][i - 1]
    updates = {i: replace(ms, next=nxt)}
    for s in range(1, system.n + 1):
        if s == i:
            continue
        msg = Message(action.array, i, value)
        if fault.type == "MessageLoss" and s == fault.k:
            continue
        if fault.type == "Corruption" and s == fault.k:
            msg = Message(action.array, i, _error_value(fault, system, action.array, config, value))
        if fault.type == "Masquerade" and s == fault.k2:
            msg = Message(action.array, fault.k, value)
        other = config.machines[s - 1]
        updates[s] = replace(other, queue=other.queue + (msg,))
    return replace_machines(config, updates)


def firing_fault(faults: Sequence[FaultSpec], active: frozenset[str], machine: int, position: int):
    """First declared fault that fires on this action instance, if any."""
    for f in faults:
        if f.machine == machine and f.position == position and f.act in active:
            return f
    return None


def step_machine(
    config: SystemConfig,
    machine: int,
    system: GCASystem,
    faults: Sequence[FaultSpec] = (),
    active: frozenset[str] = frozenset(),
) -> tuple[SystemConfig, FaultSpec | None]:
    """One atomic action with the fault hook: a firing fault replaces the normal effect."""
    if active:
        pos = config.machines[machine - 1].next
        fault = firing_fault(faults, active, machine, pos)
        if fault is not None:
            return apply_fault(config, fault, system), fault
    return exec_action(config, machine, system), None


# --------------------------------------------------------------------------- LTBF


def _exact(x) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class LtbfBudget:
    per_period: int
    spacing: int | None  # clean periods forced after a faulty one; None when eta <= 3T


def ltbf_budget(eta, period) -> LtbfBudget:
    """Fault bound per period, ceil(T/eta), and when eta > 3T the spacing floor(eta/T) - 1."""
    eta, period = _exact(eta), _exact(period)
    if eta <= 0 or period <= 0:
        raise ValueError("LTBF and period must be positive")
    cap = math.ceil(period / eta)
    spacing = math.floor(eta / period) - 1 if eta > 3 * period else None
    return LtbfBudget(cap, spacing)


# --------------------------------------------------------------------------- automaton


@dataclass(frozen=True)
class FaultState:
    location: str
    cooldown: int = 0
    fired: int = 0

    def __str__(self) -> str:
        extra = f" cooldown={self.cooldown}" if self.cooldown else ""
        return f"{self.location}{extra}"


@dataclass(frozen=True)
class FaultAutomaton:
    """Locations stepped once per period; ``labels`` gives the act flags raised in each.

    Clocks and invariants of the timed original are replaced by per-period
    ticks, with the LTBF (``ltbf``, in the same time unit as ``period``)
    enforced by a per-period cap and a clean-period spacing gate.
    """

    locations: tuple[str, ...]
    initial: tuple[str, ...]
    edges: Mapping[str, tuple[str, ...]]
    labels: Mapping[str, frozenset[str]]
    faults: tuple[FaultSpec, ...] = ()
    ltbf: float | None = None
    period: float = 1.0

    def __post_init__(self):
        known = set(self.locations)
        if not self.initial:
            raise ModelError("fault automaton needs an initial location")
        for loc in self.initial:
            if loc not in known:
                raise ModelError(f"unknown initial location {loc}")
        for src, dsts in self.edges.items():
            for loc in (src, *dsts):
                if loc not in known:
                    raise ModelError(f"edge mentions unknown location {loc}")
        for loc in self.locations:
            if loc not in self.labels:
                raise ModelError(f"location {loc} has no label set")
        acts = {f.act for f in self.faults}
        for loc, label in self.labels.items():
            unknown = set(label) - acts
            if unknown:
                raise ModelError(f"location {loc} raises undeclared act {', '.join(sorted(unknown))}")

    @classmethod
    def fault_free(cls) -> "FaultAutomaton":
        return cls(("ok",), ("ok",), {"ok": ("ok",)}, {"ok": frozenset()})

    @property
    def budget(self) -> LtbfBudget | None:
        return None if self.ltbf is None else ltbf_budget(self.ltbf, self.period)

    def initial_states(self) -> list[FaultState]:
        return [FaultState(loc) for loc in self.initial]

    def active(self, state: FaultState) -> frozenset[str]:
        if state.cooldown:
            return frozenset()
        budget = self.budget
        if budget is not None and state.fired >= budget.per_period:
            return frozenset()
        return self.labels[state.location]

    def successors(self, state: FaultState, faulty_period: bool | None = None) -> list[FaultState]:
        """Gated successors; ``faulty_period`` defaults to "the location raised any flag"."""
        if faulty_period is None:
            faulty_period = bool(self.labels[state.location]) and not state.cooldown
        budget = self.budget
        spacing = budget.spacing if budget is not None and budget.spacing else 0
        cooldown = spacing if faulty_period else max(0, state.cooldown - 1)
        return [FaultState(loc, cooldown) for loc in self.edges.get(state.location, ())]

    def validate(self, system: GCASystem) -> None:
        for f in self.faults:
            f.validate(system)


def step_fault_automaton(automaton: FaultAutomaton, location: str) -> set[str]:
    return set(automaton.edges.get(location, ()))


# --------------------------------------------------------------------------- actuating fault sequences


@dataclass(frozen=True)
class FaultRun:
    """Per-period fault states plus the actuating sequence they produced.

    ``zeta`` holds ``(instances, time)`` pairs where ``instances`` is the set of
    ``(machine, position)`` action instances a fault perturbed at that time.
    """

    states: tuple[FaultState, ...]
    zeta: tuple[tuple[frozenset, float], ...] = ()

    @property
    def locations(self) -> tuple[str, ...]:
        return tuple(s.location for s in self.states)


def per_period(zeta: Iterable[tuple[frozenset, float]], period: float) -> dict[int, list[frozenset]]:
    buckets: dict[int, list[frozenset]] = {}
    for instances, t in sorted(zeta, key=lambda item: item[1]):
        buckets.setdefault(math.floor(_exact(t) / _exact(period)), []).append(frozenset(instances))
    return buckets


def effect_indistinguishable(z1, z2, period: float) -> bool:
    """Per-period untimed actuating subsequences coincide."""
    z1 = z1.zeta if isinstance(z1, FaultRun) else z1
    z2 = z2.zeta if isinstance(z2, FaultRun) else z2
    return per_period(z1, period) == per_period(z2, period)


def tick_abstraction(run: FaultRun, system: GCASystem) -> tuple[tuple[frozenset, float], ...]:
    """Actuating sequence of the synchronous model: step j of period p fires at p*T + (j-1)*T/k."""
    out = []
    T = system.period
    by_period: dict[int, dict[int, set]] = {}
    for instances, t in run.zeta:
        p = math.floor(_exact(t) / _exact(T))
        for m, pos in instances:
            by_period.setdefault(p, {}).setdefault(pos, set()).add((m, pos))
    for p in sorted(by_period):
        for pos in sorted(by_period[p]):
            out.append((frozenset(by_period[p][pos]), p * T + (pos - 1) * T / max(system.k, 1)))
    return tuple(out)
