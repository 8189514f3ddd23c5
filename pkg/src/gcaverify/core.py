"""GCA system syntax and small-step semantics.

A pattern is the action sequence every machine runs once per period, written
in terms of the machine coefficient ``x``.  :func:`instantiate` turns it into
one concrete sequence per machine, :func:`exec_action` executes one atomic
action of one machine, and :func:`global_jump` is the periodic jump that
refreshes environment inputs and rewinds every cursor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Mapping, Sequence, Union

from .expr import (
    ERR,
    EnvRef,
    EvalContext,
    Expr,
    ModelError,
    Ref,
    Row,
    Slot,
    Task,
    Value,
    arrays_used,
    env_used,
    evaluate,
    evaluate_fa,
    resolve,
    to_text,
)
from .mechanisms import BoundedInt, FaultAbstraction, ValueDomain


class MalformedPattern(ModelError):
    pass


class PeriodViolation(Exception):
    """An action was requested from a finished machine, or a jump came too early."""


# --------------------------------------------------------------------------- actions


@dataclass(frozen=True)
class Assign:
    array: str
    expr: Expr
    label: str | None = None
    machine: int | None = None

    def __str__(self) -> str:
        target = f"{self.array}[x]" if self.machine is None else f"{self.array}[{self.machine}]"
        return f"{target} <- {to_text(self.expr)}"


@dataclass(frozen=True)
class Send:
    array: str
    label: str | None = None
    machine: int | None = None

    def __str__(self) -> str:
        slot = "x" if self.machine is None else self.machine
        return f"send({self.array}[{slot}])"


@dataclass(frozen=True)
class Receive:
    array: str
    label: str | None = None
    machine: int | None = None

    def slots(self, n: int) -> tuple[int, ...]:
        """Slots ``x+1 .. x+n`` (mod n) for an instantiated receive."""
        x = self.machine or 1
        return tuple((x - 1 + i) % n + 1 for i in range(1, n + 1))

    def __str__(self) -> str:
        return f"receive({self.array})"


Action = Union[Assign, Send, Receive]


@dataclass(frozen=True)
class Pattern:
    arrays: tuple[str, ...]
    env_vars: tuple[str, ...] = ()
    actions: tuple[Action, ...] = ()

    def __post_init__(self):
        declared = set(self.arrays)
        for pos, action in enumerate(self.actions, 1):
            if action.array not in declared:
                raise MalformedPattern(f"action {pos} ({action}) uses undeclared array {action.array}")

    @property
    def k(self) -> int:
        return len(self.actions)

    def position(self, label: str) -> int:
        for pos, action in enumerate(self.actions, 1):
            if action.label == label:
                return pos
        raise ModelError(f"no action labelled {label!r}")


def instantiate(pattern: Pattern, n: int) -> list[tuple[Action, ...]]:
    """Concrete action sequences for machines 1..n (``x`` := i, ``+`` mod n)."""
    if n < 1:
        raise MalformedPattern("redundancy must be at least 1")
    sequences = []
    for i in range(1, n + 1):
        seq = []
        for action in pattern.actions:
            if isinstance(action, Assign):
                seq.append(replace(action, expr=resolve(action.expr, i, n), machine=i))
            else:
                seq.append(replace(action, machine=i))
        sequences.append(tuple(seq))
    return sequences


# --------------------------------------------------------------------------- configurations


@dataclass(frozen=True)
class Message:
    array: str
    slot: int
    payload: Value

    def __str__(self) -> str:
        return f"({self.array}[{self.slot}], {self.payload!r})"


@dataclass(frozen=True)
class MachineState:
    values: tuple[tuple[Value, ...], ...]  # per array in system order, n slots each
    queue: tuple[Message, ...]
    next: int | None  # 1-based position of the next action, None when finished
    env: tuple[Value, ...] = ()  # per env var in system order


@dataclass(frozen=True)
class SystemConfig:
    machines: tuple[MachineState, ...]
    tick: int = 0
    micro: int = 0

    def canonical(self) -> "SystemConfig":
        if self.tick == 0 and self.micro == 0:
            return self
        return SystemConfig(self.machines)


@dataclass(frozen=True)
class GCASystem:
    pattern: Pattern
    n: int
    period: float = 1.0
    domains: Mapping[str, ValueDomain] = field(default_factory=dict)
    init: Mapping[str, Value | tuple[Value, ...]] = field(default_factory=dict)
    env_init: Mapping[str, Value] = field(default_factory=dict)
    env_update: Mapping[str, tuple[Expr, ...]] = field(default_factory=dict)
    tasks: Mapping[str, Task] = field(default_factory=dict)
    flush_queues_at_jump: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise MalformedPattern("redundancy must be at least 1")
        for name in self.env_update:
            if name not in self.pattern.env_vars:
                raise ModelError(f"env update for undeclared variable {name}")
        self._check_references()
        self.sequences  # resolves every index eagerly

    def _check_references(self):
        arrays = set(self.pattern.arrays)
        env = set(self.pattern.env_vars)
        exprs = [(str(a), a.expr) for a in self.pattern.actions if isinstance(a, Assign)]
        exprs += [(f"env update of {k}", e) for k, alts in self.env_update.items() for e in alts]
        for where, e in exprs:
            unknown = arrays_used(e) - arrays
            if unknown:
                raise ModelError(f"{where}: unknown array {', '.join(sorted(unknown))}")
            unknown = env_used(e) - env
            if unknown:
                raise ModelError(f"{where}: unknown identifier {', '.join(sorted(unknown))}")

    @cached_property
    def array_names(self) -> tuple[str, ...]:
        return tuple(sorted(self.pattern.arrays))

    @cached_property
    def array_index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.array_names)}

    @cached_property
    def env_names(self) -> tuple[str, ...]:
        return tuple(sorted(self.pattern.env_vars))

    @cached_property
    def sequences(self) -> list[tuple[Action, ...]]:
        return instantiate(self.pattern, self.n)

    @cached_property
    def fa_arrays(self) -> frozenset[str]:
        return frozenset(a for a in self.pattern.arrays if isinstance(self.domain(a), FaultAbstraction))

    @cached_property
    def received_arrays(self) -> frozenset[str]:
        return frozenset(a.array for a in self.pattern.actions if isinstance(a, Receive))

    @property
    def k(self) -> int:
        return self.pattern.k

    def domain(self, array: str) -> ValueDomain:
        return self.domains.get(array, FaultAbstraction())

    def initial_config(self) -> SystemConfig:
        values = []
        for a in self.array_names:
            v = self.init.get(a, 0)
            row = tuple(v) if isinstance(v, (tuple, list)) else (v,) * self.n
            if len(row) != self.n:
                raise ModelError(f"initial value of {a} needs {self.n} entries")
            values.append(row)
        env = tuple(self.env_init.get(e, 0) for e in self.env_names)
        start = 1 if self.k else None
        machine = MachineState(tuple(values), (), start, env)
        return SystemConfig((machine,) * self.n)

    def context(self, config: SystemConfig, machine: int, hole: Value = 0) -> EvalContext:
        ms = config.machines[machine - 1]
        index = self.array_index

        def read(array: str, slot: int) -> Value:
            return ms.values[index[array]][slot - 1]

        def row(array: str) -> tuple[Value, ...]:
            return ms.values[index[array]]

        env = dict(zip(self.env_names, ms.env))
        return EvalContext(machine, self.n, read, row, env, self.tasks, self.fa_arrays, hole)

    def eval_into(self, array: str, expr: Expr, config: SystemConfig, machine: int, hole: Value = 0) -> Value:
        """Evaluate ``expr`` for a write to ``array`` on ``machine``, in that port's domain."""
        ctx = self.context(config, machine, hole)
        dom = self.domain(array)
        if isinstance(dom, FaultAbstraction):
            return evaluate_fa(expr, ctx)
        v = evaluate(expr, ctx)
        return v if dom.contains(v) else ERR


# --------------------------------------------------------------------------- semantics


def _set_value(ms: MachineState, ai: int, slot: int, v: Value) -> tuple[tuple[Value, ...], ...]:
    row = ms.values[ai]
    if row[slot - 1] == v:
        return ms.values
    new_row = row[:slot - 1] + (v,) + row[slot:]
    return ms.values[:ai] + (new_row,) + ms.values[ai + 1:]


def advance(cursor: int, k: int) -> int | None:
    return cursor + 1 if cursor < k else None


def current_action(config: SystemConfig, machine: int, system: GCASystem) -> Action:
    cursor = config.machines[machine - 1].next
    if cursor is None:
        raise PeriodViolation(f"machine {machine} has finished its sequence for this period")
    return system.sequences[machine - 1][cursor - 1]


def replace_machines(config: SystemConfig, updates: Mapping[int, MachineState], micro: int = 1) -> SystemConfig:
    machines = tuple(updates.get(i + 1, ms) for i, ms in enumerate(config.machines))
    return SystemConfig(machines, config.tick, config.micro + micro)


def exec_action(config: SystemConfig, machine: int, system: GCASystem) -> SystemConfig:
    """Execute the next action of ``machine``; the successor is unique."""
    action = current_action(config, machine, system)
    ms = config.machines[machine - 1]
    nxt = advance(ms.next, system.k)
    ai = system.array_index[action.array]

    if isinstance(action, Assign):
        v = system.eval_into(action.array, action.expr, config, machine)
        return replace_machines(config, {machine: replace(ms, values=_set_value(ms, ai, machine, v), next=nxt)})

    if isinstance(action, Send):
        msg = Message(action.array, machine, ms.values[ai][machine - 1])
        updates = {machine: replace(ms, next=nxt)}
        for k in range(1, system.n + 1):
            if k != machine:
                other = config.machines[k - 1]
                updates[k] = replace(other, queue=other.queue + (msg,))
        return replace_machines(config, updates)

    values, queue = receive_into(ms, action.array, machine, system)
    return replace_machines(config, {machine: MachineState(values, queue, nxt, ms.env)})


def receive_into(ms: MachineState, array: str, machine: int, system: GCASystem):
    """Consume every message of ``array`` from other slots; the last one wins."""
    ai = system.array_index[array]
    values = ms.values
    last: dict[int, Value] = {}
    kept = []
    for msg in ms.queue:
        if msg.array == array and msg.slot != machine:
            last[msg.slot] = msg.payload
        else:
            kept.append(msg)
    if not last:
        return values, ms.queue
    row = list(values[ai])
    for slot, payload in last.items():
        row[slot - 1] = payload
    values = values[:ai] + (tuple(row),) + values[ai + 1:]
    return values, tuple(kept)


def env_choices(config: SystemConfig, system: GCASystem) -> list[tuple[tuple[Value, ...], ...]]:
    """Every combination of environment updates, one tuple of env values per machine."""
    per_machine = []
    for m in range(1, system.n + 1):
        ms = config.machines[m - 1]
        current = dict(zip(system.env_names, ms.env))
        options = []
        for name in system.env_names:
            alts = system.env_update.get(name)
            if not alts:
                options.append((current[name],))
                continue
            vals = []
            for e in alts:
                v = evaluate(e, system.context(config, m))
                if v not in vals:
                    vals.append(v)
            options.append(tuple(vals))
        per_machine.append(list(itertools.product(*options)))
    return list(itertools.product(*per_machine))


def apply_jump(config: SystemConfig, system: GCASystem, choice) -> SystemConfig:
    if any(ms.next is not None for ms in config.machines):
        raise PeriodViolation("global jump while some machine has not finished its period")
    start = 1 if system.k else None
    machines = []
    for ms, env in zip(config.machines, choice):
        queue = () if system.flush_queues_at_jump else ms.queue
        machines.append(MachineState(ms.values, queue, start, tuple(env)))
    return SystemConfig(tuple(machines), config.tick + 1, 0)


def global_jump_choices(config: SystemConfig, system: GCASystem) -> list[tuple[tuple, SystemConfig]]:
    if any(ms.next is not None for ms in config.machines):
        raise PeriodViolation("global jump while some machine has not finished its period")
    return [(choice, apply_jump(config, system, choice)) for choice in env_choices(config, system)]


def global_jump(config: SystemConfig, system: GCASystem) -> list[SystemConfig]:
    """Successors of the periodic jump, one per environment choice."""
    out = []
    for _, succ in global_jump_choices(config, system):
        if succ not in out:
            out.append(succ)
    return out


def period_finished(config: SystemConfig) -> bool:
    return all(ms.next is None for ms in config.machines)


def iter_actions(system: GCASystem) -> Iterator[tuple[int, int, Action]]:
    for m, seq in enumerate(system.sequences, 1):
        for pos, action in enumerate(seq, 1):
            yield m, pos, action


def normalize(config: SystemConfig, system: GCASystem) -> SystemConfig:
    """Canonical representative used for state hashing.

    Receive matches messages by (array, sender slot) and keeps the last one,
    so only the relative order of messages sharing that tag is observable.
    Queues are stably sorted by tag, and messages of arrays that no action
    ever receives are dropped.  Tick and micro counters are cleared.
    """
    live = system.received_arrays
    machines = []
    changed = config.tick != 0 or config.micro != 0
    for ms in config.machines:
        queue = tuple(sorted((m for m in ms.queue if m.array in live), key=lambda m: (m.array, m.slot)))
        if queue != ms.queue:
            ms = replace(ms, queue=queue)
            changed = True
        machines.append(ms)
    return SystemConfig(tuple(machines)) if changed else config
