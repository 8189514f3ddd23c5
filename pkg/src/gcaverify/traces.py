"""Execution traces and the trace algebra used to compare them.

A trace is a list of configurations with one :class:`Step` label between each
pair of neighbours.  Projection keeps one machine's variables and cursor,
destuttering collapses runs of equal elements, and two words are stutter
equivalent when their destuttered forms coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

from .core import Action, MachineState, Receive, Send, SystemConfig
from .expr import ERR, Value


def value_key(v) -> tuple:
    """Total order on values and nested tuples of values, ``Err`` above every int."""
    if v is ERR:
        return (2, 0)
    if isinstance(v, tuple):
        return (3, tuple(value_key(x) for x in v))
    if v is None:
        return (0, 0)
    if isinstance(v, str):
        return (4, v)
    return (1, v)


@dataclass(frozen=True)
class Step:
    """Label of one transition.

    ``kind`` is ``"action"`` (one machine), ``"sync"`` (a composite lockstep
    step) or ``"jump"``.  ``actions`` lists the ``(machine, position)``
    instances executed, ``faults`` the names of faults that replaced their
    effect.  Jumps carry the next fault location and the environment choice.
    """

    kind: str
    actions: tuple[tuple[int, int], ...] = ()
    faults: tuple[str, ...] = ()
    location: str | None = None
    acts: tuple[str, ...] = ()
    env: tuple = ()
    order: tuple = ()  # message-order branch taken in this step, if any

    def key(self) -> tuple:
        if self.kind == "jump":
            return (1, self.acts, self.location or "", value_key(self.env))
        return (0, self.actions, self.faults, value_key(self.order))

    def __str__(self) -> str:
        if self.kind == "jump":
            text = "jump"
            if self.location is not None:
                text += f" -> {self.location} [{','.join(self.acts) or '-'}]"
            if any(per for per in self.env):
                text += f" env={_fmt_env(self.env)}"
            return text
        parts = [f"m{m}.s{p}" for m, p in self.actions]
        text = " ".join(parts)
        if self.faults:
            text += " !" + ",".join(self.faults)
        if self.order:
            text += " order=" + ",".join(f"m{r}:{a}[{s}]<-{v!r}" for r, a, s, v in self.order)
        return text


def _fmt_env(env) -> str:
    return "|".join(",".join(repr(v) for v in per) for per in env)


@dataclass(frozen=True)
class Trace:
    """Configurations ``states[0..m]`` and labels ``labels[0..m-1]``.

    ``fault_states`` (optional, aligned with ``states``) records the fault
    automaton state.  ``loop`` marks a lasso: the successor of the last state
    is ``states[loop]``.
    """

    states: tuple[SystemConfig, ...]
    labels: tuple[Step, ...] = ()
    fault_states: tuple = ()
    loop: int | None = None

    def __post_init__(self):
        if len(self.labels) != max(len(self.states) - 1, 0):
            raise ValueError("a trace needs exactly one label between consecutive states")
        if self.fault_states and len(self.fault_states) != len(self.states):
            raise ValueError("fault states must align with states")

    def __len__(self) -> int:
        return len(self.states)


ProjectedState = tuple  # (values, next)


def project_state(ms: MachineState) -> ProjectedState:
    return (ms.values, ms.next)


def project(trace: Trace | Sequence[SystemConfig], machine: int) -> tuple[ProjectedState, ...]:
    """Erase everything except machine ``machine``'s values and cursor; length is preserved."""
    states = trace.states if isinstance(trace, Trace) else trace
    return tuple(project_state(c.machines[machine - 1]) for c in states)


def destutter(word: Iterable[Hashable]) -> tuple:
    out = []
    for x in word:
        if not out or out[-1] != x:
            out.append(x)
    return tuple(out)


def stutter_equiv(a: Iterable, b: Iterable) -> bool:
    return destutter(a) == destutter(b)


def classify_valid_receives(seq: Sequence[Action]) -> frozenset[int]:
    """1-based positions of receives that can change state.

    A receive of array ``a`` is valid when some earlier action sends ``a`` and
    the latest such send comes after the latest earlier receive of ``a``
    (position 0 stands for "none").  Any other receive finds no fresh message
    under the deterministic assumption and acts as a no-op.
    """
    last_send: dict[str, int] = {}
    last_recv: dict[str, int] = {}
    valid = set()
    for pos, action in enumerate(seq, 1):
        if isinstance(action, Send):
            last_send[action.array] = pos
        elif isinstance(action, Receive):
            a = action.array
            if a in last_send and last_send[a] >= last_recv.get(a, 0):
                valid.add(pos)
            last_recv[a] = pos
    return frozenset(valid)


def prune_counterexample(trace: Trace, machine: int, cursor: bool = True) -> Trace:
    """Keep the steps that change ``machine``'s projection, plus jumps and fault firings.

    The first state, the last state and a lasso's loop entry are always kept.
    Each kept state is labelled with the step that produced it.  In lockstep
    traces the cursor moves on every step, so reports pass ``cursor=False``
    to prune against the variables alone.
    """
    proj = project(trace, machine)
    if not cursor:
        proj = tuple(values for values, _ in proj)
    keep = [0]
    for t, label in enumerate(trace.labels, 1):
        if proj[t] != proj[t - 1] or label.kind == "jump" or label.faults or t == len(proj) - 1 \
                or t == trace.loop:
            keep.append(t)
    states = tuple(trace.states[t] for t in keep)
    labels = tuple(trace.labels[t - 1] for t in keep[1:])
    faults = tuple(trace.fault_states[t] for t in keep) if trace.fault_states else ()
    loop = keep.index(trace.loop) if trace.loop is not None else None
    return Trace(states, labels, faults, loop)
