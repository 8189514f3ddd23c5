"""Fault-tolerance mechanisms and value domains.

The functions here are pure.  Models use them through expression builtins
(``tpa_round1(Result[*])`` and friends) produced by the macro expansions in
:func:`expand_macro`, so a mechanism is just a few ordinary actions.

Bitmask convention: bit ``j-1`` of a judgment or status word refers to
machine ``j``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .expr import (
    CORRECT,
    ERR,
    ERRONEOUS,
    BinOp,
    Const,
    EnvRef,
    EvalContext,
    Expr,
    ModelError,
    Neg,
    Ref,
    Slot,
    Task,
    Value,
    _arith,
    to_text,
)


@dataclass(frozen=True)
class FaultAbstraction:
    """Two-valued port domain: 0 = Correct, 1 = Erroneous."""

    def values(self) -> tuple[int, ...]:
        return (CORRECT, ERRONEOUS)

    def contains(self, v: Value) -> bool:
        return v in (CORRECT, ERRONEOUS)

    def __str__(self) -> str:
        return "fault-abstraction"


@dataclass(frozen=True)
class BoundedInt:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ModelError(f"empty interval [{self.lo}, {self.hi}]")

    def values(self) -> range:
        return range(self.lo, self.hi + 1)

    def contains(self, v: Value) -> bool:
        return v is not ERR and self.lo <= v <= self.hi

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


ValueDomain = FaultAbstraction | BoundedInt
UNDEFINED = 0  # responsible machine reported for an undeclared fault configuration


# --------------------------------------------------------------------------- TestPortAbsolute


def test_port_absolute_round1(own_index: int, values: Mapping[int, Value | None]) -> dict[int, bool]:
    """Local judgment of machine ``own_index``: ``True`` marks a sender as faulty.

    ``values`` maps every machine (own included) to the value held locally for
    it; ``None`` stands for a missing message and counts as faulty.
    """
    own = values[own_index]
    return {j: (j != own_index and (v is None or v != own)) for j, v in values.items()}


def test_port_absolute_round2(
    judgments: Mapping[int, Mapping[int, bool] | None], n: int | None = None
) -> tuple[bool, ...]:
    """Majority vote over exchanged judgment arrays.

    A missing array is an all-faulty opinion.  Machine ``m`` is faulty iff a
    strict majority of the n opinions about it say so.
    """
    n = n if n is not None else len(judgments)
    status = []
    for m in range(1, n + 1):
        votes = 0
        for voter in range(1, n + 1):
            opinion = judgments.get(voter)
            votes += 1 if opinion is None else bool(opinion.get(m, True))
        status.append(2 * votes > n)
    return tuple(status)


# --------------------------------------------------------------------------- redundancy trigger


def config_name(status: Sequence[bool]) -> str:
    """``All_correct`` or the correct machines, e.g. ``1_3_correct``."""
    if not any(status):
        return "All_correct"
    return "_".join(str(i + 1) for i, faulty in enumerate(status) if not faulty) + "_correct"


def default_trigger_table(n: int) -> dict[str, int]:
    """All-correct and single-fault configurations map to the lowest correct machine.

    For n = 3 this is the balanced-rod table: All_correct->1, 1_2_correct->1,
    2_3_correct->2, 1_3_correct->1.
    """
    table = {"All_correct": 1}
    for faulty in range(1, n + 1):
        status = [m == faulty for m in range(1, n + 1)]
        table[config_name(status)] = next(m for m in range(1, n + 1) if m != faulty)
    return table


@dataclass(frozen=True)
class TriggerState:
    responsible: int
    table: tuple[tuple[str, int], ...] = field(default=())

    @classmethod
    def initial(cls, n: int = 3, table: Mapping[str, int] | None = None) -> "TriggerState":
        table = dict(table or default_trigger_table(n))
        return cls(table.get("All_correct", 1), tuple(sorted(table.items())))


def redundancy_trigger(state: TriggerState, statuses: Sequence[bool]) -> TriggerState:
    """Select the responsible machine; undeclared configurations give ``UNDEFINED``."""
    table = dict(state.table) if state.table else default_trigger_table(len(statuses))
    responsible = table.get(config_name(statuses), UNDEFINED)
    return TriggerState(responsible, state.table)


# --------------------------------------------------------------------------- fault propagation and unification


def propagate_fault_abstraction(
    task: Task, inputs: Mapping[str, Value], implication: Mapping[str, Iterable[str]] | None = None
) -> dict[str, int]:
    """Abstract effect of an opaque task on {Correct, Erroneous} ports.

    Without an implication graph every output is erroneous as soon as one
    input is.  With one, an output depends only on the inputs it lists.
    """
    bad = {p for p, v in inputs.items() if v is ERR or v == ERRONEOUS}
    out = {}
    for port, spec in task.outputs.items():
        deps = None
        if implication is not None and port in implication:
            deps = tuple(implication[port])
        elif spec.depends is not None:
            deps = spec.depends
        relevant = set(inputs) if deps is None else set(deps)
        out[port] = ERRONEOUS if bad & relevant else CORRECT
    return out


def _order_key(v: Value):
    return (1, 0) if v is ERR else (0, v)


def median_unify(own: Value, received: Sequence[Value]) -> Value:
    """Median of the local value and the received copies (odd count required).

    Under fault abstraction Correct < Erroneous, so the median is the
    majority value.  ``Err`` sorts above every integer.
    """
    values = [own, *received]
    if len(values) % 2 == 0:
        raise ModelError(f"median of an even number of values ({len(values)})")
    return sorted(values, key=_order_key)[len(values) // 2]


# --------------------------------------------------------------------------- interval evaluation


class BoundedAnalysisExceeded(Exception):
    pass


def eval_interval(expr: Expr, domains: Mapping[str, tuple[int, int]], cap: int = 100_000) -> frozenset[Value]:
    """Exact set of values ``expr`` takes when each leaf ranges over its interval.

    ``domains`` maps leaf names, written as in expressions (``u``, ``a[x]``,
    ``a[2]``), to inclusive bounds.  This is enumeration over the finite
    integer box, not widening; beyond ``cap`` combinations it raises.
    """
    leaves = sorted({to_text(node) for node in expr.walk() if isinstance(node, (EnvRef, Slot, Ref))})
    missing = [leaf for leaf in leaves if leaf not in domains]
    if missing:
        raise ModelError(f"no interval for {', '.join(missing)}")
    size = 1
    for leaf in leaves:
        lo, hi = domains[leaf]
        if lo > hi:
            raise ModelError(f"empty interval for {leaf}")
        size *= hi - lo + 1
    if size > cap:
        raise BoundedAnalysisExceeded(f"{size} combinations exceed the cap of {cap}")
    ranges = [range(domains[leaf][0], domains[leaf][1] + 1) for leaf in leaves]
    return frozenset(_eval_bound(expr, dict(zip(leaves, combo))) for combo in itertools.product(*ranges))


def _eval_bound(e: Expr, binding: Mapping[str, int]) -> Value:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, (EnvRef, Slot, Ref)):
        return binding[to_text(e)]
    if isinstance(e, BinOp):
        return _arith(e.op, _eval_bound(e.left, binding), _eval_bound(e.right, binding))
    if isinstance(e, Neg):
        v = _eval_bound(e.operand, binding)
        return ERR if v is ERR else -v
    raise ModelError(f"{to_text(e)} cannot be evaluated over intervals")


def interval_hull(values: Iterable[Value]) -> tuple[int, int] | None:
    ints = [v for v in values if v is not ERR]
    return (min(ints), max(ints)) if ints else None


# --------------------------------------------------------------------------- expression builtins


def _mask(bits: Iterable[bool]) -> int:
    return sum(1 << i for i, b in enumerate(bits) if b)


def _unmask(word: Value, n: int) -> dict[int, bool] | None:
    if word is ERR:
        return None
    return {m: bool(word >> (m - 1) & 1) for m in range(1, n + 1)}


def _b_round1(ctx: EvalContext, row: tuple) -> int:
    judged = test_port_absolute_round1(ctx.machine, {j + 1: v for j, v in enumerate(row)})
    return _mask(judged[m] for m in range(1, len(row) + 1))


def _b_round2(ctx: EvalContext, row: tuple) -> int:
    n = len(row)
    return _mask(test_port_absolute_round2({j + 1: _unmask(w, n) for j, w in enumerate(row)}, n))


def _b_liveness(ctx: EvalContext, row: tuple) -> int:
    # every machine toggles its beat once per period, so a beat that differs
    # from ours is stale: the sender's message did not arrive
    return _b_round1(ctx, row)


def _b_toggle(ctx: EvalContext, v: Value) -> Value:
    return ERR if v is ERR else 1 - v


def _b_trigger(ctx: EvalContext, status: Value, *table: Value) -> Value:
    if status is ERR:
        return UNDEFINED
    if table:
        return table[status] if 0 <= status < len(table) else UNDEFINED
    bits = [bool(status >> i & 1) for i in range(ctx.n)]
    return redundancy_trigger(TriggerState.initial(ctx.n), bits).responsible


def _b_median(ctx: EvalContext, row: tuple) -> Value:
    m = ctx.machine
    return median_unify(row[m - 1], row[:m - 1] + row[m:])


def _b_offer(ctx: EvalContext, responsible: Value, value: Value) -> Value:
    # a machine that is not responsible offers nothing, which cannot be wrong
    return value if responsible == ctx.machine else CORRECT


BUILTINS = {
    "tpa_round1": _b_round1,
    "tpa_round2": _b_round2,
    "liveness": _b_liveness,
    "toggle": _b_toggle,
    "trigger": _b_trigger,
    "median": _b_median,
    "offer": _b_offer,
}


def trigger_table_args(table: Mapping[str, int], n: int) -> tuple[int, ...]:
    """Flatten a configuration table into a status-word lookup vector."""
    out = []
    for word in range(1 << n):
        status = [bool(word >> i & 1) for i in range(n)]
        out.append(table.get(config_name(status), UNDEFINED))
    return tuple(out)


# --------------------------------------------------------------------------- macros


@dataclass(frozen=True)
class MacroExpansion:
    actions: tuple
    arrays: dict  # auxiliary array -> domain


MACROS = ("TestPortAbsolute", "TestLiveness", "RedundancyTrigger", "MedianUnify")


def expand_macro(spec: Mapping, n: int) -> MacroExpansion:
    """Plain actions implementing a mechanism named in a model file.

    ``TestPortAbsolute`` (``port``, ``judge``, ``status``) exchanges the port,
    stores the local judgment word, exchanges judgments and stores the voted
    status word.  ``TestLiveness`` (``beat``, ``alive``) toggles and exchanges
    a heartbeat; a peer whose copy differs from the own beat did not deliver
    this period.  ``RedundancyTrigger`` (``status``, ``trigger``, optional
    ``table``) maps the status word to the responsible machine.
    ``MedianUnify`` (``port``) replaces the port by the median of all copies.
    """
    from .core import Assign, Receive, Send
    from .expr import Call, Ref, Row, parse_expr

    kind = spec.get("macro")
    label = spec.get("label")
    words = BoundedInt(0, (1 << n) - 1)

    def lab(i):
        return f"{label}.{i}" if label else None

    def arg(key, default=None):
        v = spec.get(key, default)
        if v is None:
            raise ModelError(f"macro {kind} needs {key!r}")
        return str(v)

    if kind == "TestPortAbsolute":
        port, judge, status = arg("port"), arg("judge", "Judge"), arg("status", "Status")
        acts = (
            Send(port, lab(1)),
            Receive(port, lab(2)),
            Assign(judge, Call("tpa_round1", (Row(port),)), lab(3)),
            Send(judge, lab(4)),
            Receive(judge, lab(5)),
            Assign(status, Call("tpa_round2", (Row(judge),)), lab(6)),
        )
        return MacroExpansion(acts, {judge: words, status: words})
    if kind == "TestLiveness":
        beat, alive = arg("beat", "Beat"), arg("alive", "Alive")
        acts = (
            Assign(beat, Call("toggle", (Ref(beat, 0),)), lab(1)),
            Send(beat, lab(2)),
            Receive(beat, lab(3)),
            Assign(alive, Call("liveness", (Row(beat),)), lab(4)),
        )
        return MacroExpansion(acts, {beat: BoundedInt(0, 1), alive: words})
    if kind == "RedundancyTrigger":
        status, trigger = arg("status", "Status"), arg("trigger", "Trigger")
        args = [Ref(status, 0)]
        table = spec.get("table")
        if table is not None:
            from .expr import Const

            bad = [k for k, v in table.items() if not 0 <= int(v) <= n]
            if bad:
                raise ModelError(f"trigger table entry {bad[0]} names no machine")
            args += [Const(v) for v in trigger_table_args({k: int(v) for k, v in table.items()}, n)]
        acts = (Assign(trigger, Call("trigger", tuple(args)), lab(1)),)
        return MacroExpansion(acts, {trigger: BoundedInt(0, n)})
    if kind == "MedianUnify":
        if n % 2 == 0:
            raise ModelError(f"MedianUnify needs an odd number of machines, not {n}")
        port = arg("port")
        acts = (
            Send(port, lab(1)),
            Receive(port, lab(2)),
            Assign(port, Call("median", (Row(port),)), lab(3)),
        )
        return MacroExpansion(acts, {})
    raise ModelError(f"unknown mechanism macro {kind!r} (known: {', '.join(MACROS)})")
