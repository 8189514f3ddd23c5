"""Explicit-state checking of the lockstep system composed with its fault automaton.

The state graph has one node per (configuration, fault state, step index).
Exploration is breadth first with successors in label order, so the first
time a node is discovered fixes its lexicographically least shortest path.
"""

from __future__ import annotations

import itertools
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .core import GCASystem, SystemConfig, apply_jump, env_choices, normalize
from .expr import ModelError
from .faults import FaultAutomaton, FaultRun, FaultState, effect_indistinguishable, step_machine
from .logic import (
    TEMPORAL,
    Atom,
    Formula,
    Globally,
    Eventually,
    Next,
    TruthFold,
    Until,
    check_admissible,
    closure,
    eval_atom,
    local_value,
    step_truth,
    to_text,
    view_of_config,
    view_of_projection,
)
from .schedules import PeriodFaults, da_barriers, enabled_machines, jump_successors, sync_step
from .traces import Step, Trace, project_state, value_key


# --------------------------------------------------------------------------- state graph


@dataclass(frozen=True)
class Node:
    config: SystemConfig
    fault: FaultState | None
    step: int  # composite steps done in this period; k means "jump next"


@dataclass
class StateGraph:
    system: GCASystem
    automaton: FaultAutomaton | None
    nodes: list[Node] = field(default_factory=list)
    index: dict[Node, int] = field(default_factory=dict)
    edges: list[list[tuple[Step, int]]] = field(default_factory=list)
    initial: list[int] = field(default_factory=list)
    parent: list[tuple[int, Step] | None] = field(default_factory=list)
    depth: list[int] = field(default_factory=list)
    complete: bool = True

    def __len__(self) -> int:
        return len(self.nodes)

    def path_to(self, target: int) -> list[int]:
        path = [target]
        while self.parent[path[-1]] is not None:
            path.append(self.parent[path[-1]][0])
        return path[::-1]

    def trace(self, ids: Sequence[int], loop: int | None = None) -> Trace:
        """Trace along node ids, labelling each hop with its least edge label."""
        labels = []
        for a, b in zip(ids, ids[1:]):
            labels.append(min((s for s, t in self.edges[a] if t == b), key=Step.key))
        states = tuple(self.nodes[i].config for i in ids)
        faults = tuple(self.nodes[i].fault for i in ids) if self.automaton is not None else ()
        return Trace(states, tuple(labels), faults, loop)


def successors(node: Node, system: GCASystem, automaton: FaultAutomaton | None) -> list[tuple[Step, Node]]:
    out = []
    if node.step < system.k:
        fired = node.fault.fired if node.fault is not None else 0
        pf = PeriodFaults.of(automaton, node.fault)
        for succ, step, f in sync_step(node.config, system, pf, fired):
            fs = replace(node.fault, fired=f) if node.fault is not None else None
            out.append((step, Node(normalize(succ, system), fs, node.step + 1)))
    else:
        faulty = node.fault is not None and node.fault.fired > 0
        for succ, nxt, step in jump_successors(node.config, system, automaton, node.fault, faulty):
            out.append((step, Node(normalize(succ, system), nxt, 0)))
    out.sort(key=lambda item: item[0].key())
    return out


def build_product(system: GCASystem, automaton: FaultAutomaton | None = None, bound: int | None = None,
                  workers: int = 1) -> StateGraph:
    """Breadth-first state graph; with ``bound`` nodes reached it stops and is marked incomplete.

    ``workers > 1`` expands each BFS level on a thread pool; results are merged
    in level order, so the graph is identical for any worker count.
    """
    if automaton is not None:
        automaton.validate(system)
    g = StateGraph(system, automaton)
    init = normalize(system.initial_config(), system)
    # initial locations keep their declaration order; it ranks equally short counterexamples
    starts = automaton.initial_states() if automaton is not None else [None]

    def add(node: Node, parent, depth) -> int:
        i = g.index.get(node)
        if i is None:
            i = len(g.nodes)
            g.index[node] = i
            g.nodes.append(node)
            g.edges.append([])
            g.parent.append(parent)
            g.depth.append(depth)
        return i

    level = []
    for s in starts:
        i = add(Node(init, s, 0), None, 0)
        if i not in g.initial:
            g.initial.append(i)
            level.append(i)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        depth = 0
        while level:
            nodes = [g.nodes[i] for i in level]
            if pool is not None:
                expanded = list(pool.map(lambda n: successors(n, system, automaton), nodes))
            else:
                expanded = [successors(n, system, automaton) for n in nodes]
            nxt = []
            for i, succs in zip(level, expanded):
                for step, node in succs:
                    known = node in g.index
                    if not known and bound is not None and len(g.nodes) >= bound:
                        g.complete = False
                        continue
                    j = add(node, (i, step), depth + 1)
                    g.edges[i].append((step, j))
                    if not known:
                        nxt.append(j)
            level = nxt
            depth += 1
    finally:
        if pool is not None:
            pool.shutdown()
    return g


# --------------------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class Verdict:
    """``status`` is ``"holds"``, ``"violated"`` or ``"bounded"`` (no violation in an incomplete graph)."""

    status: str
    counterexample: Trace | None = None
    machine: int = 1
    nodes: int = 0
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def _propositional(f: Formula) -> bool:
    return not any(isinstance(g, TEMPORAL) for g in f.walk())


def check_invariant(graph: StateGraph, prop: Formula, machine: int = 1) -> Verdict:
    """Holds iff ``prop`` is true in every reachable node; otherwise a shortest violating path."""
    if not _propositional(prop):
        raise ModelError(f"{to_text(prop)} is not propositional")
    system = graph.system
    cl = closure(prop)
    order = sorted(range(len(graph.nodes)), key=lambda i: graph.depth[i])
    for i in order:
        lookup = view_of_config(graph.nodes[i].config, system, machine)
        truth = {}
        for g in cl:
            truth[g] = local_value(g, truth, lambda a: eval_atom(a, lookup))
        if not truth[prop]:
            return Verdict("violated", graph.trace(graph.path_to(i)), machine, len(graph))
    return Verdict("holds" if graph.complete else "bounded", None, machine, len(graph))


def check_ltl(graph: StateGraph, formula: Formula, machine: int = 1) -> Verdict:
    """Holds iff every infinite path from an initial node satisfies ``formula``.

    ``G p`` with propositional ``p`` goes through :func:`check_invariant`.
    Otherwise the graph is multiplied with the truth assignments of the
    temporal subformulas; a fair cycle in that product, reachable from an
    initial state that falsifies the formula, is a counterexample lasso.
    """
    if isinstance(formula, Globally) and _propositional(formula.operand):
        return check_invariant(graph, formula.operand, machine)
    return _Tableau(graph, formula, machine).run()


class _Tableau:
    def __init__(self, graph: StateGraph, formula: Formula, machine: int):
        self.graph = graph
        self.formula = formula
        self.machine = machine
        self.closure = closure(formula)
        self.temporal = [g for g in self.closure if isinstance(g, TEMPORAL)]
        self.tindex = {g: i for i, g in enumerate(self.temporal)}
        self.assignments = list(itertools.product((False, True), repeat=len(self.temporal)))
        self._truth: dict[tuple[int, tuple], dict] = {}
        self.fair = []
        for g in self.temporal:
            if isinstance(g, Eventually):
                self.fair.append(lambda t, g=g: (not t[g]) or t[g.operand])
            elif isinstance(g, Until):
                self.fair.append(lambda t, g=g: (not t[g]) or t[g.right])
            elif isinstance(g, Globally):
                self.fair.append(lambda t, g=g: t[g] or not t[g.operand])

    def truth(self, node: int, bits: tuple) -> dict:
        key = (node, bits)
        t = self._truth.get(key)
        if t is None:
            lookup = view_of_config(self.graph.nodes[node].config, self.graph.system, self.machine)
            t = {}
            for g in self.closure:
                if isinstance(g, TEMPORAL):
                    t[g] = bits[self.tindex[g]]
                else:
                    t[g] = local_value(g, t, lambda a: eval_atom(a, lookup))
            self._truth[key] = t
        return t

    def succ(self, state):
        node, bits = state
        here = self.truth(node, bits)
        out = []
        for step, target in self.graph.edges[node]:
            for b2 in self.assignments:
                there = self.truth(target, b2)
                if all(here[g] == step_truth(g, here, there) for g in self.temporal):
                    out.append((target, b2))
        return out

    def run(self) -> Verdict:
        graph = self.graph
        starts = [(i, b) for i in graph.initial for b in self.assignments if not self.truth(i, b)[self.formula]]
        # breadth-first discovery fixes the order used for reproducible counterexamples
        order = {}
        parent = {}
        queue = deque()
        for s in starts:
            if s not in order:
                order[s] = len(order)
                parent[s] = None
                queue.append(s)
        succ_cache = {}
        while queue:
            s = queue.popleft()
            succ_cache[s] = self.succ(s)
            for t in succ_cache[s]:
                if t not in order:
                    order[t] = len(order)
                    parent[t] = s
                    queue.append(t)
        sccs = _tarjan(list(order), succ_cache)
        best = None
        for comp in sccs:
            members = set(comp)
            if len(comp) == 1 and comp[0] not in succ_cache[comp[0]]:
                continue
            truths = {s: self.truth(*s) for s in comp}
            if not all(any(f(truths[s]) for s in comp) for f in self.fair):
                continue
            entry = min(comp, key=order.__getitem__)
            if best is None or order[entry] < order[best[0]]:
                best = (entry, members)
        if best is None:
            return Verdict("holds" if graph.complete else "bounded", None, self.machine, len(graph))
        entry, members = best
        stem = [entry]
        while parent[stem[-1]] is not None:
            stem.append(parent[stem[-1]])
        stem.reverse()
        cycle = self._cycle(entry, members, succ_cache)
        ids = [s[0] for s in stem] + [s[0] for s in cycle[1:-1]]
        loop = len(stem) - 1
        return Verdict("violated", graph.trace(ids, loop), self.machine, len(graph))

    def _cycle(self, entry, members, succ_cache):
        """Path entry -> (one state per fairness set) -> entry inside the component."""
        targets = []
        for f in self.fair:
            targets.append(lambda s, f=f: f(self.truth(*s)))
        path = [entry]
        for want in targets:
            if want(path[-1]):
                continue
            path += _bfs(path[-1], want, members, succ_cache)[1:]
        back = _bfs(path[-1], lambda s: s == entry, members, succ_cache, allow_start=False)
        return path + back[1:]


def _bfs(start, want, members, succ_cache, allow_start=True):
    if allow_start and want(start):
        return [start]
    prev = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in succ_cache[s]:
            if t not in members:
                continue
            if want(t):
                path = [t, s]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return path[::-1]
            if t not in prev:
                prev[t] = s
                queue.append(t)
    raise AssertionError("target not reachable inside a strongly connected component")


def _tarjan(states, succ):
    index = {}
    low = {}
    on_stack = set()
    stack = []
    out = []
    counter = 0
    for root in states:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def check_property(system: GCASystem, automaton: FaultAutomaton | None, formula: Formula,
                   machine: int = 1, bound: int | None = None, graph: StateGraph | None = None) -> Verdict:
    graph = graph or build_product(system, automaton, bound)
    return check_ltl(graph, formula, machine)


# --------------------------------------------------------------------------- interleaving harness


@dataclass
class CrossReport:
    """Outcome of comparing every DA interleaving against its lockstep twin.

    Counts are whole multi-period traces.  ``skipped`` counts async traces
    whose fault effects differ from the twin's (not effect-indistinguishable),
    which the equivalence result does not cover.
    """

    machine: int
    periods: int
    interleavings_per_period: int
    choice_paths: int = 0
    traces: int = 0
    compared: int = 0
    skipped: int = 0
    stutter_divergences: int = 0
    verdict_divergences: int = 0
    sync_verdicts: dict = field(default_factory=dict)
    details: list[str] = field(default_factory=list)
    respects_da: bool = True

    @property
    def divergences(self) -> int:
        return self.stutter_divergences + self.verdict_divergences

    @property
    def ok(self) -> bool:
        return self.divergences == 0


class EnumerationCap(Exception):
    pass


def count_interleavings(system: GCASystem, respect_da: bool = True) -> int:
    n, k = system.n, system.k
    barriers = da_barriers(system.pattern) if respect_da else (0,) * k
    memo = {}

    def rec(done):
        if all(d == k for d in done):
            return 1
        got = memo.get(done)
        if got is None:
            floor = min(done)
            got = 0
            for m in range(n):
                p = done[m] + 1
                if p <= k and floor >= barriers[p - 1]:
                    got += rec(done[:m] + (done[m] + 1,) + done[m + 1:])
            memo[done] = got
        return got

    return rec((0,) * n)


class _Harness:
    def __init__(self, system, formula, machine, periods, automaton, respect_da):
        self.system = system
        self.formula = formula
        self.machine = machine
        self.periods = periods
        self.automaton = automaton
        self.barriers = da_barriers(system.pattern) if respect_da else (0,) * system.k
        self.fold = TruthFold(formula) if formula is not None else None
        self._async_seg = {}
        self._sync_seg = {}
        self._av = {}
        self._sv = {}

    # ---- one period, forward: destuttered per-machine segments

    def async_segments(self, config, pf):
        """``{(segments, end, fired): count}`` over all admitted interleavings of one period."""
        key = (config, pf)
        if key in self._async_seg:
            return self._async_seg[key]
        system = self.system
        memo = {}

        def rec(c, fired):
            mk = (c, fired)
            if mk in memo:
                return memo[mk]
            ready = enabled_machines(c, system, self.barriers)
            out: dict = {}
            if not ready:
                out[((),) * system.n, c, fired] = 1
            for m in ready:
                pos = c.machines[m - 1].next
                succ, fault = step_machine(c, m, system, pf.faults, pf.allows(len(fired)))
                f2 = fired | {(m, pos)} if fault is not None else fired
                proj = project_state(succ.machines[m - 1])
                for (segs, end, fs), cnt in rec(normalize(succ, system), f2).items():
                    segs2 = segs[:m - 1] + ((proj,) + segs[m - 1],) + segs[m:]
                    k2 = (segs2, end, fs)
                    out[k2] = out.get(k2, 0) + cnt
            memo[mk] = out
            return out

        result = rec(config, frozenset())
        self._async_seg[key] = result
        return result

    def sync_segments(self, config, pf):
        key = (config, pf)
        if key in self._sync_seg:
            return self._sync_seg[key]
        system = self.system
        frontier = [(config, ((),) * system.n, frozenset())]
        for _ in range(system.k):
            nxt = []
            for c, segs, fired in frontier:
                actions = [(m, c.machines[m - 1].next) for m in range(1, system.n + 1)]
                for succ, step, f in sync_step(c, system, pf, len(fired)):
                    fs = fired
                    if step.faults:
                        fs = fired | self._sync_fired(c, pf, len(fired))
                    segs2 = tuple(segs[m] + (project_state(succ.machines[m]),) for m in range(system.n))
                    nxt.append((normalize(succ, system), segs2, fs))
            frontier = nxt
        result = {(segs, end, fired) for end, segs, fired in frontier}
        self._sync_seg[key] = result
        return result

    def _sync_fired(self, c, pf, already):
        from .faults import firing_fault

        out = set()
        fired = already
        for m in range(1, self.system.n + 1):
            pos = c.machines[m - 1].next
            f = firing_fault(pf.faults, pf.allows(fired), m, pos)
            if f is not None:
                out.add((m, pos))
                fired += 1
        return frozenset(out)

    # ---- choice paths

    def jumps(self, ends, fstate, faulty):
        """Sorted distinct (choice, next fault state) pairs available after a period."""
        out = []
        for end in ends:
            for succ, nxt, step in jump_successors(end, self.system, self.automaton, fstate, faulty):
                item = (step.env, nxt)
                if item not in out:
                    out.append(item)
        return out

    # ---- backward truth vectors for a fixed choice path

    def async_vectors(self, p, config, fstate, path):
        """``{vector: count}`` at the start of period ``p`` over all admitted interleavings.

        ``path[p]`` is ``(required fired set, env choice, next fault state)``.
        Interleavings whose fault effects differ from the required set are dropped.
        """
        key = (p, config, fstate, path[p:])
        if key in self._av:
            return self._av[key]
        system = self.system
        lookup_of = lambda c: view_of_projection(project_state(c.machines[self.machine - 1]), self.machine, system)
        if p == self.periods:
            result = {self.fold.last(lookup_of(config)): 1}
            self._av[key] = result
            return result
        required, choice, nxt = path[p]
        pf = PeriodFaults.of(self.automaton, fstate)
        memo = {}

        def rec(c, fired):
            mk = (c, fired)
            if mk in memo:
                return memo[mk]
            here = lookup_of(c)
            ready = enabled_machines(c, system, self.barriers)
            out: dict = {}
            if not ready:
                if fired == required:
                    succ = normalize(apply_jump(c, system, choice), system)
                    for v, cnt in self.async_vectors(p + 1, succ, nxt, path).items():
                        w = self.fold.vector(here, v)
                        out[w] = out.get(w, 0) + cnt
            for m in ready:
                pos = c.machines[m - 1].next
                succ, fault = step_machine(c, m, system, pf.faults, pf.allows(len(fired)))
                f2 = fired | {(m, pos)} if fault is not None else fired
                for v, cnt in rec(normalize(succ, system), f2).items():
                    w = self.fold.vector(here, v)
                    out[w] = out.get(w, 0) + cnt
            memo[mk] = out
            return out

        result = rec(config, frozenset())
        self._av[key] = result
        return result

    def sync_vectors(self, p, config, fstate, path):
        key = (p, config, fstate, path[p:])
        if key in self._sv:
            return self._sv[key]
        system = self.system
        lookup_of = lambda c: view_of_projection(project_state(c.machines[self.machine - 1]), self.machine, system)
        if p == self.periods:
            result = {self.fold.last(lookup_of(config))}
            self._sv[key] = result
            return result
        required, choice, nxt = path[p]
        pf = PeriodFaults.of(self.automaton, fstate)

        def rec(c, step, fired, fset):
            here = lookup_of(c)
            out = set()
            if step == system.k:
                if fset == required:
                    succ = normalize(apply_jump(c, system, choice), system)
                    out = {self.fold.vector(here, v) for v in self.sync_vectors(p + 1, succ, nxt, path)}
                return out
            extra = self._sync_fired(c, pf, fired)
            for succ, st, f in sync_step(c, system, pf, fired):
                fs2 = fset | extra if st.faults else fset
                for v in rec(normalize(succ, system), step + 1, f, fs2):
                    out.add(self.fold.vector(here, v))
            return out

        result = rec(config, 0, 0, frozenset())
        self._sv[key] = result
        return result


def cross_validate_theorem1(
    system: GCASystem,
    formula: Formula | None,
    periods: int,
    automaton: FaultAutomaton | None = None,
    machine: int | None = None,
    cap: int | None = None,
    respect_da: bool = True,
) -> CrossReport:
    """Compare every admitted asynchronous interleaving with the lockstep run.

    For each sequence of environment choices and fault-automaton states (the
    choice path, held fixed on both sides) and each machine, the destuttered
    projection of every interleaving must equal the lockstep twin's, and the
    formula's verdict on machine ``machine``'s raw projection must agree.
    With ``respect_da=False`` every interleaving is admitted, which is how a
    deployment that breaks the deterministic assumption is demonstrated.
    """
    if formula is not None and machine is None:
        machine = check_admissible(formula, system)
    machine = machine or 1
    if automaton is not None:
        automaton.validate(system)
    per_period = count_interleavings(system, respect_da)
    report = CrossReport(machine, periods, per_period, respects_da=respect_da)
    if cap is not None and per_period ** periods > cap:
        raise EnumerationCap(f"{per_period ** periods} interleaved traces per choice path exceed the cap of {cap}")
    h = _Harness(system, formula, machine, periods, automaton, respect_da)
    init = normalize(system.initial_config(), system)
    starts = automaton.initial_states() if automaton is not None else [None]
    paths: list[tuple[FaultState | None, tuple]] = []

    # forward over periods: lockstep states along the path, and pairs of
    # (async config, lockstep config) that agree so far with their multiplicity
    def forward(p, syncs, pairs, fstate, path, skipped, diverged):
        # skipped and diverged are trace counts already set aside on this path
        if p == periods:
            paths.append((path_start, path))
            report.compared += sum(pairs.values())
            report.skipped += skipped
            report.stutter_divergences += diverged
            return
        pf = PeriodFaults.of(automaton, fstate)
        sync_outcomes = {s: sorted(h.sync_segments(s, pf), key=repr) for s in syncs}
        fired_sets = {fired for outs in sync_outcomes.values() for _, _, fired in outs}
        if len(fired_sets) != 1:
            raise AssertionError("lockstep fault effects depend on message order")
        required = fired_sets.pop()
        next_pairs: dict = {}
        for (a, s), mult in pairs.items():
            for (segs, end_a, fired), cnt in h.async_segments(a, pf).items():
                weight = mult * cnt
                if not effect_indistinguishable(_zeta(fired, p), _zeta(required, p), 1):
                    skipped += weight
                    continue
                match = [end_s for segs_s, end_s, _ in sync_outcomes[s] if segs_s == segs]
                if not match:
                    diverged += weight
                    if len(report.details) < 10:
                        report.details.append(_describe_divergence(p, segs, sync_outcomes[s], system))
                    continue
                # with several lockstep twins (masquerade orders) any one of them may be followed
                pair = (end_a, match[0])
                next_pairs[pair] = next_pairs.get(pair, 0) + weight
        ends = sorted({end for outs in sync_outcomes.values() for _, end, _ in outs}, key=repr)
        grow = per_period if p + 1 < periods else 1
        for choice, nxt in h.jumps(ends, fstate, bool(required)):
            jump = lambda c: normalize(apply_jump(c, system, choice), system)
            jumped: dict = {}
            for (a, s), mult in next_pairs.items():
                pair = (jump(a), jump(s))
                jumped[pair] = jumped.get(pair, 0) + mult
            new_syncs = []
            for e in ends:
                if jump(e) not in new_syncs:
                    new_syncs.append(jump(e))
            forward(p + 1, new_syncs, jumped, nxt, path + ((required, choice, nxt),),
                    skipped * grow, diverged * grow)

    for path_start in starts:
        forward(0, [init], {(init, init): 1}, path_start, (), 0, 0)
    report.choice_paths = len(paths)
    report.traces = len(paths) * per_period ** periods

    if formula is not None:
        for start, path in paths:
            av = h.async_vectors(0, init, start, path)
            sv = h.sync_vectors(0, init, start, path)
            sync_verdicts = {h.fold.verdict(v) for v in sv}
            for v in sync_verdicts:
                report.sync_verdicts[v] = report.sync_verdicts.get(v, 0) + 1
            for vec, cnt in av.items():
                if h.fold.verdict(vec) not in sync_verdicts:
                    report.verdict_divergences += cnt
                    if len(report.details) < 10:
                        report.details.append(
                            f"verdict {h.fold.verdict(vec)} on {cnt} interleaving(s) vs lockstep "
                            f"{sorted(sync_verdicts)} along choices {_describe_path(start, path)}")
    return report


def _zeta(fired, p):
    return ((frozenset(fired), p),) if fired else ()


def _describe_path(start, path) -> str:
    parts = [str(start) if start is not None else "-"]
    for required, choice, nxt in path:
        parts.append(f"{sorted(required)} env={choice} -> {nxt if nxt is not None else '-'}")
    return "; ".join(parts)


def _describe_divergence(p, segs, sync_outs, system) -> str:
    sync_segs = sync_outs[0][0] if sync_outs else None
    for m in range(system.n):
        if sync_segs is None or segs[m] != sync_segs[m]:
            return f"period {p + 1}: machine {m + 1}'s projection differs from the lockstep run"
    return f"period {p + 1}: projections differ"
