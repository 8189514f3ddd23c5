"""Random model generators and small brute-force oracles shared by the tests."""

from __future__ import annotations

import itertools
from collections import deque
import random
from dataclasses import dataclass

from gcaverify.core import Assign, GCASystem, Pattern, Receive, Send, exec_action, global_jump, normalize
from gcaverify.expr import BinOp, Const, EnvRef, Hole, Ref
from gcaverify.faults import FaultAutomaton, FaultSpec
from gcaverify.logic import Formula, parse_formula
from gcaverify.mechanisms import BoundedInt


@dataclass(frozen=True)
class Generated:
    system: GCASystem
    formula: Formula
    machine: int
    automaton: FaultAutomaton | None = None
    seed: int = 0


def _expr(rng: random.Random, arrays, n, env):
    leaves = [lambda: Ref(rng.choice(arrays), rng.randrange(n + 1)), lambda: Const(rng.randrange(2))]
    if env:
        leaves.append(lambda: EnvRef("u"))
    left = rng.choice(leaves)()
    if rng.random() < 0.6:
        return BinOp(rng.choice("+-"), left, rng.choice(leaves)())
    return left


def random_pattern(rng: random.Random, n: int, k: int, env: bool) -> Pattern:
    arrays = ("a", "b")[: rng.choice((1, 2))]
    actions = []
    for _ in range(k):
        kind = rng.choices(("assign", "send", "receive"), (3, 2, 2))[0]
        arr = rng.choice(arrays)
        if kind == "assign":
            actions.append(Assign(arr, _expr(rng, arrays, n, env)))
        elif kind == "send":
            actions.append(Send(arr))
        else:
            actions.append(Receive(arr))
    if not any(isinstance(a, Send) for a in actions):
        actions[rng.randrange(k)] = Send(arrays[0])
    return Pattern(arrays, ("u",) if env else (), tuple(actions))


def random_formula(rng: random.Random, pattern: Pattern, machine: int, n: int) -> Formula:
    m = f"m{machine}."

    def atom():
        choice = rng.randrange(3)
        if choice == 0:
            return f"{m}next = {rng.randrange(pattern.k + 1)}"
        arr = rng.choice(pattern.arrays)
        slot = f"[{rng.randrange(1, n + 1)}]" if rng.random() < 0.5 else ""
        op = rng.choice(("=", "!="))
        return f"{m}{arr}{slot} {op} {rng.randrange(3)}"

    def prop(depth):
        if depth == 0 or rng.random() < 0.3:
            return f"({atom()})"
        op = rng.choice(("&", "|", "->", "!"))
        if op == "!":
            return f"!{prop(depth - 1)}"
        return f"({prop(depth - 1)} {op} {prop(depth - 1)})"

    def temporal(depth):
        r = rng.random()
        if depth == 0 or r < 0.2:
            return prop(1)
        if r < 0.45:
            return f"G({temporal(depth - 1)})"
        if r < 0.7:
            return f"F({temporal(depth - 1)})"
        if r < 0.85:
            return f"({temporal(depth - 1)} U {temporal(depth - 1)})"
        return f"({temporal(depth - 1)} & {temporal(depth - 1)})"

    return parse_formula(temporal(2))


def random_model(seed: int, max_k: int = 6, max_n: int = 3) -> Generated:
    """n in {2, 3}, k <= max_k, at most two environment branches."""
    rng = random.Random(seed)
    n = rng.choice([x for x in (2, 3) if x <= max_n])
    k = rng.randint(3, max_k if n == 2 else min(max_k, 5))
    env = rng.random() < 0.6
    pattern = random_pattern(rng, n, k, env)
    domains = {a: BoundedInt(0, 2) for a in pattern.arrays}
    update = {"u": (Const(0), Const(1))} if env else {}
    system = GCASystem(pattern, n, 1.0, domains, env_update=update)
    machine = rng.randint(1, n)
    return Generated(system, random_formula(rng, pattern, machine, n), machine, None, seed)


def random_fault_model(seed: int, max_k: int = 5) -> Generated:
    """A generated model with a two- or three-location fault automaton attached."""
    rng = random.Random(10_000 + seed)
    base = random_model(seed, max_k=max_k)
    system = base.system
    actions = system.pattern.actions
    n = system.n
    single_send = {a: sum(isinstance(x, Send) and x.array == a for x in actions) == 1 for a in system.pattern.arrays}
    faults = []
    for idx in range(rng.randint(1, 3)):
        pos = rng.randrange(1, system.k + 1)
        action = actions[pos - 1]
        i = rng.randint(1, n)
        others = [m for m in range(1, n + 1) if m != i]
        if isinstance(action, Assign):
            kind = rng.choice(("WrongResult", "FailSilent"))
        elif isinstance(action, Send):
            kinds = ["FailSilent", "MessageLoss", "Corruption"]
            if n == 3 and single_send[action.array]:
                kinds.append("Masquerade")
            kind = rng.choice(kinds)
        else:
            kind = "FailSilent"
        k = k2 = None
        if kind in ("MessageLoss", "Corruption"):
            k = rng.choice(others)
            k2 = rng.randrange(3) if kind == "Corruption" else None
        if kind == "Masquerade":
            k2 = rng.choice(others)
            k = rng.choice([m for m in range(1, n + 1) if m != k2])
        psi = BinOp("+", Hole(), Const(1)) if kind == "WrongResult" else None
        faults.append(FaultSpec(f"f{idx}", f"f{idx}", kind, pos, i, k, k2, psi))
    acts = sorted({f.act for f in faults})
    locs = ("ok", "bad", "worse")[: rng.choice((2, 3))]
    labels = {"ok": frozenset()}
    for loc in locs[1:]:
        labels[loc] = frozenset(rng.sample(acts, rng.randint(1, len(acts))))
    edges = {loc: tuple(sorted(rng.sample(locs, rng.randint(1, len(locs))) + ["ok"], key=locs.index))
             for loc in locs}
    edges = {loc: tuple(dict.fromkeys(v)) for loc, v in edges.items()}
    ltbf = rng.choice((None, None, 0.5, 4.0))
    automaton = FaultAutomaton(locs, ("ok", locs[1]), edges, labels, tuple(faults), ltbf, system.period)
    return Generated(system, base.formula, base.machine, automaton, seed)


def all_interleavings(n: int, k: int):
    """Every merge of n sequences of length k, as (machine, position) lists."""
    slots = [m for m in range(1, n + 1) for _ in range(k)]
    seen = set()
    for perm in itertools.permutations(slots):
        if perm in seen:
            continue
        seen.add(perm)
        count = {m: 0 for m in range(1, n + 1)}
        out = []
        for m in perm:
            count[m] += 1
            out.append((m, count[m]))
        yield tuple(out)


# ---------------------------------------------------------------- fault fixtures


def fault_fixture():
    """Three machines, a in [0, 9] starting at (5, 6, 7) everywhere: a[x] <- a[x] + 1; send; receive."""
    from gcaverify.expr import parse_expr

    pattern = Pattern(("a",), (), (Assign("a", parse_expr("a[x] + 1")), Send("a"), Receive("a")))
    return GCASystem(pattern, 3, domains={"a": BoundedInt(0, 9)}, init={"a": (5, 6, 7)})


def config_diff(a, b):
    """Per machine: changed slots, queue contents and cursor of two configurations."""
    out = {}
    for m, (x, y) in enumerate(zip(a.machines, b.machines), 1):
        d = {}
        if x.values != y.values:
            d["values"] = (x.values, y.values)
        if x.queue != y.queue:
            d["queue"] = (x.queue, y.queue)
        if x.next != y.next:
            d["next"] = (x.next, y.next)
        if d:
            out[m] = d
    return out


def naive_depths(system):
    """Lockstep BFS straight from the core semantics: machines 1..n per step, then a jump."""
    start = (normalize(system.initial_config(), system), 0)
    depth = {start: 0}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        c, step = node
        if step < system.k:
            for m in range(1, system.n + 1):
                c = exec_action(c, m, system)
            succ = [(normalize(c, system), step + 1)]
        else:
            succ = [(normalize(x, system), 0) for x in global_jump(c, system)]
        for s in succ:
            if s not in depth:
                depth[s] = depth[node] + 1
                queue.append(s)
    return depth
