"""Propositional LTL over machine variables: syntax, admissibility and evaluation.

Atoms compare arithmetic terms, e.g. ``m1.Result = Erroneous`` or
``Trigger[1] + 1 != 2``.  Variables are written ``m<i>.<array>[<slot>]``;
without a slot they denote machine i's own slot, and without the ``m<i>.``
prefix they belong to the property's default machine.  ``m<i>.next`` is the
cursor (0 when the machine has finished its period) and ``m<i>.queue`` the
number of pending messages.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .expr import ERR, NAMED_CONSTANTS, ModelError, Value, _arith

# --------------------------------------------------------------------------- syntax


class FormulaSyntaxError(ModelError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at column {pos + 1}")
        self.pos = pos


class Formula:
    __slots__ = ()

    def children(self) -> tuple["Formula", ...]:
        return ()

    def walk(self):
        yield self
        for c in self.children():
            yield from c.walk()

    def __str__(self) -> str:
        return to_text(self)


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Term):
    value: Value
    name: str | None = None


@dataclass(frozen=True)
class Var(Term):
    """``field`` is an array name, ``"next"``, ``"queue"`` or an environment variable."""

    machine: int | None
    field: str
    slot: int | None = None


@dataclass(frozen=True)
class Arith(Term):
    op: str
    left: Term
    right: Term


@dataclass(frozen=True)
class Minus(Term):
    operand: Term


@dataclass(frozen=True)
class Atom(Formula):
    op: str  # = != < <= > >=
    left: Term
    right: Term


@dataclass(frozen=True)
class Bool(Formula):
    value: bool


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Binary(Formula):
    op: str  # & | -> <->
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Globally(Formula):
    operand: Formula

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Eventually(Formula):
    operand: Formula

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Next(Formula):
    operand: Formula

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


TEMPORAL = (Globally, Eventually, Next, Until)
COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")

# --------------------------------------------------------------------------- printing


def term_text(t: Term) -> str:
    if isinstance(t, Num):
        if t.name:
            return t.name
        return repr(t.value) if t.value is ERR else str(t.value)
    if isinstance(t, Var):
        text = t.field if t.machine is None else f"m{t.machine}.{t.field}"
        return text if t.slot is None else f"{text}[{t.slot}]"
    if isinstance(t, Arith):
        return f"({term_text(t.left)} {t.op} {term_text(t.right)})"
    if isinstance(t, Minus):
        return f"-{term_text(t.operand)}"
    raise TypeError(t)


def to_text(f: Formula) -> str:
    """Fully parenthesised rendering; ``parse_formula(to_text(f)) == f``."""
    if isinstance(f, Atom):
        return f"({term_text(f.left)} {f.op} {term_text(f.right)})"
    if isinstance(f, Bool):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return f"!{to_text(f.operand)}"
    if isinstance(f, Binary):
        return f"({to_text(f.left)} {f.op} {to_text(f.right)})"
    if isinstance(f, Until):
        return f"({to_text(f.left)} U {to_text(f.right)})"
    prefix = {Globally: "G", Eventually: "F", Next: "X"}[type(f)]
    return f"{prefix}({to_text(f.operand)})"


# --------------------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<op><->|->|<=|>=|!=|&&|\|\||[=<>!&|()+\-*/\[\]])"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)?))"
)
_PREFIX = {"G": Globally, "AG": Globally, "F": Eventually, "AF": Eventually, "X": Next}
_MACHINE = re.compile(r"^(?:m|ecu)(\d+)$")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            at = len(text) - len(text[pos:].lstrip())
            raise FormulaSyntaxError(f"unexpected character {text[at]!r}", at)
        kind = m.lastgroup
        value = m.group(kind)
        if value == "&&":
            value = "&"
        elif value == "||":
            value = "|"
        out.append((kind, value, m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Backtrack(Exception):
    pass


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, ahead: int = 0):
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, v, pos = self.take()
        if v != value or kind == "end":
            raise FormulaSyntaxError(f"expected {value!r} but found {v or 'end of input'!r}", pos)

    def fail(self, msg: str):
        raise FormulaSyntaxError(msg, self.peek()[2])

    def parse(self) -> Formula:
        f = self.iff()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return f

    def iff(self) -> Formula:
        left = self.implies()
        while self.peek()[1] == "<->":
            self.take()
            left = Binary("<->", left, self.implies())
        return left

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek()[1] == "->":
            self.take()
            return Binary("->", left, self.implies())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.peek()[1] == "|":
            self.take()
            left = Binary("|", left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.until()
        while self.peek()[1] == "&":
            self.take()
            left = Binary("&", left, self.until())
        return left

    def until(self) -> Formula:
        left = self.unary()
        if self.peek() [:2] == ("id", "U"):
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        kind, value, pos = self.peek()
        if value == "!" and kind == "op":
            self.take()
            return Not(self.unary())
        if kind == "id" and value in _PREFIX and self.peek(1)[1] in ("(", "!") | _PREFIX.keys():
            self.take()
            return _PREFIX[value](self.unary())
        if kind == "id" and value in ("true", "false"):
            self.take()
            return Bool(value == "true")
        if value == "(":
            save = self.i
            first = None
            try:
                self.take()
                inner = self.iff()
                self.expect(")")
                if self.peek()[1] in COMPARISONS or self.peek()[1] in ("+", "-", "*", "/"):
                    raise _Backtrack
                return inner
            except FormulaSyntaxError as e:
                first = e
            except _Backtrack:
                pass
            self.i = save
            try:
                return self.atom()
            except FormulaSyntaxError as e:
                # report whichever reading got further
                if first is not None and first.pos > e.pos:
                    raise first from None
                raise
        return self.atom()

    def atom(self) -> Atom:
        left = self.sum()
        kind, op, pos = self.peek()
        if op not in COMPARISONS:
            self.fail(f"expected a comparison but found {op or 'end of input'!r}")
        self.take()
        return Atom(op, left, self.sum())

    def sum(self) -> Term:
        left = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            left = Arith(op, left, self.product())
        return left

    def product(self) -> Term:
        left = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            left = Arith(op, left, self.factor())
        return left

    def factor(self) -> Term:
        kind, value, pos = self.take()
        if kind == "num":
            return Num(int(value))
        if value == "-":
            return Minus(self.factor())
        if value == "(":
            t = self.sum()
            self.expect(")")
            return t
        if kind == "id":
            if value in NAMED_CONSTANTS:
                return Num(NAMED_CONSTANTS[value], value)
            machine = None
            name = value
            if "." in value:
                head, name = value.split(".", 1)
                m = _MACHINE.match(head)
                if not m:
                    raise FormulaSyntaxError(f"unknown machine prefix {head!r} (use m<i>.)", pos)
                machine = int(m.group(1))
            slot = None
            if self.peek()[1] == "[":
                self.take()
                k, v, p = self.take()
                if k != "num":
                    raise FormulaSyntaxError("slot index must be a number", p)
                slot = int(v)
                self.expect("]")
            return Var(machine, name, slot)
        raise FormulaSyntaxError(f"unexpected {value or 'end of input'!r}", pos)


def parse_formula(text: str, system=None) -> Formula:
    """Parse a formula; with ``system`` given, unknown identifiers are rejected."""
    f = _Parser(str(text)).parse()
    if system is not None:
        check_identifiers(f, system)
    return f


def variables(f: Formula) -> list[Var]:
    out = []

    def term(t):
        if isinstance(t, Var):
            out.append(t)
        elif isinstance(t, Arith):
            term(t.left)
            term(t.right)
        elif isinstance(t, Minus):
            term(t.operand)

    for node in f.walk():
        if isinstance(node, Atom):
            term(node.left)
            term(node.right)
    return out


def check_identifiers(f: Formula, system) -> None:
    arrays = set(system.pattern.arrays)
    env = set(system.pattern.env_vars)
    for v in variables(f):
        if v.machine is not None and not 1 <= v.machine <= system.n:
            raise ModelError(f"{term_text(v)}: no machine {v.machine} (n = {system.n})")
        if v.field in ("next", "queue"):
            if v.slot is not None:
                raise ModelError(f"{term_text(v)}: {v.field} takes no index")
            continue
        if v.field in env:
            continue
        if v.field not in arrays:
            raise ModelError(f"unknown identifier {v.field!r} in {term_text(v)}")
        if v.slot is not None and not 1 <= v.slot <= system.n:
            raise ModelError(f"{term_text(v)}: slot outside 1..{system.n}")


# --------------------------------------------------------------------------- admissibility


class NotAdmissible(ModelError):
    def __init__(self, message: str, culprit: str):
        super().__init__(f"{message}: {culprit}")
        self.culprit = culprit


def order_atoms(f: Formula) -> list[Atom]:
    """Atoms outside the ``exp = c`` grammar for which stutter-invariance is guaranteed."""
    return [a for a in f.walk() if isinstance(a, Atom) and a.op not in ("=", "!=")]


def check_admissible(f: Formula, system=None, default_machine: int = 1, strict: bool = False) -> int:
    """The single machine a next-free local formula talks about.

    Rejects X, atoms over more than one machine, queue and environment
    references and, when ``strict``, order comparisons.
    """
    for node in f.walk():
        if isinstance(node, Next):
            raise NotAdmissible("the next operator is not preserved", to_text(node))
    env = set(system.pattern.env_vars) if system is not None else set()
    machines = set()
    for atom in (a for a in f.walk() if isinstance(a, Atom)):
        if strict and atom.op not in ("=", "!="):
            raise NotAdmissible("order comparison outside the preserved atom grammar", to_text(atom))
        here = set()
        for v in variables(atom):
            if v.field == "queue":
                raise NotAdmissible("atoms over message queues are not local", to_text(atom))
            if v.field in env:
                raise NotAdmissible("atoms over environment variables are not local", to_text(atom))
            here.add(v.machine if v.machine is not None else default_machine)
        if len(here) > 1:
            raise NotAdmissible("atom mixes machines", to_text(atom))
        machines |= here
    if len(machines) > 1:
        raise NotAdmissible("formula mixes machines " + ", ".join(f"m{m}" for m in sorted(machines)), to_text(f))
    if system is not None:
        check_identifiers(f, system)
    return machines.pop() if machines else default_machine


# --------------------------------------------------------------------------- evaluation

Lookup = Callable[[Var], Value]


def view_of_config(config, system, default_machine: int = 1) -> Lookup:
    """Variable lookup on a full configuration."""

    def lookup(v: Var) -> Value:
        m = v.machine if v.machine is not None else default_machine
        ms = config.machines[m - 1]
        return _lookup_machine(v, m, ms.values, ms.next, len(ms.queue), ms.env, system)

    return lookup


def view_of_projection(state, machine: int, system) -> Lookup:
    """Variable lookup on one machine's projected ``(values, next)`` pair."""
    values, cursor = state

    def lookup(v: Var) -> Value:
        if v.machine is not None and v.machine != machine:
            raise ModelError(f"{term_text(v)} is not visible in machine {machine}'s projection")
        return _lookup_machine(v, machine, values, cursor, None, None, system)

    return lookup


def _lookup_machine(v: Var, m: int, values, cursor, queue_len, env, system) -> Value:
    if v.field == "next":
        return cursor or 0
    if v.field == "queue":
        if queue_len is None:
            raise ModelError("queues are not part of a projection")
        return queue_len
    if v.field in system.array_index:
        slot = v.slot if v.slot is not None else m
        return values[system.array_index[v.field]][slot - 1]
    if env is not None and v.field in system.env_names:
        return env[system.env_names.index(v.field)]
    raise ModelError(f"undefined variable {term_text(v)}")


def eval_term(t: Term, lookup: Lookup) -> Value:
    if isinstance(t, Num):
        return t.value
    if isinstance(t, Var):
        return lookup(t)
    if isinstance(t, Arith):
        return _arith(t.op, eval_term(t.left, lookup), eval_term(t.right, lookup))
    if isinstance(t, Minus):
        v = eval_term(t.operand, lookup)
        return ERR if v is ERR else -v
    raise TypeError(t)


def eval_atom(a: Atom, lookup: Lookup) -> bool:
    left, right = eval_term(a.left, lookup), eval_term(a.right, lookup)
    if a.op == "=":
        return left == right
    if a.op == "!=":
        return left != right
    if left is ERR or right is ERR:
        return False
    return {"<": left < right, "<=": left <= right, ">": left > right, ">=": left >= right}[a.op]


def closure(f: Formula) -> tuple[Formula, ...]:
    """Distinct subformulas, children before parents."""
    out: list[Formula] = []
    seen = set()

    def visit(g):
        for c in g.children():
            visit(c)
        if g not in seen:
            seen.add(g)
            out.append(g)

    visit(f)
    return tuple(out)


def local_value(g: Formula, truth: Mapping[Formula, bool], atoms: Callable[[Atom], bool]) -> bool:
    """Value of a non-temporal node from its children's values."""
    if isinstance(g, Atom):
        return atoms(g)
    if isinstance(g, Bool):
        return g.value
    if isinstance(g, Not):
        return not truth[g.operand]
    if isinstance(g, Binary):
        a, b = truth[g.left], truth[g.right]
        return {"&": a and b, "|": a or b, "->": (not a) or b, "<->": a == b}[g.op]
    raise TypeError(g)


def step_truth(g: Formula, truth: Mapping[Formula, bool], nxt: Mapping[Formula, bool]) -> bool:
    """One-step unfolding of a temporal node given the successor position's values."""
    if isinstance(g, Globally):
        return truth[g.operand] and nxt[g]
    if isinstance(g, Eventually):
        return truth[g.operand] or nxt[g]
    if isinstance(g, Next):
        return nxt[g.operand]
    if isinstance(g, Until):
        return truth[g.right] or (truth[g.left] and nxt[g])
    raise TypeError(g)


@dataclass(frozen=True)
class Lasso:
    """Positions ``0..len-1``; the successor of the last position is ``loop``."""

    states: tuple
    loop: int

    def __post_init__(self):
        if not self.states or not 0 <= self.loop < len(self.states):
            raise ValueError("a lasso needs at least one state and a loop index inside it")


def eval_lasso(f: Formula, lookups: Sequence[Lookup], loop: int) -> list[bool]:
    """Truth of ``f`` at every lasso position (least/greatest fixpoints by iteration)."""
    L = len(lookups)
    cl = closure(f)
    atom_cache = [dict() for _ in range(L)]

    def atoms_at(t):
        return lambda a: atom_cache[t].setdefault(a, eval_atom(a, lookups[t]))

    truth = [dict() for _ in range(L)]
    for g in cl:
        if isinstance(g, TEMPORAL):
            init = isinstance(g, Globally)
            for t in range(L):
                truth[t][g] = init
            changed = True
            while changed:
                changed = False
                for t in reversed(range(L)):
                    nxt = truth[t + 1] if t + 1 < L else truth[loop]
                    v = step_truth(g, truth[t], nxt)
                    if v != truth[t][g]:
                        truth[t][g] = v
                        changed = True
        else:
            for t in range(L):
                truth[t][g] = local_value(g, truth[t], atoms_at(t))
    return [truth[t][f] for t in range(L)]


def eval_formula(structure, f: Formula, system=None, machine: int = 1) -> bool:
    """Verdict of ``f`` at the first position.

    ``structure`` is a :class:`Lasso` or a finite sequence (a trace, a list of
    configurations, or projected ``(values, next)`` states); finite sequences
    repeat their final state forever.  Entries may also be ready-made lookups.
    """
    from .traces import Trace

    loop = None
    if isinstance(structure, Lasso):
        states, loop = structure.states, structure.loop
    elif isinstance(structure, Trace):
        states, loop = structure.states, structure.loop
    else:
        states = tuple(structure)
    if not states:
        raise ValueError("cannot evaluate a formula on an empty trace")
    if loop is None:
        loop = len(states) - 1
    lookups = [_as_lookup(s, system, machine) for s in states]
    return eval_lasso(f, lookups, loop)[0]


def _as_lookup(s, system, machine) -> Lookup:
    from .core import SystemConfig

    if callable(s):
        return s
    if isinstance(s, SystemConfig):
        return view_of_config(s, system, machine)
    if isinstance(s, Mapping):
        return lambda v: s[term_text(v)] if term_text(v) in s else s[v.field]
    return view_of_projection(s, machine, system)


# --------------------------------------------------------------------------- truth vectors


class TruthFold:
    """Backward evaluation over finite traces, one position at a time.

    ``vector(lookup, nxt)`` gives the truth of every closure member at a
    position from the vector of the next position; ``last(lookup)`` handles
    the final, forever-repeated position.  Vectors are tuples aligned with
    ``self.closure``.
    """

    def __init__(self, f: Formula):
        self.formula = f
        self.closure = closure(f)
        self.index = {g: i for i, g in enumerate(self.closure)}

    def _fill(self, lookup: Lookup, nxt) -> tuple[bool, ...]:
        truth: dict[Formula, bool] = {}
        atoms = lambda a: eval_atom(a, lookup)
        for g in self.closure:
            if isinstance(g, TEMPORAL):
                if nxt is None:
                    # stationary position: G, F and X reduce to the operand, U to its right side
                    truth[g] = truth[g.right] if isinstance(g, Until) else truth[g.operand]
                else:
                    truth[g] = step_truth(g, truth, _VectorView(nxt, self.index))
            else:
                truth[g] = local_value(g, truth, atoms)
        return tuple(truth[g] for g in self.closure)

    def last(self, lookup: Lookup) -> tuple[bool, ...]:
        return self._fill(lookup, None)

    def vector(self, lookup: Lookup, nxt: tuple[bool, ...]) -> tuple[bool, ...]:
        return self._fill(lookup, nxt)

    def verdict(self, vec: tuple[bool, ...]) -> bool:
        return vec[-1]


class _VectorView:
    def __init__(self, vec, index):
        self.vec = vec
        self.index = index

    def __getitem__(self, g):
        return self.vec[self.index[g]]
