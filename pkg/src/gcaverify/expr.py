"""Expression trees used by Assign actions, env updates and error functions.

Values are plain ints.  The fault-abstraction domain encodes ``Correct`` as 0
and ``Erroneous`` as 1, so a property such as ``Result = 0`` reads "the port
is correct".  Arithmetic that cannot produce a value (division by zero, a
result outside a bounded port) yields :data:`ERR`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union


class ModelError(Exception):
    """A model is malformed or references something that does not exist."""


class _Err:
    _instance: "_Err | None" = None

    def __new__(cls) -> "_Err":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Err"

    def __reduce__(self):
        return (_Err, ())


ERR = _Err()
Value = Union[int, _Err]

CORRECT = 0
ERRONEOUS = 1
NAMED_CONSTANTS: dict[str, Value] = {"Correct": CORRECT, "Erroneous": ERRONEOUS, "Err": ERR}


# --------------------------------------------------------------------------- nodes


class Expr:
    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()

    def walk(self):
        yield self
        for child in self.children():
            yield from child.walk()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Value
    name: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class EnvRef(Expr):
    name: str


@dataclass(frozen=True)
class Ref(Expr):
    """Pattern-level reference ``a[x+offset]``; offset 0 is the own slot."""

    array: str
    offset: int = 0


@dataclass(frozen=True)
class Slot(Expr):
    """Instantiated reference to slot ``index`` (1-based) of ``array``."""

    array: str
    index: int


@dataclass(frozen=True)
class Row(Expr):
    """All n local copies of an array, in slot order ``a[1..n]``."""

    array: str


@dataclass(frozen=True)
class SelfIndex(Expr):
    pass


@dataclass(frozen=True)
class Hole(Expr):
    """The value an error function receives (written ``$``)."""


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]

    def children(self):
        return self.args


# --------------------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Const):
        if e.name is not None:
            return e.name
        return "Err" if e.value is ERR else str(e.value)
    if isinstance(e, EnvRef):
        return e.name
    if isinstance(e, Ref):
        return f"{e.array}[x]" if e.offset == 0 else f"{e.array}[x+{e.offset}]"
    if isinstance(e, Slot):
        return f"{e.array}[{e.index}]"
    if isinstance(e, Row):
        return f"{e.array}[*]"
    if isinstance(e, SelfIndex):
        return "x"
    if isinstance(e, Hole):
        return "$"
    if isinstance(e, Neg):
        return f"-{to_text(e.operand, 3)}"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # right operand gets p+1 so a-(b-c) keeps its parentheses
        text = f"{to_text(e.left, p)} {e.op} {to_text(e.right, p + 1)}"
        return f"({text})" if p < parent else text
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_text(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)?)"
    r"|(?P<op><-|[-+*/()\[\],$*]))"
)


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ModelError(f"unexpected character {text[pos]!r} at column {pos + 1} in {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _ExprParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self, value: str | None = None) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            self.fail(f"expected {value!r}")
        self.i += 1
        return tok

    def fail(self, msg: str):
        kind, val, col = self.peek()
        found = "end of input" if kind == "end" else repr(val)
        raise ModelError(f"{msg} at column {col + 1} (found {found}) in {self.text!r}")

    def parse(self) -> Expr:
        e = self.additive()
        if self.peek()[0] != "end":
            self.fail("unexpected token")
        return e

    def additive(self) -> Expr:
        e = self.multiplicative()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            e = BinOp(op, e, self.multiplicative())
        return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            operand = self.unary()
            if isinstance(operand, Const) and isinstance(operand.value, int) and operand.name is None:
                return Const(-operand.value)
            return Neg(operand)
        return self.primary()

    def primary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "num":
            self.take()
            return Const(int(val))
        if val == "(":
            self.take()
            e = self.additive()
            self.take(")")
            return e
        if val == "$":
            self.take()
            return Hole()
        if kind != "name":
            self.fail("expected an expression")
        self.take()
        nxt = self.peek()[1]
        if nxt == "(":
            self.take()
            args: list[Expr] = []
            if self.peek()[1] != ")":
                args.append(self.additive())
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.additive())
            self.take(")")
            return Call(val, tuple(args))
        if nxt == "[":
            self.take()
            e = self.index(val)
            self.take("]")
            return e
        if val == "x":
            return SelfIndex()
        if val in NAMED_CONSTANTS:
            return Const(NAMED_CONSTANTS[val], val)
        return EnvRef(val)

    def index(self, array: str) -> Expr:
        kind, val, _ = self.peek()
        if val == "*":
            self.take()
            return Row(array)
        if kind == "num":
            self.take()
            return Slot(array, int(val))
        if val == "x":
            self.take()
            if self.peek()[1] == "+":
                self.take()
                kind, num, _ = self.peek()
                if kind != "num":
                    self.fail("expected an integer offset")
                self.take()
                return Ref(array, int(num))
            return Ref(array, 0)
        self.fail("expected x, x+i, an integer or *")


def parse_expr(text: str) -> Expr:
    return _ExprParser(str(text)).parse()


# --------------------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class TaskOutput:
    """One output port of an opaque task function."""

    expr: Expr | None = None
    depends: tuple[str, ...] | None = None  # implication graph row; None = all inputs


@dataclass(frozen=True)
class Task:
    name: str
    inputs: tuple[str, ...]
    outputs: Mapping[str, TaskOutput]

    def __hash__(self):
        return hash((self.name, self.inputs, tuple(sorted(self.outputs))))


@dataclass
class EvalContext:
    machine: int
    n: int
    read: Callable[[str, int], Value]
    row: Callable[[str], tuple[Value, ...]]
    env: Mapping[str, Value]
    tasks: Mapping[str, Task]
    fa_arrays: frozenset[str] = frozenset()
    hole: Value = 0


def _arith(op: str, a: Value, b: Value) -> Value:
    if a is ERR or b is ERR:
        return ERR
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        return ERR
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def evaluate(e: Expr, ctx: EvalContext) -> Value:
    """Concrete integer evaluation."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Slot):
        return ctx.read(e.array, e.index)
    if isinstance(e, BinOp):
        return _arith(e.op, evaluate(e.left, ctx), evaluate(e.right, ctx))
    if isinstance(e, Neg):
        v = evaluate(e.operand, ctx)
        return ERR if v is ERR else -v
    if isinstance(e, EnvRef):
        return ctx.env[e.name]
    if isinstance(e, Row):
        raise ModelError(f"{e.array}[*] is only meaningful as a mechanism argument")
    if isinstance(e, SelfIndex):
        return ctx.machine
    if isinstance(e, Hole):
        return ctx.hole
    if isinstance(e, Call):
        return _call(e, ctx, fa=False)
    if isinstance(e, Ref):
        raise ModelError(f"uninstantiated reference {to_text(e)}")
    raise TypeError(e)


def evaluate_fa(e: Expr, ctx: EvalContext) -> Value:
    """Fault-abstraction evaluation: arithmetic is erroneous iff an operand is."""
    if isinstance(e, Const):
        return ERRONEOUS if e.value is ERR or e.value == ERRONEOUS else CORRECT
    if isinstance(e, Slot):
        v = ctx.read(e.array, e.index)
        if v is ERR:
            return ERRONEOUS
        return v if e.array in ctx.fa_arrays else CORRECT
    if isinstance(e, EnvRef):
        v = ctx.env[e.name]
        return ERRONEOUS if v is ERR or v == ERRONEOUS else CORRECT
    if isinstance(e, (BinOp, Neg)):
        return max(evaluate_fa(c, ctx) for c in e.children())
    if isinstance(e, Hole):
        return ctx.hole
    if isinstance(e, SelfIndex):
        return CORRECT
    if isinstance(e, Call):
        v = _call(e, ctx, fa=True)
        return ERRONEOUS if v is ERR else v
    if isinstance(e, Row):
        raise ModelError(f"{e.array}[*] is only meaningful as a mechanism argument")
    raise TypeError(e)


def _call(e: Call, ctx: EvalContext, fa: bool) -> Value:
    from . import mechanisms

    if "." in e.func:
        task_name, port = e.func.split(".", 1)
        task = ctx.tasks.get(task_name)
        if task is None or port not in task.outputs:
            raise ModelError(f"unknown task output {e.func}")
        if len(e.args) != len(task.inputs):
            raise ModelError(f"{e.func} expects {len(task.inputs)} arguments")
        out = task.outputs[port]
        if fa:
            inputs = {p: evaluate_fa(a, ctx) for p, a in zip(task.inputs, e.args)}
            return mechanisms.propagate_fault_abstraction(task, inputs)[port]
        if out.expr is None:
            raise ModelError(f"task output {e.func} has no concrete expression")
        bound = {p: evaluate(a, ctx) for p, a in zip(task.inputs, e.args)}
        local = EvalContext(ctx.machine, ctx.n, ctx.read, ctx.row, {**ctx.env, **bound}, ctx.tasks,
                            ctx.fa_arrays, ctx.hole)
        return evaluate(out.expr, local)

    builtin = mechanisms.BUILTINS.get(e.func)
    if builtin is None:
        raise ModelError(f"unknown function {e.func}")
    args = [ctx.row(a.array) if isinstance(a, Row) else evaluate(a, ctx) for a in e.args]
    return builtin(ctx, *args)


# --------------------------------------------------------------------------- helpers


def resolve(e: Expr, machine: int, n: int) -> Expr:
    """Replace pattern references ``a[x+i]`` by absolute slots for ``machine``."""
    if isinstance(e, Ref):
        if not 0 <= e.offset <= n:
            raise ModelError(f"index x+{e.offset} is outside 1..{n}")
        return Slot(e.array, (machine - 1 + e.offset) % n + 1)
    if isinstance(e, Slot):
        if not 1 <= e.index <= n:
            raise ModelError(f"slot {e.array}[{e.index}] is outside 1..{n}")
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, resolve(e.left, machine, n), resolve(e.right, machine, n))
    if isinstance(e, Neg):
        return Neg(resolve(e.operand, machine, n))
    if isinstance(e, Call):
        return Call(e.func, tuple(resolve(a, machine, n) for a in e.args))
    return e


def arrays_used(e: Expr) -> set[str]:
    return {node.array for node in e.walk() if isinstance(node, (Ref, Slot, Row))}


def env_used(e: Expr) -> set[str]:
    return {node.name for node in e.walk() if isinstance(node, EnvRef)}

