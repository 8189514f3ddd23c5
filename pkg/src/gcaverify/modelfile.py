"""YAML model files: schema, loading with line-numbered errors, and dumping."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import yaml

from .core import Assign, GCASystem, Pattern, Receive, Send
from .expr import ERR, ModelError, Task, TaskOutput, parse_expr, to_text
from .faults import FAULT_TYPES, FaultAutomaton, FaultSpec
from .logic import Formula, check_admissible, order_atoms, parse_formula
from .logic import to_text as formula_text
from .mechanisms import MACROS, BoundedInt, FaultAbstraction, expand_macro
from .schedules import TimedSchedule

_INT_PAIR = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
_NUM_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_DOMAIN = {"oneOf": [{"const": "fault-abstraction"}, _INT_PAIR]}
_VALUE = {"oneOf": [{"type": "integer"}, {"enum": ["Correct", "Erroneous"]}]}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["redundancy", "pattern"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "redundancy": {"type": "integer", "minimum": 1},
        "period": {"type": "number", "exclusiveMinimum": 0},
        "domain": _DOMAIN,
        "flush_queues_at_jump": {"type": "boolean"},
        "pattern": {
            "type": "object",
            "required": ["actions"],
            "additionalProperties": False,
            "properties": {
                "arrays": {
                    "type": "object",
                    "additionalProperties": {
                        "type": ["object", "null"],
                        "additionalProperties": False,
                        "properties": {
                            "domain": _DOMAIN,
                            "init": {"oneOf": [_VALUE, {"type": "array", "items": _VALUE}]},
                        },
                    },
                },
                "env": {
                    "type": "object",
                    "additionalProperties": {
                        "type": ["object", "null"],
                        "additionalProperties": False,
                        "properties": {
                            "init": _VALUE,
                            "update": {"type": "array", "items": {"type": ["string", "integer"]}, "minItems": 1},
                        },
                    },
                },
                "tasks": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "object",
                        "required": ["inputs", "outputs"],
                        "additionalProperties": False,
                        "properties": {
                            "inputs": {"type": "array", "items": {"type": "string"}},
                            "outputs": {
                                "type": "object",
                                "additionalProperties": {
                                    "type": ["object", "null"],
                                    "additionalProperties": False,
                                    "properties": {
                                        "expr": {"type": ["string", "integer"]},
                                        "depends": {"type": "array", "items": {"type": "string"}},
                                    },
                                },
                            },
                        },
                    },
                },
                "actions": {
                    "type": "array",
                    "items": {
                        "oneOf": [
                            {"type": "string"},
                            {
                                "type": "object",
                                "required": ["action"],
                                "additionalProperties": False,
                                "properties": {"action": {"type": "string"}, "label": {"type": "string"}},
                            },
                            {
                                "type": "object",
                                "required": ["macro"],
                                "properties": {"macro": {"enum": list(MACROS)}, "label": {"type": "string"}},
                            },
                        ]
                    },
                },
            },
        },
        "faults": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "specs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["act", "type", "action", "machine"],
                        "additionalProperties": False,
                        "properties": {
                            "name": {"type": "string"},
                            "act": {"type": "string"},
                            "type": {"enum": list(FAULT_TYPES)},
                            "action": {"type": ["string", "integer"]},
                            "machine": {"type": "integer", "minimum": 1},
                            "k": {"type": "integer", "minimum": 1},
                            "k_prime": {"type": "integer", "minimum": 1},
                            "psi": {"type": ["string", "integer"]},
                        },
                    },
                },
                "automaton": {
                    "type": "object",
                    "required": ["locations"],
                    "additionalProperties": False,
                    "properties": {
                        "initial": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                        "locations": {
                            "type": "object",
                            "minProperties": 1,
                            "additionalProperties": {
                                "type": "object",
                                "required": ["next"],
                                "additionalProperties": False,
                                "properties": {
                                    "acts": {"type": "array", "items": {"type": "string"}},
                                    "next": {"type": "array", "items": {"type": "string"}},
                                },
                            },
                        },
                    },
                },
                "ltbf": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "properties": {
            "type": ["object", "null"],
            "additionalProperties": {
                "oneOf": [
                    {"type": "string"},
                    {
                        "type": "object",
                        "required": ["formula"],
                        "additionalProperties": False,
                        "properties": {"formula": {"type": "string"}, "machine": {"type": "integer", "minimum": 1}},
                    },
                ]
            },
        },
        "schedule": {
            "type": "object",
            "required": ["tau_net", "times"],
            "additionalProperties": False,
            "properties": {
                "tau_net": {"type": "number", "minimum": 0},
                "times": {
                    "type": "object",
                    "additionalProperties": {"type": "array", "items": _NUM_PAIR},
                },
            },
        },
        "deployment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"deterministic_assumption": {"type": "boolean"}},
        },
    },
}


@dataclass(frozen=True)
class Property:
    name: str
    formula: Formula
    machine: int
    outside_scope: bool = False  # uses order comparisons

    @property
    def text(self) -> str:
        return formula_text(self.formula)


@dataclass(frozen=True)
class Model:
    name: str
    system: GCASystem
    automaton: FaultAutomaton | None = None
    properties: tuple[Property, ...] = ()
    schedule: TimedSchedule | None = None
    deterministic_assumption: bool = True
    default_domain: Any = field(default_factory=FaultAbstraction)

    def property(self, name: str) -> Property:
        for p in self.properties:
            if p.name == name:
                return p
        raise ModelError(f"no property named {name!r}")


# --------------------------------------------------------------------------- error positions


def _node_at(node, path):
    for key in path:
        if isinstance(node, yaml.MappingNode):
            found = None
            for k, v in node.value:
                if k.value == str(key):
                    found = v
                    break
            if found is None:
                return node
            node = found
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            return node
    return node


def _where(root, path) -> str:
    if root is None:
        return ""
    node = _node_at(root, list(path))
    return f"line {node.start_mark.line + 1}: "


# --------------------------------------------------------------------------- parsing helpers

_ASSIGN = re.compile(r"^\s*([A-Za-z_]\w*)\s*\[\s*x\s*\]\s*<-\s*(.+)$")
_SEND = re.compile(r"^\s*send\s*\(\s*([A-Za-z_]\w*)\s*(?:\[\s*x\s*\])?\s*\)\s*$")
_RECEIVE = re.compile(r"^\s*receive\s*\(\s*(.*?)\s*\)\s*$")
_RECV_ITEM = re.compile(r"^([A-Za-z_]\w*)(?:\[\s*x\s*(?:\+\s*(\d+))?\s*\])?$")


def parse_action(text: str, n: int, label: str | None = None):
    m = _ASSIGN.match(text)
    if m:
        return Assign(m.group(1), parse_expr(m.group(2)), label)
    m = _SEND.match(text)
    if m:
        return Send(m.group(1), label)
    m = _RECEIVE.match(text)
    if m:
        items = [s.strip() for s in m.group(1).split(",") if s.strip()]
        parsed = [_RECV_ITEM.match(i) for i in items]
        if not items or not all(parsed):
            raise ModelError(f"malformed receive {text!r}")
        arrays = {p.group(1) for p in parsed}
        if len(arrays) != 1:
            raise ModelError(f"a receive covers exactly one array: {text!r}")
        if len(items) > 1 or (n > 1 and "[" in items[0]):
            offsets = sorted(int(p.group(2) or 0) % n for p in parsed)
            if offsets != sorted(i % n for i in range(1, n + 1)):
                raise ModelError(f"receive must list all {n} slots x+1..x+{n}: {text!r}")
        return Receive(arrays.pop(), label)
    raise ModelError(f"cannot parse action {text!r}")


def action_text(action) -> str:
    if isinstance(action, Assign):
        return f"{action.array}[x] <- {to_text(action.expr)}"
    if isinstance(action, Send):
        return f"send({action.array}[x])"
    return f"receive({action.array})"


def _value(v):
    return {"Correct": 0, "Erroneous": 1}.get(v, v) if isinstance(v, str) else v


def _domain(spec, default):
    if spec is None:
        return default
    if spec == "fault-abstraction":
        return FaultAbstraction()
    lo, hi = spec
    return BoundedInt(lo, hi)


# --------------------------------------------------------------------------- loading


def load_model(source: str | Path, text: str | None = None) -> Model:
    """Load a model from a path (or from ``text``); errors carry line numbers."""
    if text is None:
        text = Path(source).read_text()
    name = Path(str(source)).stem if source else "model"
    try:
        root = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ModelError(f"{source}: not valid YAML: {e}") from None
    if not isinstance(doc, dict):
        raise ModelError(f"{source}: a model is a mapping of sections")
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        where = list(e.absolute_path)
        if e.validator == "additionalProperties" and isinstance(e.instance, dict):
            # point at the first unexpected key rather than its parent mapping
            known = e.schema.get("properties", {})
            extra = [k for k in e.instance if k not in known]
            if extra:
                where.append(extra[0])
        path = "/".join(map(str, e.absolute_path)) or "(top level)"
        raise ModelError(f"{source}: {_where(root, where)}{path}: {_short(e)}")
    try:
        return _build(doc, name)
    except _Located as e:
        raise ModelError(f"{source}: {_where(root, e.path)}{e.message}") from None


def _short(e: jsonschema.ValidationError) -> str:
    if e.validator == "oneOf":
        return f"{e.instance!r} does not match any accepted form"
    return e.message


class _Located(Exception):
    def __init__(self, path, message):
        super().__init__(message)
        self.path = path
        self.message = message


def _at(path, fn, *args):
    try:
        return fn(*args)
    except ModelError as e:
        raise _Located(path, str(e)) from None


def _build(doc: Mapping, name: str) -> Model:
    n = doc["redundancy"]
    default = _domain(doc.get("domain"), FaultAbstraction())
    pat = doc["pattern"]
    arrays: dict[str, Any] = {}
    init: dict[str, Any] = {}
    for a, spec in (pat.get("arrays") or {}).items():
        spec = spec or {}
        arrays[a] = _at(["pattern", "arrays", a], _domain, spec.get("domain"), default)
        if "init" in spec:
            v = spec["init"]
            init[a] = tuple(_value(x) for x in v) if isinstance(v, list) else _value(v)
    actions = []
    for i, item in enumerate(pat["actions"]):
        where = ["pattern", "actions", i]
        if isinstance(item, str):
            actions.append(_at(where, parse_action, item, n))
        elif "action" in item:
            actions.append(_at(where, parse_action, item["action"], n, item.get("label")))
        else:
            exp = _at(where, expand_macro, item, n)
            actions.extend(exp.actions)
            for aux, dom in exp.arrays.items():
                arrays.setdefault(aux, dom)
    env_vars = tuple(pat.get("env") or {})
    env_init = {}
    env_update = {}
    for e, spec in (pat.get("env") or {}).items():
        spec = spec or {}
        env_init[e] = _value(spec.get("init", 0))
        if "update" in spec:
            env_update[e] = tuple(_at(["pattern", "env", e], parse_expr, str(u)) for u in spec["update"])
    tasks = {}
    for t, spec in (pat.get("tasks") or {}).items():
        outputs = {}
        for port, ospec in spec["outputs"].items():
            ospec = ospec or {}
            expr = _at(["pattern", "tasks", t], parse_expr, str(ospec["expr"])) if "expr" in ospec else None
            deps = tuple(ospec["depends"]) if "depends" in ospec else None
            if deps is not None and set(deps) - set(spec["inputs"]):
                raise _Located(["pattern", "tasks", t], f"task {t}: {port} depends on an undeclared input")
            outputs[port] = TaskOutput(expr, deps)
        tasks[t] = Task(t, tuple(spec["inputs"]), outputs)
    pattern = _at(["pattern"], Pattern, tuple(arrays), env_vars, tuple(actions))
    system = _at(["pattern"], GCASystem, pattern, n, doc.get("period", 1.0),
                 {a: d for a, d in arrays.items() if d != FaultAbstraction()}, init, env_init, env_update,
                 tasks, doc.get("flush_queues_at_jump", False))

    automaton = None
    faults_doc = doc.get("faults") or {}
    specs = []
    for i, f in enumerate(faults_doc.get("specs") or []):
        where = ["faults", "specs", i]
        pos = f["action"]
        if isinstance(pos, str):
            pos = _at(where, pattern.position, pos)
        psi = _at(where, parse_expr, str(f["psi"])) if "psi" in f else None
        spec = FaultSpec(f.get("name", f["act"]), f["act"], f["type"], pos, f["machine"], f.get("k"),
                         f.get("k_prime"), psi)
        _at(where, spec.validate, system)
        specs.append(spec)
    if "automaton" in faults_doc:
        a = faults_doc["automaton"]
        locs = tuple(a["locations"])
        automaton = _at(["faults", "automaton"], FaultAutomaton, locs, tuple(a.get("initial", locs[:1])),
                        {l: tuple(s["next"]) for l, s in a["locations"].items()},
                        {l: frozenset(s.get("acts", ())) for l, s in a["locations"].items()},
                        tuple(specs), faults_doc.get("ltbf"), system.period)
    elif specs:
        raise _Located(["faults"], "fault specs need an automaton that raises their acts")

    props = []
    for pname, p in (doc.get("properties") or {}).items():
        where = ["properties", pname]
        text = p if isinstance(p, str) else p["formula"]
        formula = _at(where, parse_formula, text, system)
        machine = p.get("machine") if isinstance(p, dict) else None
        if machine is None:
            machine = _at(where, check_admissible, formula, system)
        props.append(Property(pname, formula, machine, bool(order_atoms(formula))))

    schedule = None
    if "schedule" in doc:
        s = doc["schedule"]
        times = {}
        for m, rows in s["times"].items():
            if not str(m).isdigit():
                raise _Located(["schedule", "times"], f"schedule key {m!r} is not a machine number")
            for p, (start, end) in enumerate(rows, 1):
                times[(int(m), p)] = (start, end)
        schedule = TimedSchedule(times, s["tau_net"], system.period)

    da = (doc.get("deployment") or {}).get("deterministic_assumption", True)
    return Model(doc.get("name", name), system, automaton, tuple(props), schedule, da, default)


# --------------------------------------------------------------------------- dumping


def _domain_doc(d):
    return "fault-abstraction" if isinstance(d, FaultAbstraction) else [d.lo, d.hi]


def _value_doc(v):
    if v is ERR:
        raise ModelError("Err is not a storable initial value")
    return list(v) if isinstance(v, tuple) else v


def model_to_doc(model: Model) -> dict:
    s = model.system
    doc: dict[str, Any] = {"name": model.name, "redundancy": s.n, "period": s.period,
                           "domain": _domain_doc(model.default_domain)}
    if s.flush_queues_at_jump:
        doc["flush_queues_at_jump"] = True
    arrays = {}
    for a in s.pattern.arrays:
        spec = {}
        dom = s.domain(a)
        if dom != model.default_domain:
            spec["domain"] = _domain_doc(dom)
        if a in s.init:
            spec["init"] = _value_doc(s.init[a])
        arrays[a] = spec or None
    pattern: dict[str, Any] = {"arrays": arrays}
    if s.pattern.env_vars:
        env = {}
        for e in s.pattern.env_vars:
            spec = {"init": s.env_init.get(e, 0)}
            if e in s.env_update:
                spec["update"] = [to_text(u) for u in s.env_update[e]]
            env[e] = spec
        pattern["env"] = env
    if s.tasks:
        tasks = {}
        for t, task in s.tasks.items():
            outs = {}
            for port, o in task.outputs.items():
                spec = {}
                if o.expr is not None:
                    spec["expr"] = to_text(o.expr)
                if o.depends is not None:
                    spec["depends"] = list(o.depends)
                outs[port] = spec or None
            tasks[t] = {"inputs": list(task.inputs), "outputs": outs}
        pattern["tasks"] = tasks
    pattern["actions"] = [
        {"action": action_text(a), "label": a.label} if a.label else action_text(a) for a in s.pattern.actions
    ]
    doc["pattern"] = pattern
    if model.automaton is not None:
        au = model.automaton
        specs = []
        for f in au.faults:
            spec = {"name": f.name, "act": f.act, "type": f.type, "action": f.position, "machine": f.machine}
            if f.k is not None:
                spec["k"] = f.k
            if f.k2 is not None:
                spec["k_prime"] = f.k2
            if f.psi is not None:
                spec["psi"] = to_text(f.psi)
            specs.append(spec)
        faults: dict[str, Any] = {"specs": specs, "automaton": {
            "initial": list(au.initial),
            "locations": {l: {"acts": sorted(au.labels[l]), "next": list(au.edges.get(l, ()))} for l in au.locations},
        }}
        if au.ltbf is not None:
            faults["ltbf"] = au.ltbf
        doc["faults"] = faults
    if model.properties:
        doc["properties"] = {p.name: {"formula": p.text, "machine": p.machine} for p in model.properties}
    if model.schedule is not None:
        sch = model.schedule
        times = {}
        for (m, p), (a, b) in sorted(sch.times.items()):
            times.setdefault(str(m), []).append([_num(a), _num(b)])
        doc["schedule"] = {"tau_net": _num(sch.tau_net), "times": times}
    if not model.deterministic_assumption:
        doc["deployment"] = {"deterministic_assumption": False}
    return doc


def _num(x):
    f = float(x)
    return int(f) if f.is_integer() else f


def dump_model(model: Model) -> str:
    return yaml.safe_dump(model_to_doc(model), sort_keys=False, default_flow_style=None)
