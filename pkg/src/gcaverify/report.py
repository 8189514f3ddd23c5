"""Text and JSON renderings of verdicts, counterexamples and harness reports."""

from __future__ import annotations

import json
from typing import Any

from .checker import CrossReport, Verdict
from .core import GCASystem, SystemConfig
from .expr import ERR
from .mechanisms import FaultAbstraction
from .modelfile import Model, Property
from .traces import Trace, prune_counterexample


def fmt_value(system: GCASystem, array: str, v) -> str:
    if v is ERR:
        return "Err"
    if isinstance(system.domain(array), FaultAbstraction):
        return {0: "Correct", 1: "Erroneous"}.get(v, str(v))
    return str(v)


def changes(system: GCASystem, before: SystemConfig, after: SystemConfig, machine: int) -> list[str]:
    """Slot-level differences of one machine's variables."""
    a, b = before.machines[machine - 1], after.machines[machine - 1]
    out = []
    for name in system.array_names:
        i = system.array_index[name]
        for slot, (x, y) in enumerate(zip(a.values[i], b.values[i]), 1):
            if x != y:
                out.append(f"{name}[{slot}]: {fmt_value(system, name, x)} -> {fmt_value(system, name, y)}")
    return out


def narrative(model: Model, trace: Trace, machine: int) -> list[dict[str, Any]]:
    """Pruned counterexample as a list of steps grouped by period."""
    system = model.system
    pruned = prune_counterexample(trace, machine, cursor=False)
    rows = []
    period = 1
    first = pruned.fault_states[0] if pruned.fault_states else None
    if first is not None:
        rows.append({"period": 1, "event": "start", "location": first.location,
                     "acts": sorted(model.automaton.active(first)), "loop_entry": pruned.loop == 0})
    elif pruned.loop == 0:
        rows.append({"period": 1, "event": "start", "location": None, "acts": [], "loop_entry": True})
    for t, label in enumerate(pruned.labels, 1):
        row = {"period": period, "event": label.kind, "label": str(label),
               "changes": changes(system, pruned.states[t - 1], pruned.states[t], machine)}
        if pruned.loop is not None and t == pruned.loop:
            row["loop_entry"] = True
        rows.append(row)
        if label.kind == "jump":
            period += 1
    return rows


def _verdict_json(model: Model, prop: Property, v: Verdict) -> dict[str, Any]:
    out = {"property": prop.name, "formula": prop.text, "machine": prop.machine, "status": v.status,
           "states": v.nodes}
    if prop.outside_scope:
        out["note"] = "uses order comparisons, outside the preserved atom grammar"
    if v.counterexample is not None:
        tr = v.counterexample
        out["counterexample"] = {
            "length": len(tr) - 1,
            "lasso_loop": tr.loop,
            "periods": 1 + sum(1 for l in tr.labels if l.kind == "jump"),
            "steps": narrative(model, tr, prop.machine),
        }
    return out


def check_report(model: Model, results: list[tuple[Property, Verdict]], fmt: str = "text") -> str:
    if fmt == "json":
        doc = {"model": model.name, "properties": [_verdict_json(model, p, v) for p, v in results]}
        if not results:
            doc["warning"] = "model declares no properties"
        return json.dumps(doc, indent=2, sort_keys=True)
    lines = [f"model {model.name}"]
    if not results:
        lines.append("warning: model declares no properties")
    for prop, v in results:
        lines.append("")
        lines.append(f"property {prop.name} (machine {prop.machine}): {v.status.upper()}")
        lines.append(f"  {prop.text}")
        if prop.outside_scope:
            lines.append("  note: order comparisons lie outside the preserved atom grammar")
        lines.append(f"  states explored: {v.nodes}")
        if v.counterexample is None:
            continue
        tr = v.counterexample
        steps = narrative(model, tr, prop.machine)
        periods = 1 + sum(1 for l in tr.labels if l.kind == "jump")
        kind = "lasso" if tr.loop is not None else "path"
        lines.append(f"  counterexample ({kind}): {len(tr) - 1} steps over {periods} period(s), "
                     f"{len([s for s in steps if s['event'] != 'start'])} shown after pruning")
        current = None
        if steps and steps[0]["event"] != "start":
            lines.append("  period 1")
            current = 1
        for s in steps:
            if s["event"] == "start":
                head = "  period 1"
                if s["location"] is not None:
                    head += f", fault location {s['location']} [{','.join(s['acts']) or '-'}]"
                lines.append(head + ("  (loop starts here)" if s.get("loop_entry") else ""))
                current = 1
                continue
            if s["period"] != current and s["event"] != "jump":
                lines.append(f"  period {s['period']}")
                current = s["period"]
            marker = "  (loop starts here)" if s.get("loop_entry") else ""
            if s["event"] == "jump":
                lines.append(f"    {s['label']}{marker}")
                current = s["period"] + 1
                lines.append(f"  period {current}")
                continue
            detail = "; ".join(s["changes"]) or "no change"
            lines.append(f"    {s['label']}: {detail}{marker}")
        if tr.loop is not None:
            lines.append("  ... and the run repeats from the step marked (loop starts here)")
    return "\n".join(lines)


def cross_report(model: Model, reports: list[tuple[str, CrossReport]], fmt: str = "text") -> str:
    if fmt == "json":
        rows = []
        for name, r in reports:
            rows.append({"property": name, "machine": r.machine, "periods": r.periods,
                         "interleavings_per_period": r.interleavings_per_period,
                         "choice_paths": r.choice_paths, "traces": r.traces, "compared": r.compared,
                         "skipped": r.skipped, "stutter_divergences": r.stutter_divergences,
                         "verdict_divergences": r.verdict_divergences,
                         "lockstep_verdicts": {str(k): v for k, v in sorted(r.sync_verdicts.items())},
                         "details": r.details})
        return json.dumps({"model": model.name, "deterministic_assumption": model.deterministic_assumption,
                           "results": rows}, indent=2, sort_keys=True)
    lines = [f"model {model.name}"]
    if not model.deterministic_assumption:
        lines.append("deployment does not respect the deterministic assumption: every interleaving admitted")
    if reports:
        r0 = reports[0][1]
        lines.append(f"{r0.periods} period(s), {r0.interleavings_per_period} interleavings per period, "
                     f"{r0.choice_paths} choice path(s)")
    header = f"{'property':<28} {'m':>2} {'traces':>14} {'skipped':>10} {'stutter-div':>12} {'verdict-div':>12}  lockstep"
    lines.append(header)
    for name, r in reports:
        verdicts = ",".join(f"{k}:{v}" for k, v in sorted(r.sync_verdicts.items())) or "-"
        lines.append(f"{name:<28} {r.machine:>2} {r.traces:>14} {r.skipped:>10} "
                     f"{r.stutter_divergences:>12} {r.verdict_divergences:>12}  {verdicts}")
    total = sum(r.divergences for _, r in reports)
    traces = max((r.traces for _, r in reports), default=0)
    lines.append(f"{traces} interleaved traces, {total} divergences")
    for name, r in reports:
        for d in r.details:
            lines.append(f"  {name}: {d}")
    return "\n".join(lines)


def trace_dump(model: Model, trace: Trace, fmt: str = "text") -> str:
    system = model.system
    if fmt == "json":
        steps = []
        for t, label in enumerate(trace.labels, 1):
            steps.append({"label": str(label), "changes": {
                f"m{m}": changes(system, trace.states[t - 1], trace.states[t], m) for m in range(1, system.n + 1)}})
        return json.dumps({"model": model.name, "steps": steps}, indent=2, sort_keys=True)
    lines = [f"model {model.name}: {len(trace) - 1} steps"]
    if trace.fault_states and trace.fault_states[0] is not None:
        lines.append(f"fault location {trace.fault_states[0].location}")
    for t, label in enumerate(trace.labels, 1):
        parts = []
        for m in range(1, system.n + 1):
            diff = changes(system, trace.states[t - 1], trace.states[t], m)
            if diff:
                parts.append(f"m{m}: " + ", ".join(diff))
        lines.append(f"{t:>4} {label}" + (f"  | {' | '.join(parts)}" if parts else ""))
    return "\n".join(lines)
