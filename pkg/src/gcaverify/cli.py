"""Command-line entry points: check, crossvalidate, dacheck and simulate.

Exit codes: 0 when everything holds, 1 when a violation (or divergence) is
found, 2 on usage or model errors and when an enumeration cap is exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Sequence

import yaml

from .checker import EnumerationCap, build_product, check_ltl, cross_validate_theorem1
from .expr import ModelError
from .modelfile import Model, load_model
from .report import check_report, cross_report, trace_dump
from .schedules import Infeasible, check_da_timed, simulate, synthesize_window_schedule

OK, VIOLATION, ERROR = 0, 1, 2


def _selected(model: Model, names: Sequence[str] | None):
    if not names:
        return list(model.properties)
    return [model.property(n) for n in names]


def cmd_check(args) -> int:
    model = load_model(args.model)
    props = _selected(model, args.property)
    graph = build_product(model.system, model.automaton, args.bound, args.workers)
    results = [(p, check_ltl(graph, p.formula, p.machine)) for p in props]
    print(check_report(model, results, args.format))
    if not results:
        print("warning: model declares no properties", file=sys.stderr)
    return OK if all(v.holds for _, v in results) else VIOLATION


def cmd_crossvalidate(args) -> int:
    model = load_model(args.model)
    props = _selected(model, args.property)
    targets = [(p.name, p.formula, p.machine) for p in props] or [("(stutter only)", None, 1)]
    reports = []
    try:
        for name, formula, machine in targets:
            r = cross_validate_theorem1(model.system, formula, args.periods, model.automaton, machine,
                                        args.cap, respect_da=model.deterministic_assumption)
            reports.append((name, r))
    except EnumerationCap as e:
        print(f"enumeration cap exceeded: {e}", file=sys.stderr)
        return ERROR
    print(cross_report(model, reports, args.format))
    return OK if all(r.ok for _, r in reports) else VIOLATION


def _schedule_doc(schedule) -> dict:
    def num(x):
        x = Fraction(x)
        return int(x) if x.denominator == 1 else float(x)

    times = {}
    for (m, p), (s, e) in sorted(schedule.times.items()):
        times.setdefault(str(m), []).append([num(s), num(e)])
    return {"schedule": {"tau_net": num(schedule.tau_net), "times": times}}


def cmd_dacheck(args) -> int:
    model = load_model(args.model)
    pattern = model.system.pattern
    schedule = model.schedule
    out: dict = {"model": model.name}
    if args.synthesize_window:
        tau = args.tau_net if args.tau_net is not None else (schedule.tau_net if schedule else None)
        if tau is None:
            raise ModelError("--synthesize-window needs --tau-net or a schedule section")
        try:
            schedule = synthesize_window_schedule(pattern, tau, model.system.period, model.system.n)
        except Infeasible as e:
            print(f"no window schedule: {e}", file=sys.stderr)
            return VIOLATION
        out["synthesized"] = _schedule_doc(schedule)["schedule"]
    elif schedule is None:
        raise ModelError(f"{args.model}: model has no schedule section")
    violations = check_da_timed(schedule, pattern)
    if args.format == "json":
        out["violations"] = [{"kind": v.kind, "send": v.send, "receive": v.receive, "sender": v.sender,
                              "receiver": v.receiver, "slack": str(v.slack)} for v in violations]
        out["satisfied"] = not violations
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        if args.synthesize_window:
            print("# synthesized window schedule")
            print(yaml.safe_dump(_schedule_doc(schedule), sort_keys=True, default_flow_style=None).rstrip())
        for v in violations:
            print(v)
        if not violations:
            print("deterministic assumption satisfied")
        else:
            print(f"{len(violations)} violation(s)")
    return VIOLATION if violations else OK


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    trace = simulate(model.system, args.periods, args.seed, "async" if args.async_ else "sync",
                     model.automaton)
    print(trace_dump(model, trace, args.format))
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcaverify", description="Verify redundant periodic systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("model", help="model file")
        p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("check", help="model-check the properties of a model")
    common(p)
    p.add_argument("--property", action="append", help="only this property (repeatable)")
    p.add_argument("--bound", type=int, default=None, help="explore at most this depth")
    p.add_argument("--workers", type=int, default=1, help="threads used to expand the state graph")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("crossvalidate", help="compare every admitted interleaving with the lockstep run")
    common(p)
    p.add_argument("--property", action="append")
    p.add_argument("--periods", type=int, default=2)
    p.add_argument("--cap", type=int, default=10**15, help="maximum interleaved traces per choice path")
    p.set_defaults(func=cmd_crossvalidate)

    p = sub.add_parser("dacheck", help="check a timed schedule against the deterministic assumption")
    common(p)
    p.add_argument("--synthesize-window", action="store_true", help="build and check a window schedule")
    p.add_argument("--tau-net", type=Fraction, default=None, help="network delay bound for synthesis")
    p.set_defaults(func=cmd_dacheck)

    p = sub.add_parser("simulate", help="print one random run")
    common(p)
    p.add_argument("--periods", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--async", dest="async_", action="store_true", help="sample an interleaving")
    mode.add_argument("--sync", dest="async_", action="store_false", help="lockstep run (default)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "periods", 1) < 1:
        parser.error("--periods must be at least 1")
    try:
        return args.func(args)
    except (ModelError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
