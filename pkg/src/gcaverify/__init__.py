"""Verification of redundant, globally synchronised periodic systems.

Replicated machines run a fixed action sequence each period and exchange
values by message.  The package checks temporal properties on the lockstep
model, cross-validates it against every admitted interleaving, injects
faults through a fault automaton and checks timed schedules.
"""

from importlib.resources import files
from pathlib import Path

from .checker import (
    CrossReport,
    EnumerationCap,
    StateGraph,
    Verdict,
    build_product,
    check_invariant,
    check_ltl,
    check_property,
    cross_validate_theorem1,
)
from .core import Assign, GCASystem, Pattern, Receive, Send, SystemConfig, exec_action, global_jump
from .expr import ERR, ModelError, parse_expr
from .faults import FaultAutomaton, FaultRun, FaultSpec, FaultState, apply_fault, ltbf_budget
from .logic import check_admissible, eval_formula, parse_formula
from .modelfile import Model, dump_model, load_model
from .schedules import (
    TimedSchedule,
    check_da_timed,
    enumerate_da_traces,
    run_sync,
    satisfies_da,
    simulate,
    synthesize_window_schedule,
)
from .traces import Trace, destutter, project, prune_counterexample, stutter_equiv


def bundled_model(name: str) -> Path:
    """Path of a model shipped with the package, e.g. ``"balanced_rod_faulty"``."""
    path = Path(str(files(__package__) / "models" / f"{name}.model"))
    if not path.exists():
        raise ModelError(f"no bundled model named {name!r}")
    return path


__all__ = [name for name in dir() if not name.startswith("_") and name not in ("files", "Path")]
__version__ = "0.1.0"
