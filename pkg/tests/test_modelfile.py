import textwrap

import pytest

from gcaverify import bundled_model
from gcaverify.checker import build_product, check_ltl
from gcaverify.expr import ModelError
from gcaverify.modelfile import dump_model, load_model, model_to_doc, parse_action

NAMES = ["balanced_rod_faulty", "balanced_rod_fixed", "neighbor_sum", "neighbor_sum_no_da", "neighbor_window",
         "neighbor_window_late", "liveness_failsilent", "single_counter"]

BASE = """\
name: tiny
redundancy: 2
period: 1
domain: [0, 3]
pattern:
  arrays:
    a:
  actions:
    - "a[x] <- a[x] + 1"
    - "send(a[x])"
    - "receive(a[x+1], a[x+2])"
properties:
  small: "G(a != Err)"
"""


@pytest.mark.parametrize("name", NAMES)
def test_bundled_models_round_trip(name):
    model = load_model(bundled_model(name))
    again = load_model("round-trip", dump_model(model))
    assert model_to_doc(again) == model_to_doc(model)
    assert again.system == model.system
    assert [p.formula for p in again.properties] == [p.formula for p in model.properties]


def test_round_trip_preserves_verdicts():
    model = load_model(bundled_model("balanced_rod_faulty"))
    again = load_model("round-trip", dump_model(model))
    for m in (model, again):
        graph = build_product(m.system, m.automaton)
        assert [check_ltl(graph, p.formula, p.machine).status for p in m.properties] == ["violated"]


def test_minimal_model_loads():
    model = load_model("tiny", BASE)
    assert model.system.n == 2 and model.system.k == 3
    assert model.property("small").machine == 1


def _error(text):
    with pytest.raises(ModelError) as e:
        load_model("bad", text)
    return str(e.value)


def test_unknown_key_reports_line():
    msg = _error(BASE.replace("period: 1", "period: 1\nperoid: 2"))
    assert "line 4" in msg and "peroid" in msg


def test_bad_action_reports_line():
    msg = _error(BASE.replace('"send(a[x])"', '"sned(a[x])"'))
    assert "line 10" in msg and "sned" in msg


def test_unknown_identifier_in_property_reports_line():
    msg = _error(BASE.replace("G(a != Err)", "G(zz != Err)"))
    assert "line 13" in msg and "zz" in msg


def test_wrong_type_reports_line():
    assert "line 2" in _error(BASE.replace("redundancy: 2", "redundancy: two"))


def test_invalid_yaml():
    assert "not valid YAML" in _error("name: [unclosed\n")


def test_receive_must_cover_all_slots():
    with pytest.raises(ModelError):
        parse_action("receive(a[x+1])", 2)
    assert parse_action("receive(a[x+1], a[x+2])", 2) == parse_action("receive(a)", 2)
