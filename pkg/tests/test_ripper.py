import json

import networkx as nx
import pytest

from enftest.appsim import DriverError, SimDriver
from enftest.ripper import GuiModelFormatError, RipError, export_gui_model, import_gui_model, rip

from conftest import OPEN, PAUSE, RELEASE

ALPHABET = (OPEN, RELEASE, PAUSE)


def by_action(model):
    return {(model.log[e.src] + (e.action,)): e for e in model.edges}


def test_rip_compliant(compliant, compliant_spec):
    gui = rip(compliant, ALPHABET, 100)
    assert len(gui.nodes) == 4
    back = next(e for e in gui.edges if str(e.action) == "keyEvent(Back)")
    assert back.annotation == (RELEASE, PAUSE)
    assert gui.initial == compliant.reset()[0].signature


def test_rip_empty_alphabet(compliant):
    full = rip(compliant, ALPHABET, 100)
    bare = rip(compliant, (), 100)
    assert bare.nodes == full.nodes
    assert [(e.src, e.action, e.dst) for e in bare.edges] == [(e.src, e.action, e.dst) for e in full.edges]
    assert all(e.annotation == () for e in bare.edges)


def test_rip_budget_one(compliant):
    gui = rip(compliant, ALPHABET, 1)
    assert len(gui.nodes) == 2 and len(gui.edges) == 1


def test_rip_rejects_zero_budget(compliant):
    with pytest.raises(ValueError):
        rip(compliant, ALPHABET, 0)


def test_edge_soundness(leaky, leaky_spec):
    gui = rip(leaky, ALPHABET, 100)
    d = SimDriver(leaky_spec)
    for e in gui.edges:
        d.reset()
        for a in gui.log[e.src]:
            d.perform(a)
        nxt, emitted, _ = d.perform(e.action)
        assert nxt.signature == e.dst
        assert tuple(x for x in emitted if x in ALPHABET) == e.annotation


def test_completeness_isomorphic_to_spec(leaky_spec):
    gui = rip(SimDriver(leaky_spec), ALPHABET, 1000)
    ripped = nx.MultiDiGraph()
    for e in gui.edges:
        ripped.add_edge(e.src, e.dst, action=str(e.action))
    spec = nx.MultiDiGraph()
    for s, acts in leaky_spec.transitions.items():
        for a, o in acts.items():
            spec.add_edge(s, o.next, action=str(a))
    match = lambda x, y: sorted(d["action"] for d in x.values()) == sorted(d["action"] for d in y.values())
    assert nx.is_isomorphic(ripped, spec, edge_match=match)


def test_determinism(leaky):
    assert export_gui_model(rip(leaky, ALPHABET, 100)) == export_gui_model(rip(leaky, ALPHABET, 100))


def test_round_trip(compliant):
    gui = rip(compliant, ALPHABET, 100)
    assert import_gui_model(export_gui_model(gui)) == gui
    one = rip(compliant, ALPHABET, 1)
    assert import_gui_model(export_gui_model(one)) == one


def test_zero_edge_model_file():
    from enftest.appsim import load_app_spec
    spec = load_app_spec(json.dumps({"states": {"S": {"views": []}}, "initial": "S"}))
    gui = rip(SimDriver(spec), ALPHABET, 5)
    text = export_gui_model(gui)
    assert json.loads(text)["edges"] == []
    assert import_gui_model(text) == gui


def test_truncated_file(compliant):
    text = export_gui_model(rip(compliant, ALPHABET, 100))
    with pytest.raises(GuiModelFormatError):
        import_gui_model(text[: len(text) // 2])


class FlakyDriver(SimDriver):
    """Forgets the way to Main after the first visit."""

    visits = 0

    def perform(self, action):
        state, emitted, cost = super().perform(action)
        if self._current == "Main":
            FlakyDriver.visits += 1
            if FlakyDriver.visits > 1:
                raise DriverError("app crashed")
        return state, emitted, cost


def test_replay_failure_aborts(compliant_spec):
    with pytest.raises(RipError):
        rip(FlakyDriver(compliant_spec), ALPHABET, 100)
