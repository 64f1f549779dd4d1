"""Breadth-first GUI ripping with event tracing."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .appsim import AppDriver, DriverError, GuiState, UiAction, View, parse_action


class RipError(RuntimeError):
    pass


class GuiModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    src: str
    action: UiAction
    dst: str
    annotation: tuple[str, ...]


@dataclass(frozen=True)
class AugmentedGuiModel:
    nodes: dict[str, tuple[View, ...]]
    initial: str
    edges: tuple[Edge, ...]
    # canonical access path to each node
    log: dict[str, tuple[UiAction, ...]]

    def out_edges(self, node: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node]


def _navigate(driver: AppDriver, path: tuple[UiAction, ...], expected: str) -> GuiState:
    state, _, _ = driver.reset()
    for i, action in enumerate(path):
        try:
            if action not in driver.available_actions(state):
                raise RipError(f"replay step {i}: {action} no longer available (nondeterministic driver?)")
            state, _, _ = driver.perform(action)
        except DriverError as e:
            raise RipError(f"replay step {i} failed: {e}") from e
    if state.signature != expected:
        raise RipError(
            f"replay of {[str(a) for a in path]} reached {state.signature}, expected {expected} "
            "(nondeterministic driver?)"
        )
    return state


def rip(driver: AppDriver, alphabet: Iterable[str], budget: int) -> AugmentedGuiModel:
    """Explore every (state, action) pair once, breadth-first, within ``budget`` actions.

    Frontier states are reached by resetting and replaying their first-found
    access path.  Edge annotations keep only events in ``alphabet``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    alphabet = set(alphabet)
    state, _, _ = driver.reset()
    nodes = {state.signature: state.views}
    access: dict[str, tuple[UiAction, ...]] = {state.signature: ()}
    edges: list[Edge] = []
    queue = deque([state.signature])
    current = state
    spent = 0
    while queue and spent < budget:
        sig = queue.popleft()
        if current.signature != sig:
            current = _navigate(driver, access[sig], sig)
        for action in driver.available_actions(current):
            if spent >= budget:
                break
            if current.signature != sig:
                current = _navigate(driver, access[sig], sig)
            nxt, emitted, _ = driver.perform(action)
            spent += 1
            edges.append(Edge(sig, action, nxt.signature, tuple(e for e in emitted if e in alphabet)))
            if nxt.signature not in nodes:
                nodes[nxt.signature] = nxt.views
                access[nxt.signature] = access[sig] + (action,)
                queue.append(nxt.signature)
            current = nxt
    return AugmentedGuiModel(nodes, next(iter(access)), tuple(edges), access)


def export_gui_model(model: AugmentedGuiModel) -> str:
    doc = {
        "nodes": [
            {"signature": sig, "views": [{"id": v.id, "properties": dict(v.properties)} for v in views]}
            for sig, views in model.nodes.items()
        ],
        "initial": model.initial,
        "edges": [
            {"from": e.src, "action": e.action.encode(), "to": e.dst, "annotation": list(e.annotation)}
            for e in model.edges
        ],
        "log": {sig: [a.encode() for a in path] for sig, path in model.log.items()},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def import_gui_model(text: str) -> AugmentedGuiModel:
    try:
        doc = json.loads(text)
        nodes = {
            n["signature"]: tuple(View.make(v["id"], v["properties"]) for v in n["views"])
            for n in doc["nodes"]
        }
        edges = tuple(
            Edge(e["from"], parse_action(e["action"]), e["to"], tuple(e["annotation"])) for e in doc["edges"]
        )
        log = {sig: tuple(parse_action(a) for a in path) for sig, path in doc["log"].items()}
        initial = doc["initial"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise GuiModelFormatError(f"malformed GUI model: {e}") from None
    if initial not in nodes:
        raise GuiModelFormatError("initial node is not declared")
    for e in edges:
        if e.src not in nodes or e.dst not in nodes:
            raise GuiModelFormatError(f"edge {e.src} -> {e.dst} references an unknown node")
    return AugmentedGuiModel(nodes, initial, edges, log)
