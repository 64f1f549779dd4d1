"""Driver contract and a deterministic app simulator.

Ripping and test execution talk to an app only through :class:`AppDriver`.
:class:`SimDriver` implements it from a JSON app spec that declares
GUI states (as view sets), UI-action transitions, the req events each
transition emits and the resources it costs.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .model import UsageError

DEFAULT_TEXT = "hello"
ACTION_KINDS = ("touch", "longTouch", "setText", "keyEvent", "scroll")
SCROLL_DIRECTIONS = ("up", "down", "left", "right")

PropValue = str | bool | int


class AppSpecError(ValueError):
    pass


class DriverError(RuntimeError):
    pass


@dataclass(frozen=True)
class View:
    id: str
    properties: tuple[tuple[str, PropValue], ...] = ()

    @classmethod
    def make(cls, id: str, properties: dict[str, PropValue] | None = None) -> "View":
        return cls(id, tuple(sorted((properties or {}).items())))

    def get(self, key: str, default=None):
        return dict(self.properties).get(key, default)


def state_signature(views: Iterable[View], ignore: Iterable[str] = ()) -> str:
    ignore = set(ignore)
    triples = sorted(
        (v.id, k, json.dumps(val)) for v in views for k, val in v.properties if k not in ignore
    )
    ids = sorted(v.id for v in views)
    payload = json.dumps([ids, triples], separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class GuiState:
    views: tuple[View, ...]
    signature: str

    @classmethod
    def of(cls, views: Iterable[View], ignore: Iterable[str] = ()) -> "GuiState":
        views = tuple(sorted(views, key=lambda v: v.id))
        return cls(views, state_signature(views, ignore))


@dataclass(frozen=True)
class UiAction:
    kind: str
    target: str | None = None
    text: str | None = None
    key: str | None = None
    direction: str | None = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind in ("touch", "longTouch", "setText") and not self.target:
            raise ValueError(f"{self.kind} needs a target view")
        if self.kind == "keyEvent" and not self.key:
            raise ValueError("keyEvent needs a key")
        if self.kind == "scroll" and self.direction not in SCROLL_DIRECTIONS:
            raise ValueError(f"scroll direction must be one of {SCROLL_DIRECTIONS}")

    def encode(self) -> str:
        if self.kind in ("touch", "longTouch"):
            return f"{self.kind}({self.target})"
        if self.kind == "setText":
            return f"setText({self.target},{json.dumps(self.text or '')})"
        if self.kind == "keyEvent":
            return f"keyEvent({self.key})"
        return f"scroll({self.direction})"

    def __str__(self) -> str:
        return self.encode()


_ACTION_RE = re.compile(r"^(\w+)\((.*)\)$")


def parse_action(text: str) -> UiAction:
    m = _ACTION_RE.match(text.strip())
    if not m:
        raise ValueError(f"malformed action {text!r}")
    kind, arg = m.groups()
    if kind in ("touch", "longTouch"):
        return UiAction(kind, target=arg)
    if kind == "setText":
        target, _, txt = arg.partition(",")
        return UiAction(kind, target=target, text=json.loads(txt) if txt else DEFAULT_TEXT)
    if kind == "keyEvent":
        return UiAction(kind, key=arg)
    if kind == "scroll":
        return UiAction(kind, direction=arg)
    raise ValueError(f"unknown action kind {kind!r}")


def action_from_dict(d: dict) -> UiAction:
    kind = d.get("kind")
    if kind == "setText":
        return UiAction(kind, target=d.get("target"), text=d.get("text", DEFAULT_TEXT))
    return UiAction(kind, target=d.get("target"), key=d.get("key"), direction=d.get("direction"))


@dataclass(frozen=True)
class CostVector:
    cpu_ms: float = 0.0
    alloc_kb: float = 0.0
    free_kb: float = 0.0
    energy_units: float = 0.0

    def __post_init__(self):
        for name in ("cpu_ms", "alloc_kb", "free_kb", "energy_units"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise AppSpecError(f"cost {name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class Outcome:
    next: str
    emits: tuple[str, ...]
    cost: CostVector


@dataclass(frozen=True)
class AppSpec:
    name: str
    launch_time_ms: float
    launch_cost: CostVector
    states: dict[str, tuple[View, ...]]
    initial: str
    events: tuple[str, ...]
    # per state, actions in declaration order
    transitions: dict[str, dict[UiAction, Outcome]] = field(default_factory=dict)

    @property
    def launch_alloc_kb(self) -> float:
        return self.launch_cost.alloc_kb


def load_app_spec(text: str) -> AppSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise AppSpecError(f"syntax error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        return _build_spec(raw)
    except (KeyError, TypeError) as e:
        raise AppSpecError(f"malformed app spec: {e!r}") from None
    except ValueError as e:
        if isinstance(e, AppSpecError):
            raise
        raise AppSpecError(str(e)) from None


def _build_spec(raw: dict) -> AppSpec:
    states = {
        name: tuple(View.make(v["id"], v.get("properties", {})) for v in body.get("views", []))
        for name, body in raw["states"].items()
    }
    for name, views in states.items():
        ids = [v.id for v in views]
        if len(set(ids)) != len(ids):
            raise AppSpecError(f"duplicate view id in state {name!r}")
    sigs: dict[str, str] = {}
    for name, views in states.items():
        sig = state_signature(views)
        if sig in sigs:
            raise AppSpecError(f"states {sigs[sig]!r} and {name!r} have identical views")
        sigs[sig] = name
    initial = raw["initial"]
    if initial not in states:
        raise AppSpecError(f"initial state {initial!r} is not declared")
    events = tuple(raw.get("events", []))
    launch = raw.get("launch", {})
    launch_cost = CostVector(**{k: launch.get(k, 0) for k in ("cpu_ms", "alloc_kb", "free_kb", "energy_units")})
    launch_time = launch.get("time_ms", 0)
    if launch_time < 0:
        raise AppSpecError("launch time must be >= 0")

    table: dict[str, dict[UiAction, Outcome]] = {s: {} for s in states}
    for t in raw.get("transitions", []):
        src, dst = t["from"], t["to"]
        for s in (src, dst):
            if s not in states:
                raise AppSpecError(f"transition references unknown state {s!r}")
        action = action_from_dict(t["action"])
        _check_target(action, states[src], src)
        if action in table[src]:
            raise AppSpecError(f"nondeterministic: {action} declared twice in {src!r}")
        emits = tuple(t.get("emits", []))
        for e in emits:
            if e not in events:
                raise AppSpecError(f"event {e!r} is not in the declared event universe")
        table[src][action] = Outcome(dst, emits, CostVector(**t.get("cost", {})))

    spec = AppSpec(
        name=raw.get("name", "app"),
        launch_time_ms=launch_time,
        launch_cost=launch_cost,
        states=states,
        initial=initial,
        events=events,
        transitions=table,
    )
    _check_memory_balance(spec)
    return spec


def _check_target(action: UiAction, views: tuple[View, ...], state: str) -> None:
    if action.target is None:
        return
    view = next((v for v in views if v.id == action.target), None)
    if view is None:
        raise AppSpecError(f"{action} targets unknown view {action.target!r} in {state!r}")
    flag = "editable" if action.kind == "setText" else "clickable"
    if view.get(flag) is not True:
        raise AppSpecError(f"{action} targets view {action.target!r} that is not {flag} in {state!r}")


def _check_memory_balance(spec: AppSpec) -> None:
    """Reject specs where some run frees more than it has allocated.

    Longest-path relaxation of the cumulative deficit (free - alloc) over the
    reachable graph; a reachable cycle with positive net deficit is unbounded.
    """
    start = spec.launch_cost.free_kb - spec.launch_cost.alloc_kb
    if start > 0:
        raise AppSpecError("launch frees more memory than it allocates")
    deficit = {spec.initial: start}
    edges = [
        (s, o.next, o.cost.free_kb - o.cost.alloc_kb)
        for s, acts in spec.transitions.items()
        for o in acts.values()
    ]
    for _ in range(len(spec.states) + 1):
        changed = False
        for s, d, w in edges:
            if s in deficit and deficit[s] + w > deficit.get(d, -math.inf):
                deficit[d] = deficit[s] + w
                changed = True
                if deficit[d] > 0:
                    raise AppSpecError(f"cumulative free exceeds allocation on reaching {d!r}")
        if not changed:
            return
    raise AppSpecError("a reachable cycle frees more memory than it allocates")


class AppDriver(Protocol):
    """What ripping and execution may assume about an app backend."""

    def reset(self) -> tuple[GuiState, float, CostVector]: ...

    def available_actions(self, state: GuiState) -> list[UiAction]: ...

    def perform(self, action: UiAction) -> tuple[GuiState, tuple[str, ...], CostVector]: ...


class SimDriver:
    """Deterministic in-process backend driven by an :class:`AppSpec`."""

    def __init__(self, spec: AppSpec, ignore_keys: Iterable[str] = ()):
        self.spec = spec
        self.ignore_keys = tuple(ignore_keys)
        self._gui = {s: GuiState.of(v, self.ignore_keys) for s, v in spec.states.items()}
        self._current: str | None = None

    @property
    def current(self) -> GuiState:
        if self._current is None:
            raise DriverError("driver has not been reset")
        return self._gui[self._current]

    def reset(self) -> tuple[GuiState, float, CostVector]:
        self._current = self.spec.initial
        return self.current, self.spec.launch_time_ms, self.spec.launch_cost

    def available_actions(self, state: GuiState) -> list[UiAction]:
        if state.signature != self.current.signature:
            raise UsageError("stale state: not the driver's current state")
        return list(self.spec.transitions[self._current])

    def perform(self, action: UiAction) -> tuple[GuiState, tuple[str, ...], CostVector]:
        outcome = self.spec.transitions[self._require_current()].get(action)
        if outcome is None:
            raise DriverError(f"{action} is not available in state {self._current!r}")
        self._current = outcome.next
        return self.current, outcome.emits, outcome.cost

    def _require_current(self) -> str:
        if self._current is None:
            raise DriverError("driver has not been reset")
        return self._current
