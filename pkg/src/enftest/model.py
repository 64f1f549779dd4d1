"""Enforcement models and policy monitors.

An enforcement model is a deterministic, possibly partial input/output
automaton: each transition consumes one intercepted event and emits an
ordered (possibly empty) list of events.  A policy monitor is a total
automaton over the same kind of alphabet with a set of absorbing
violating states, evaluated over finite traces.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence


class ModelError(ValueError):
    """Raised for malformed or invalid model/monitor files."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class UsageError(ValueError):
    """Raised when an operation is called outside its contract."""


class UndefinedTransition(RuntimeError):
    def __init__(self, index: int, state: str, event: str):
        self.index = index
        self.state = state
        self.event = event
        super().__init__(f"no transition for {event!r} from state {state!r} (input index {index})")


class EventKind(str, Enum):
    REQ = "req"
    API = "api"


@dataclass(frozen=True)
class Event:
    name: str
    kind: EventKind = EventKind.REQ

    def __post_init__(self):
        if not self.name:
            raise ValueError("event name must be non-empty")


@dataclass(frozen=True)
class EnforcementModel:
    states: tuple[str, ...]
    initial: str
    alphabet: tuple[str, ...]
    # (state, input) -> (outputs, next)
    transitions: Mapping[tuple[str, str], tuple[tuple[str, ...], str]] = field(hash=False)

    def __post_init__(self):
        _validate_model(self)

    def order(self, event: str) -> int:
        return self._index[event]

    @property
    def _index(self) -> dict[str, int]:
        idx = self.__dict__.get("_alpha_index")
        if idx is None:
            idx = {e: i for i, e in enumerate(self.alphabet)}
            object.__setattr__(self, "_alpha_index", idx)
        return idx

    def defined_inputs(self, state: str) -> list[str]:
        """Inputs with a transition from ``state``, in alphabet order."""
        return [a for a in self.alphabet if (state, a) in self.transitions]

    def sort_key(self, seq: Sequence[str]) -> tuple:
        """Total order on input sequences: shorter first, then alphabet order."""
        return (len(seq), tuple(self._index[e] for e in seq))


@dataclass(frozen=True)
class PolicyMonitor:
    states: tuple[str, ...]
    initial: str
    alphabet: tuple[str, ...]
    step: Mapping[tuple[str, str], str] = field(hash=False)
    violating: frozenset[str] = frozenset()

    def __post_init__(self):
        _validate_monitor(self)


@dataclass(frozen=True)
class TraceRun:
    outputs: tuple[str, ...]
    final: str
    divergence: int | None = None


@dataclass(frozen=True)
class Satisfied:
    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Violated:
    at: int

    def __bool__(self) -> bool:
        return False


def _validate_model(m: EnforcementModel) -> None:
    states = set(m.states)
    alpha = set(m.alphabet)
    if len(states) != len(m.states):
        raise ModelError("duplicate state names")
    if len(alpha) != len(m.alphabet):
        raise ModelError("duplicate alphabet entries")
    if m.initial not in states:
        raise ModelError(f"initial state {m.initial!r} is not declared")
    for (src, inp), (outs, dst) in m.transitions.items():
        if src not in states:
            raise ModelError(f"unknown state {src!r}")
        if dst not in states:
            raise ModelError(f"unknown state {dst!r}")
        if inp not in alpha:
            raise ModelError(f"unknown event {inp!r}")
        for o in outs:
            if o not in alpha:
                raise ModelError(f"unknown output event {o!r}")
    unreachable = states - _reachable(m.initial, ((s, d) for (s, _), (_, d) in m.transitions.items()))
    if unreachable:
        raise ModelError(f"unreachable states: {', '.join(sorted(unreachable))}")


def _validate_monitor(p: PolicyMonitor) -> None:
    states = set(p.states)
    if p.initial not in states:
        raise ModelError(f"initial state {p.initial!r} is not declared")
    if not p.violating <= states:
        raise ModelError(f"unknown violating states: {sorted(p.violating - states)}")
    for s in p.states:
        for a in p.alphabet:
            if (s, a) not in p.step:
                raise ModelError(f"monitor step is not total: missing ({s}, {a})")
    for (s, a), d in p.step.items():
        if s not in states or d not in states:
            raise ModelError(f"unknown state in monitor transition ({s}, {a})")
        if a not in p.alphabet:
            raise ModelError(f"unknown event {a!r}")
        if s in p.violating and d not in p.violating:
            raise ModelError(f"violating state {s!r} is not a trap (leaves on {a!r})")


def _reachable(initial: str, edges: Iterable[tuple[str, str]]) -> set[str]:
    adj: dict[str, list[str]] = {}
    for s, d in edges:
        adj.setdefault(s, []).append(d)
    seen = {initial}
    todo = deque([initial])
    while todo:
        for d in adj.get(todo.popleft(), ()):
            if d not in seen:
                seen.add(d)
                todo.append(d)
    return seen


# ---------------------------------------------------------------------------
# Text format

_TRANS_RE = re.compile(r"^(?P<src>\S+)\s+--(?P<inp>\S+?)-->\s+(?P<dst>\S+)(?P<rest>.*)$")
_HEADER_KEYS = ("alphabet", "states", "initial", "violating")


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _parse_lines(text: str, monitor: bool):
    headers: dict[str, list[str]] = {}
    transitions: list[tuple[int, str, str, str, list[str] | None]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col = len(line) - len(line.lstrip()) + 1
        key, sep, value = stripped.partition(":")
        if sep and key.strip() in _HEADER_KEYS and "-->" not in stripped:
            key = key.strip()
            if key in headers:
                raise ModelError(f"duplicate '{key}:' header", lineno, col)
            if key == "violating" and not monitor:
                raise ModelError("'violating:' is only allowed in policy monitors", lineno, col)
            headers[key] = _split_list(value)
            continue
        m = _TRANS_RE.match(stripped)
        if not m:
            raise ModelError(f"cannot parse {stripped!r}", lineno, col)
        rest = m.group("rest").strip()
        outs: list[str] | None
        if rest.startswith("/"):
            if monitor:
                raise ModelError("policy monitor transitions carry no outputs", lineno, col + stripped.index("/"))
            outs = _split_list(rest[1:])
        elif rest:
            raise ModelError(f"unexpected trailing text {rest!r}", lineno, col + stripped.index(rest))
        else:
            if not monitor:
                raise ModelError("missing '/ outputs' on transition", lineno, col + len(stripped))
            outs = None
        transitions.append((lineno, m.group("src"), m.group("inp"), m.group("dst"), outs))
    for key in ("alphabet", "states", "initial"):
        if key not in headers:
            raise ModelError(f"missing '{key}:' header")
    if len(headers["initial"]) != 1:
        raise ModelError("'initial:' must name exactly one state")
    return headers, transitions


def parse_model(text: str) -> EnforcementModel:
    headers, rows = _parse_lines(text, monitor=False)
    states = set(headers["states"])
    alphabet = set(headers["alphabet"])
    table: dict[tuple[str, str], tuple[tuple[str, ...], str]] = {}
    for lineno, src, inp, dst, outs in rows:
        for s in (src, dst):
            if s not in states:
                raise ModelError(f"unknown state {s!r}", lineno)
        for e in [inp, *(outs or ())]:
            if e not in alphabet:
                raise ModelError(f"unknown event {e!r}", lineno)
        if (src, inp) in table:
            raise ModelError(f"nondeterministic: second transition on ({src}, {inp})", lineno)
        table[(src, inp)] = (tuple(outs or ()), dst)
    return EnforcementModel(
        states=tuple(headers["states"]),
        initial=headers["initial"][0],
        alphabet=tuple(headers["alphabet"]),
        transitions=table,
    )


def parse_monitor(text: str) -> PolicyMonitor:
    headers, rows = _parse_lines(text, monitor=True)
    states = set(headers["states"])
    alphabet = set(headers["alphabet"])
    table: dict[tuple[str, str], str] = {}
    for lineno, src, inp, dst, _ in rows:
        for s in (src, dst):
            if s not in states:
                raise ModelError(f"unknown state {s!r}", lineno)
        if inp not in alphabet:
            raise ModelError(f"unknown event {inp!r}", lineno)
        if (src, inp) in table:
            raise ModelError(f"nondeterministic: second transition on ({src}, {inp})", lineno)
        table[(src, inp)] = dst
    return PolicyMonitor(
        states=tuple(headers["states"]),
        initial=headers["initial"][0],
        alphabet=tuple(headers["alphabet"]),
        step=table,
        violating=frozenset(headers.get("violating", ())),
    )


def serialize_model(m: EnforcementModel) -> str:
    lines = [
        f"alphabet: {', '.join(m.alphabet)}",
        f"states: {', '.join(m.states)}",
        f"initial: {m.initial}",
    ]
    for s in m.states:
        for a in m.defined_inputs(s):
            outs, d = m.transitions[(s, a)]
            tail = (" " + ", ".join(outs)) if outs else ""
            lines.append(f"{s} --{a}--> {d} /{tail}")
    return "\n".join(lines) + "\n"


def serialize_monitor(p: PolicyMonitor) -> str:
    lines = [
        f"alphabet: {', '.join(p.alphabet)}",
        f"states: {', '.join(p.states)}",
        f"initial: {p.initial}",
        f"violating: {', '.join(s for s in p.states if s in p.violating)}",
    ]
    for s in p.states:
        for a in p.alphabet:
            lines.append(f"{s} --{a}--> {p.step[(s, a)]}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Semantics

def step(model: EnforcementModel, state: str, event: str) -> tuple[tuple[str, ...], str] | None:
    if state not in model.states:
        raise UsageError(f"unknown state {state!r}")
    if event not in model._index:
        raise UsageError(f"{event!r} is not in the model alphabet")
    return model.transitions.get((state, event))


def run_from(model: EnforcementModel, state: str, inputs: Sequence[str]) -> TraceRun:
    """Fold ``step`` over ``inputs`` starting at ``state``."""
    outputs: list[str] = []
    divergence = None
    for i, e in enumerate(inputs):
        res = step(model, state, e)
        if res is None:
            raise UndefinedTransition(i, state, e)
        outs, state = res
        if divergence is None and outs != (e,):
            divergence = i
        outputs.extend(outs)
    return TraceRun(tuple(outputs), state, divergence)


def run_trace(model: EnforcementModel, inputs: Sequence[str]) -> TraceRun:
    return run_from(model, model.initial, inputs)


def is_defined(model: EnforcementModel, state: str, inputs: Sequence[str]) -> bool:
    for e in inputs:
        res = model.transitions.get((state, e))
        if res is None:
            return False
        state = res[1]
    return True


def check_policy(monitor: PolicyMonitor, trace: Sequence[str]) -> Satisfied | Violated:
    state = monitor.initial
    alphabet = set(monitor.alphabet)
    for i, e in enumerate(trace):
        if e not in alphabet:
            raise UsageError(f"{e!r} is not in the monitor alphabet")
        nxt = monitor.step[(state, e)]
        if nxt in monitor.violating and state not in monitor.violating:
            return Violated(i)
        state = nxt
    if state in monitor.violating:
        # initial state already violating
        return Violated(0) if trace else Satisfied()
    return Satisfied()
