"""Turn abstract event sequences into UI-action tests with differential oracles."""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .appsim import AppDriver, DriverError, UiAction, parse_action
from .hsi import InputSequence
from .model import EnforcementModel, UndefinedTransition, run_trace
from .ripper import AugmentedGuiModel

log = logging.getLogger(__name__)

TRANSPARENT = "transparent"
ACTUAL = "actual"


class Matcher:
    """Substring automaton (failure-function construction) for one target.

    States are ``0..len(target)``; ``len(target)`` is accepting and absorbing.
    """

    def __init__(self, target: Sequence[str]):
        self.target = tuple(target)
        m = len(self.target)
        fail = [0] * (m + 1)
        k = 0
        for q in range(1, m):
            while k and self.target[q] != self.target[k]:
                k = fail[k]
            if self.target[q] == self.target[k]:
                k += 1
            fail[q + 1] = k
        self.fail = fail

    @property
    def accepting(self) -> int:
        return len(self.target)

    def delta(self, q: int, event: str) -> int:
        if q == self.accepting:
            return q
        while True:
            if self.target[q] == event:
                return q + 1
            if q == 0:
                return 0
            q = self.fail[q]

    def run(self, events: Sequence[str], q: int = 0) -> int:
        for e in events:
            q = self.delta(q, e)
        return q

    def find(self, events: Sequence[str]) -> int | None:
        """Start index of the first occurrence of the target, if any."""
        q = 0
        if q == self.accepting:
            return 0
        for i, e in enumerate(events):
            q = self.delta(q, e)
            if q == self.accepting:
                return i + 1 - len(self.target)
        return None


def build_matcher(target: Sequence[str]) -> Matcher:
    return Matcher(target)


def _encode_path(path: Sequence[UiAction]) -> tuple[str, ...]:
    return tuple(a.encode() for a in path)


def k_shortest_covering_paths(
    model: AugmentedGuiModel, target: Sequence[str], k: int = 10
) -> list[tuple[UiAction, ...]]:
    """Up to ``k`` action paths from the initial node whose annotations cover ``target``.

    Iterative deepening over path length; inside one length, depth-first in
    action-encoding order, so results come out sorted by (length, encoding).
    A path ends at the action on which the target completes and never
    revisits a (node, matcher state) pair.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    matcher = Matcher(target)
    acc = matcher.accepting
    if acc == 0:
        return [()]

    out_edges = {
        n: sorted(model.out_edges(n), key=lambda e: e.action.encode()) for n in model.nodes
    }
    # product graph; remaining-distance to acceptance bounds each deepening round
    succ: dict[tuple[str, int], list[tuple[UiAction, tuple[str, int]]]] = {}
    seen = {(model.initial, 0)}
    todo = deque([(model.initial, 0)])
    while todo:
        node, q = todo.popleft()
        lst = []
        for e in out_edges[node]:
            nq = matcher.run(e.annotation, q)
            nxt = (e.dst, nq)
            lst.append((e.action, nxt))
            if nq != acc and nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
        succ[(node, q)] = lst
    dist = _distance_to_accept(succ, acc)
    start = (model.initial, 0)
    if start not in dist:
        return []

    results: list[tuple[UiAction, ...]] = []
    max_len = len(succ)  # a simple product path visits each non-accepting pair once
    for length in range(dist[start], max_len + 1):
        path: list[UiAction] = []
        on_path = {start}

        def dfs(pair, remaining) -> bool:
            for action, nxt in succ[pair]:
                if nxt[1] == acc:
                    if remaining == 1:
                        results.append(tuple(path + [action]))
                        if len(results) >= k:
                            return True
                    continue
                if nxt in on_path or dist.get(nxt, remaining) >= remaining:
                    continue
                path.append(action)
                on_path.add(nxt)
                if dfs(nxt, remaining - 1):
                    return True
                on_path.discard(nxt)
                path.pop()
            return False

        if dfs(start, length):
            break
    return results


def _distance_to_accept(succ, acc) -> dict[tuple[str, int], int]:
    rev: dict[tuple[str, int], list[tuple[str, int]]] = {}
    dist: dict[tuple[str, int], int] = {}
    todo: deque = deque()
    for pair, lst in succ.items():
        for _, nxt in lst:
            if nxt[1] == acc:
                if pair not in dist:
                    dist[pair] = 1
                    todo.append(pair)
            else:
                rev.setdefault(nxt, []).append(pair)
    while todo:
        p = todo.popleft()
        for prev in rev.get(p, ()):
            if prev not in dist:
                dist[prev] = dist[p] + 1
                todo.append(prev)
    return dist


@dataclass(frozen=True)
class OracleSpec:
    kind: str
    divergence_index: int | None = None
    expected_api_outputs: tuple[str, ...] | None = None

    def __post_init__(self):
        if (self.kind == ACTUAL) != (self.divergence_index is not None):
            raise ValueError("divergence_index is required for, and only for, actual oracles")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == ACTUAL:
            d["divergence_index"] = self.divergence_index
            d["expected_api_outputs"] = list(self.expected_api_outputs or ())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OracleSpec":
        if d["kind"] == ACTUAL:
            return cls(ACTUAL, d["divergence_index"], tuple(d["expected_api_outputs"]))
        return cls(TRANSPARENT)


def assign_oracle(model: EnforcementModel, target: Sequence[str]) -> OracleSpec:
    run = run_trace(model, target)
    if run.divergence is None:
        return OracleSpec(TRANSPARENT)
    return OracleSpec(ACTUAL, run.divergence, run.outputs)


@dataclass(frozen=True)
class ConcreteTest:
    target: InputSequence
    actions: tuple[UiAction, ...]
    oracle: OracleSpec
    candidate_rank: int
    # where the target starts in the path's alphabet-filtered req trace
    offset: int = 0

    def to_dict(self) -> dict:
        return {
            "target": list(self.target),
            "actions": [a.encode() for a in self.actions],
            "oracle": self.oracle.to_dict(),
            "candidate_rank": self.candidate_rank,
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConcreteTest":
        return cls(
            target=tuple(d["target"]),
            actions=tuple(parse_action(a) for a in d["actions"]),
            oracle=OracleSpec.from_dict(d["oracle"]),
            candidate_rank=int(d["candidate_rank"]),
            offset=int(d.get("offset", 0)),
        )


@dataclass
class Concretization:
    tests: list[ConcreteTest] = field(default_factory=list)
    uncoverable: list[InputSequence] = field(default_factory=list)
    diagnostics: dict[InputSequence, list[str]] = field(default_factory=dict)


def replay_trace(driver: AppDriver, actions: Sequence[UiAction], alphabet) -> tuple[str, ...]:
    """Alphabet-filtered req events observed while replaying ``actions`` from reset."""
    alphabet = set(alphabet)
    driver.reset()
    trace: list[str] = []
    for a in actions:
        _, emitted, _ = driver.perform(a)
        trace.extend(e for e in emitted if e in alphabet)
    return tuple(trace)


def covers(trace: Sequence[str], target: Sequence[str], strict: bool = False) -> int | None:
    """Offset at which ``trace`` covers ``target`` (0 in strict whole-trace mode)."""
    if strict:
        return 0 if tuple(trace) == tuple(target) else None
    return Matcher(target).find(trace)


def concretize_suite(
    gui: AugmentedGuiModel,
    driver: AppDriver,
    enf_model: EnforcementModel,
    suite,
    k: int = 10,
    strict: bool = False,
) -> Concretization:
    result = Concretization()
    for target in suite:
        target = tuple(target)
        notes: list[str] = []
        chosen = None
        for rank, actions in enumerate(k_shortest_covering_paths(gui, target, k), start=1):
            try:
                trace = replay_trace(driver, actions, enf_model.alphabet)
            except DriverError as e:
                notes.append(f"candidate {rank}: replay failed: {e}")
                continue
            offset = covers(trace, target, strict)
            if offset is None:
                notes.append(f"candidate {rank}: replay trace {list(trace)} does not cover target")
                continue
            chosen = (rank, actions, offset)
            break
        if chosen is None:
            result.uncoverable.append(target)
            if notes:
                result.diagnostics[target] = notes
            log.info("uncoverable: %s", list(target))
            continue
        try:
            oracle = assign_oracle(enf_model, target)
        except UndefinedTransition as e:
            result.uncoverable.append(target)
            result.diagnostics[target] = notes + [f"target undefined in model: {e}"]
            continue
        rank, actions, offset = chosen
        result.tests.append(ConcreteTest(target, actions, oracle, rank, offset))
        if notes:
            result.diagnostics[target] = notes
    return result


def dump_tests(tests: Sequence[ConcreteTest]) -> str:
    return json.dumps([t.to_dict() for t in tests], indent=2, sort_keys=True) + "\n"


def load_tests(text: str) -> list[ConcreteTest]:
    return [ConcreteTest.from_dict(d) for d in json.loads(text)]
