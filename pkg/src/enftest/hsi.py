"""HSI test-sequence generation for partial deterministic I/O automata.

Sequences are tuples of event names.  Every tie is broken by the model's
alphabet declaration order (shorter sequences first), so generation is a
pure function of the model.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from .model import EnforcementModel, UsageError, is_defined, run_from

log = logging.getLogger(__name__)

InputSequence = tuple[str, ...]


@dataclass(frozen=True)
class SeparatingFamilies:
    families: dict[str, tuple[InputSequence, ...]]
    # (si, sj) -> shared separator, for every distinguishable ordered pair si < sj
    separators: dict[tuple[str, str], InputSequence] = field(default_factory=dict)
    indistinguishable: tuple[tuple[str, str], ...] = ()

    def __getitem__(self, state: str) -> tuple[InputSequence, ...]:
        return self.families[state]


@dataclass(frozen=True)
class Provenance:
    prefix: InputSequence
    suffix: InputSequence


@dataclass(frozen=True)
class HsiSuite:
    sequences: tuple[InputSequence, ...]
    # every (cover prefix, separating suffix) derivation a sequence exercises
    provenance: dict[InputSequence, tuple[Provenance, ...]]

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)


def state_cover(model: EnforcementModel) -> dict[str, InputSequence]:
    access: dict[str, InputSequence] = {model.initial: ()}
    queue = deque([model.initial])
    while queue:
        s = queue.popleft()
        for a in model.defined_inputs(s):
            _, d = model.transitions[(s, a)]
            if d not in access:
                access[d] = access[s] + (a,)
                queue.append(d)
    return {s: access[s] for s in model.states if s in access}


def transition_cover(model: EnforcementModel) -> list[InputSequence]:
    access = state_cover(model)
    cover = {()}
    for s in model.states:
        for a in model.defined_inputs(s):
            cover.add(access[s] + (a,))
    return sorted(cover, key=model.sort_key)


def separating_sequence(model: EnforcementModel, si: str, sj: str) -> InputSequence | None:
    """Shortest sequence defined from both states whose outputs differ.

    Breadth-first search over the pair product, restricted to inputs defined
    in both components, bounded at depth |states|**2.
    """
    if si == sj:
        raise UsageError("separating_sequence needs two distinct states")
    for s in (si, sj):
        if s not in model.states:
            raise UsageError(f"unknown state {s!r}")
    bound = len(model.states) ** 2
    seen = {(si, sj)}
    queue: deque[tuple[str, str, InputSequence]] = deque([(si, sj, ())])
    while queue:
        a, b, path = queue.popleft()
        if len(path) >= bound:
            continue
        for x in model.alphabet:
            ta = model.transitions.get((a, x))
            tb = model.transitions.get((b, x))
            if ta is None or tb is None:
                continue
            if ta[0] != tb[0]:
                return path + (x,)
            nxt = (ta[1], tb[1])
            if nxt[0] != nxt[1] and nxt not in seen:
                seen.add(nxt)
                queue.append((nxt[0], nxt[1], path + (x,)))
    return None


def separating_families(model: EnforcementModel) -> SeparatingFamilies:
    fam: dict[str, set[InputSequence]] = {s: set() for s in model.states}
    separators = {}
    indist = []
    for i, si in enumerate(model.states):
        for sj in model.states[i + 1:]:
            sep = separating_sequence(model, si, sj)
            if sep is None:
                indist.append((si, sj))
                continue
            separators[(si, sj)] = sep
            fam[si].add(sep)
            fam[sj].add(sep)
    for si, sj in indist:
        log.warning("states %s and %s are not distinguishable", si, sj)
    return SeparatingFamilies(
        families={s: tuple(sorted(v, key=model.sort_key)) for s, v in fam.items()},
        separators=separators,
        indistinguishable=tuple(indist),
    )


def dedup_prefixes(sequences) -> set[InputSequence]:
    seqs = {tuple(s) for s in sequences}
    prefixes = {s[:k] for s in seqs for k in range(len(s))}
    return seqs - prefixes


def generate_hsi_suite(model: EnforcementModel) -> HsiSuite:
    """Concatenate each transition-cover member with the family of the state it reaches.

    Duplicates collapse.  A bare cover member (one emitted without a separating
    suffix, such as the empty sequence) is dropped when it is a proper prefix of
    another emitted sequence.
    """
    families = separating_families(model)
    prov: dict[InputSequence, list[Provenance]] = {}
    bare: set[InputSequence] = set()
    for p in transition_cover(model):
        reached = run_from(model, model.initial, p).final
        suffixes = [h for h in families[reached] if is_defined(model, reached, h)]
        if not suffixes:
            bare.add(p)
            suffixes = [()]
        for h in suffixes:
            prov.setdefault(p + h, []).append(Provenance(p, h))

    emitted = set(prov)
    proper_prefixes = {s[:k] for s in emitted for k in range(len(s))}
    final = {
        s for s in emitted
        if s and not (s in bare and s in proper_prefixes and not _has_suffix(prov[s]))
    }
    for s in emitted - final:
        if not s:
            continue
        # absorb the dropped derivation into the first sequence extending it
        host = min((t for t in final if t[: len(s)] == s), key=model.sort_key)
        prov[host].extend(prov[s])
    ordered = tuple(sorted(final, key=model.sort_key))
    return HsiSuite(ordered, {s: tuple(prov[s]) for s in ordered})


def _has_suffix(provs: list[Provenance]) -> bool:
    return any(p.suffix for p in provs)
