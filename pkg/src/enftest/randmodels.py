"""Seeded random deterministic partial machines, for property checks."""

from __future__ import annotations

import random

from .model import EnforcementModel


def random_model(
    rng: random.Random,
    max_states: int = 6,
    max_inputs: int = 4,
    density: float = 0.6,
    max_output_len: int = 2,
) -> EnforcementModel:
    """A reachable, deterministic, partially specified machine.

    A random spanning tree from the initial state guarantees reachability;
    remaining (state, input) pairs are defined with probability ``density``.
    """
    n = rng.randint(1, max_states)
    m = rng.randint(1, max_inputs)
    states = tuple(f"q{i}" for i in range(n))
    alphabet = tuple(f"e{i}" for i in range(m))

    def outputs():
        return tuple(rng.choice(alphabet) for _ in range(rng.randint(0, max_output_len)))

    table: dict[tuple[str, str], tuple[tuple[str, ...], str]] = {}
    for i in range(1, n):
        parent = states[rng.randrange(i)]
        free = [a for a in alphabet if (parent, a) not in table]
        while not free:
            parent = states[rng.randrange(i)]
            free = [a for a in alphabet if (parent, a) not in table]
        table[(parent, rng.choice(free))] = (outputs(), states[i])
    for s in states:
        for a in alphabet:
            if (s, a) not in table and rng.random() < density:
                table[(s, a)] = (outputs(), rng.choice(states))
    return EnforcementModel(states, states[0], alphabet, table)
