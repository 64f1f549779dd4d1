"""Suite statistics for seeded random partial machines.

Reports suite size, how often the final suite contains a sequence that is a
proper prefix of another, and how many machines have indistinguishable states.
"""

import argparse
import logging
import random
import statistics

from enftest.hsi import generate_hsi_suite, separating_families
from enftest.randmodels import random_model


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--machines", type=int, default=100)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--max-states", type=int, default=6)
    p.add_argument("--max-inputs", type=int, default=4)
    args = p.parse_args()
    logging.basicConfig(level=logging.ERROR)

    rng = random.Random(args.seed)
    sizes, with_prefix, non_minimal = [], 0, 0
    for _ in range(args.machines):
        m = random_model(rng, args.max_states, args.max_inputs)
        seqs = generate_hsi_suite(m).sequences
        sizes.append(len(seqs))
        with_prefix += any(a != b and b[: len(a)] == a for a in seqs for b in seqs)
        non_minimal += bool(separating_families(m).indistinguishable)
    print(f"machines: {args.machines}")
    print(f"suite size: median {statistics.median(sizes)}, max {max(sizes)}")
    print(f"suites containing a proper prefix pair: {with_prefix}")
    print(f"machines with indistinguishable states: {non_minimal}")


if __name__ == "__main__":
    main()
