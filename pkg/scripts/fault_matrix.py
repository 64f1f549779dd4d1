"""Run the clean enforcer and each injected fault on the leaky camera app.

Prints one row per fault with the KPIs it was flagged on and the overhead of
every KPI, and optionally writes the full reports as JSON.
"""

import argparse
import json
import logging
from dataclasses import asdict

from enftest.experiments import COMPLIANT, LEAKY, camera_setup, fault_matrix, size_cpu_hog, size_memory_leak
from enftest.perf import Thresholds
from enftest.runner import RunConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--app", choices=("leaky", "compliant"), default="leaky")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--energy-pct", type=float, default=14.0, help="energy overhead the cpuHog is sized to")
    p.add_argument("--memory-pct", type=float, default=6.0, help="peak memory overhead the leak is sized to")
    p.add_argument("--json", default=None, help="write all reports to this file")
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    setup = camera_setup(LEAKY if args.app == "leaky" else COMPLIANT)
    print(f"{len(setup.tests)} concrete tests, {len(setup.concretization.uncoverable)} uncoverable")
    print(f"cpuHog sized to {size_cpu_hog(setup, args.energy_pct):.4f} ms/event, "
          f"memoryLeak to {size_memory_leak(setup, args.memory_pct):.4f} kb/event")

    reports = fault_matrix(setup, RunConfig(repetitions=args.reps), Thresholds(), args.energy_pct, args.memory_pct)
    names = [k.name for k in reports["none"].kpis]
    print(f"\n{'fault':<20} {'flagged':<16} " + " ".join(f"{n:>15}" for n in names))
    for fault, r in reports.items():
        cells = []
        for k in r.kpis:
            if k.name in ("memory", "energy"):
                cells.append(f"{(k.enforcer - k.baseline) / k.baseline * 100:+14.2f}%")
            else:
                cells.append(f"{k.enforcer:12.1f} ms")
        flagged = ",".join(r.degraded()) or "-"
        print(f"{fault:<20} {flagged:<16} " + " ".join(cells))

    if args.json:
        doc = {f: {"degraded": r.degraded(), "kpis": [asdict(k) for k in r.kpis]} for f, r in reports.items()}
        with open(args.json, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
