"""End-to-end run of the camera enforcer on both bundled apps.

For each app: HSI suite, ripped GUI, concretized tests and the comparison
report, all written under ``--out/<app>``.
"""

import argparse
import logging
from pathlib import Path

from enftest import fixture_path
from enftest.cli import PipelineConfig, run_pipeline
from enftest.experiments import COMPLIANT, LEAKY


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/camera")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--clock", choices=("virtual", "wall"), default="virtual")
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    for app in (LEAKY, COMPLIANT):
        name = app.removesuffix(".json")
        print(f"== {name}")
        cfg = PipelineConfig(
            model=fixture_path("camera.model"),
            app=fixture_path(app),
            policy=fixture_path("camera.monitor"),
            repetitions=args.reps,
            clock=args.clock,
            out=Path(args.out) / name,
        )
        print(f"exit code {run_pipeline(cfg)}\n")


if __name__ == "__main__":
    main()
