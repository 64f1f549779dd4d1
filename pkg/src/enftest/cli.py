"""Command-line pipeline: gen, rip, concretize, run, compare, pipeline, validate-model.

Exit codes: 0 clean, 1 functional or performance finding, 2 usage/input
error, 3 uncoverable sequences (and nothing worse).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .appsim import AppSpecError, SimDriver, load_app_spec
from .concretize import concretize_suite, dump_tests, load_tests
from .hsi import generate_hsi_suite
from .model import ModelError, check_policy, parse_model, parse_monitor, Violated
from .perf import Thresholds, build_report, render_report
from .ripper import GuiModelFormatError, export_gui_model, import_gui_model, rip
from .runner import (
    ENFORCER,
    Deployment,
    FaultSpec,
    RunConfig,
    SuiteSamples,
    inject_fault,
    run_suite,
)

log = logging.getLogger("enftest")

EXIT_OK, EXIT_FINDING, EXIT_INPUT, EXIT_UNCOVERABLE = 0, 1, 2, 3
OUT_ENV = "ENFTEST_OUT"


class InputError(Exception):
    pass


@dataclass
class PipelineConfig:
    model: Path
    app: Path
    policy: Path | None = None
    k: int = 10
    repetitions: int = 10
    clock: str = "virtual"
    thresholds: Thresholds = field(default_factory=Thresholds)
    fault: FaultSpec | None = None
    seed: int = 0
    out: Path = Path(".")
    budget: int = 1000
    strict: bool = False

    def __post_init__(self):
        for p in (self.model, self.app, self.policy):
            if p is not None and not Path(p).exists():
                raise InputError(f"no such file: {p}")
        if self.k < 1 or self.repetitions < 1:
            raise InputError("k and repetitions must be >= 1")


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text, encoding="utf-8")
    return p


def _load_model(path):
    try:
        return parse_model(_read(path))
    except ModelError as e:
        raise InputError(f"{path}: {e}") from None


def _load_app(path):
    try:
        return load_app_spec(_read(path))
    except AppSpecError as e:
        raise InputError(f"{path}: {e}") from None


def _load_json(path, what: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: malformed {what}: {e}") from None


def suite_to_json(model, suite) -> str:
    doc = {
        "alphabet": list(model.alphabet),
        "sequences": [list(s) for s in suite.sequences],
        "provenance": [
            [{"prefix": list(p.prefix), "suffix": list(p.suffix)} for p in suite.provenance[s]]
            for s in suite.sequences
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_suite(path) -> list[tuple[str, ...]]:
    doc = _load_json(path, "suite")
    try:
        return [tuple(s) for s in doc["sequences"]]
    except (KeyError, TypeError):
        raise InputError(f"{path}: malformed suite") from None


# ---------------------------------------------------------------------------
# Stages (shared by the subcommands and the pipeline)

def stage_gen(model_path, out: Path):
    model = _load_model(model_path)
    suite = generate_hsi_suite(model)
    path = _write(out, "suite.json", suite_to_json(model, suite))
    print(f"{len(suite)} sequences -> {path}")
    return path


def stage_rip(app_path, model_path, budget: int, out: Path, ignore_keys=()):
    model = _load_model(model_path)
    spec = _load_app(app_path)
    gui = rip(SimDriver(spec, ignore_keys), model.alphabet, budget)
    path = _write(out, "gui-model.json", export_gui_model(gui))
    print(f"{len(gui.nodes)} nodes, {len(gui.edges)} edges -> {path}")
    return path


def stage_concretize(gui_path, app_path, model_path, suite_path, k: int, out: Path, strict=False):
    try:
        gui = import_gui_model(_read(gui_path))
    except GuiModelFormatError as e:
        raise InputError(f"{gui_path}: {e}") from None
    model = _load_model(model_path)
    spec = _load_app(app_path)
    suite = _load_suite(suite_path)
    res = concretize_suite(gui, SimDriver(spec), model, suite, k, strict=strict)
    path = _write(out, "tests.json", dump_tests(res.tests))
    unc = {
        "uncoverable": [list(s) for s in res.uncoverable],
        "diagnostics": {" ".join(s): notes for s, notes in res.diagnostics.items()},
    }
    _write(out, "uncoverable.json", json.dumps(unc, indent=2, sort_keys=True) + "\n")
    print(f"{len(res.tests)} concrete tests -> {path}")
    for s in res.uncoverable:
        print(f"uncoverable: {' '.join(s)}")
    return path, res


def stage_run(tests_path, app_path, model_path, config: RunConfig, fault, out: Path, parallel=False):
    try:
        tests = load_tests(_read(tests_path))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InputError(f"{tests_path}: malformed tests: {e}") from None
    if not tests:
        raise InputError(f"{tests_path}: no tests to run")
    model = _load_model(model_path)
    spec = _load_app(app_path)
    enf = Deployment.enforcer(model)
    if fault is not None:
        enf = inject_fault(enf, fault)
    samples = run_suite(lambda: SimDriver(spec), tests, (Deployment.baseline(), enf), config, parallel=parallel)
    path = _write(out, "samples.json", samples.to_json())
    _write(out, "samples.csv", samples.to_csv())
    n = sum(len(rep) for reps in samples.runs.values() for rep in reps)
    print(f"{n} runs ({config.repetitions} repetitions x 2 variants) -> {path}")
    return path


def policy_violations(samples: SuiteSamples, monitor) -> list[dict]:
    found = []
    alpha = set(monitor.alphabet)
    for r, t, ex in samples.records(ENFORCER):
        if ex.error:
            continue
        verdict = check_policy(monitor, [e for e in ex.api_trace if e in alpha])
        if isinstance(verdict, Violated):
            found.append({"test": samples.test_ids[t], "repetition": r, "at": verdict.at})
    return found


def stage_compare(samples_path, thresholds: Thresholds, out: Path, policy_path=None) -> int:
    try:
        samples = SuiteSamples.from_json(_read(samples_path))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InputError(f"{samples_path}: malformed samples: {e}") from None
    violations = None
    if policy_path is not None:
        try:
            monitor = parse_monitor(_read(policy_path))
        except ModelError as e:
            raise InputError(f"{policy_path}: {e}") from None
        violations = policy_violations(samples, monitor)
    try:
        report = build_report(samples, thresholds, violations)
    except ValueError as e:
        raise InputError(f"{samples_path}: {e}") from None
    doc, table = render_report(report)
    _write(out, "report.json", doc)
    _write(out, "report.txt", table)
    print(table, end="")
    return report.exit_code


def run_pipeline(cfg: PipelineConfig) -> int:
    out = Path(cfg.out)
    suite_path = stage_gen(cfg.model, out)
    gui_path = stage_rip(cfg.app, cfg.model, cfg.budget, out)
    tests_path, res = stage_concretize(gui_path, cfg.app, cfg.model, suite_path, cfg.k, out, cfg.strict)
    if not res.tests:
        return EXIT_UNCOVERABLE
    config = RunConfig(repetitions=cfg.repetitions, clock=cfg.clock, seed=cfg.seed)
    samples_path = stage_run(tests_path, cfg.app, cfg.model, config, cfg.fault, out)
    code = stage_compare(samples_path, cfg.thresholds, out, cfg.policy)
    if code == EXIT_OK and res.uncoverable:
        return EXIT_UNCOVERABLE
    return code


# ---------------------------------------------------------------------------

def _thresholds(args) -> Thresholds:
    file_values = _load_json(args.thresholds, "thresholds") if args.thresholds else {}
    flags = {}
    for item in args.threshold or ():
        k, sep, v = item.partition("=")
        if not sep:
            raise InputError(f"--threshold expects key=value, got {item!r}")
        flags[k] = v
    try:
        return Thresholds.merged(file_values, flags)
    except ValueError as e:
        raise InputError(str(e)) from None


def _fault(args) -> FaultSpec | None:
    if not args.fault:
        return None
    try:
        return FaultSpec.parse(args.fault)
    except ValueError as e:
        raise InputError(str(e)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="enftest", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    default_out = os.environ.get(OUT_ENV, ".")

    def common(sp, *names):
        opts = {
            "model": dict(required=True, help="enforcement model file"),
            "app": dict(required=True, help="app spec (JSON)"),
            "policy": dict(default=None, help="policy monitor file"),
            "suite": dict(required=True, help="HSI suite JSON"),
            "gui-model": dict(required=True, help="ripped GUI model JSON"),
            "tests": dict(required=True, help="concrete test suite JSON"),
            "samples": dict(required=True, help="samples JSON"),
        }
        for n in names:
            sp.add_argument(f"--{n}", **opts[n])
        sp.add_argument("--out", default=default_out, help=f"output directory (default ${OUT_ENV} or .)")

    def run_opts(sp):
        sp.add_argument("--reps", type=int, default=10)
        sp.add_argument("--clock", choices=("virtual", "wall"), default="virtual")
        sp.add_argument("--fault", default=None, help="kind=value, e.g. memoryLeak=100")
        sp.add_argument("--seed", type=int, default=0)

    def threshold_opts(sp):
        sp.add_argument("--thresholds", default=None, help="JSON file of threshold overrides")
        sp.add_argument("--threshold", action="append", metavar="KEY=VALUE", help="override one threshold")

    sp = sub.add_parser("gen", help="generate the HSI test sequences")
    common(sp, "model")

    sp = sub.add_parser("rip", help="rip the app GUI with event tracing")
    common(sp, "app", "model")
    sp.add_argument("--budget", type=int, default=1000)
    sp.add_argument("--ignore-key", action="append", default=[], help="view property excluded from state identity")

    sp = sub.add_parser("concretize", help="map sequences to UI-action tests")
    common(sp, "gui-model", "app", "model", "suite")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--strict", action="store_true", help="require whole-trace equality instead of substring")

    sp = sub.add_parser("run", help="execute tests with and without the enforcer")
    common(sp, "tests", "app", "model")
    run_opts(sp)
    sp.add_argument("--parallel", action="store_true", help="run the two variants concurrently")

    sp = sub.add_parser("compare", help="median KPIs and degradation verdicts")
    common(sp, "samples", "policy")
    threshold_opts(sp)

    sp = sub.add_parser("pipeline", help="all stages end to end")
    common(sp, "model", "app", "policy")
    run_opts(sp)
    threshold_opts(sp)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--budget", type=int, default=1000)
    sp.add_argument("--strict", action="store_true")

    sp = sub.add_parser("validate-model", help="parse and validate a model (and monitor)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--policy", default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


def _dispatch(args) -> int:
    out = Path(getattr(args, "out", "."))
    cmd = args.command
    if cmd == "gen":
        stage_gen(args.model, out)
        return EXIT_OK
    if cmd == "rip":
        if args.budget < 1:
            raise InputError("--budget must be >= 1")
        stage_rip(args.app, args.model, args.budget, out, args.ignore_key)
        return EXIT_OK
    if cmd == "concretize":
        if args.k < 1:
            raise InputError("--k must be >= 1")
        _, res = stage_concretize(args.gui_model, args.app, args.model, args.suite, args.k, out, args.strict)
        return EXIT_UNCOVERABLE if res.uncoverable else EXIT_OK
    if cmd == "run":
        try:
            config = RunConfig(repetitions=args.reps, clock=args.clock, seed=args.seed)
        except ValueError as e:
            raise InputError(str(e)) from None
        stage_run(args.tests, args.app, args.model, config, _fault(args), out, args.parallel)
        return EXIT_OK
    if cmd == "compare":
        return stage_compare(args.samples, _thresholds(args), out, args.policy)
    if cmd == "pipeline":
        cfg = PipelineConfig(
            model=Path(args.model),
            app=Path(args.app),
            policy=Path(args.policy) if args.policy else None,
            k=args.k,
            repetitions=args.reps,
            clock=args.clock,
            thresholds=_thresholds(args),
            fault=_fault(args),
            seed=args.seed,
            out=out,
            budget=args.budget,
            strict=args.strict,
        )
        return run_pipeline(cfg)
    if cmd == "validate-model":
        model = _load_model(args.model)
        print(f"model ok: {len(model.states)} states, {len(model.transitions)} transitions, "
              f"alphabet {', '.join(model.alphabet)}")
        if args.policy:
            try:
                mon = parse_monitor(_read(args.policy))
            except ModelError as e:
                raise InputError(f"{args.policy}: {e}") from None
            print(f"policy ok: {len(mon.states)} states, violating {', '.join(sorted(mon.violating))}")
        return EXIT_OK
    raise InputError(f"unknown command {cmd}")


if __name__ == "__main__":
    sys.exit(main())
