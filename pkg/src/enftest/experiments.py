"""Camera-enforcer experiments on the bundled foocam-mini fixtures."""

from __future__ import annotations

from dataclasses import dataclass

from . import fixture_text
from .appsim import AppSpec, SimDriver, load_app_spec
from .concretize import ConcreteTest, Concretization, concretize_suite
from .hsi import HsiSuite, generate_hsi_suite
from .model import EnforcementModel, PolicyMonitor, parse_model, parse_monitor
from .perf import DegradationReport, Thresholds, aggregate_medians, build_report
from .ripper import AugmentedGuiModel, rip
from .runner import BASELINE, ENFORCER, Deployment, FaultSpec, RunConfig, SuiteSamples, run_suite

LEAKY = "foocam-mini-leaky.json"
COMPLIANT = "foocam-mini-compliant.json"


@dataclass
class CameraSetup:
    model: EnforcementModel
    monitor: PolicyMonitor
    spec: AppSpec
    suite: HsiSuite
    gui: AugmentedGuiModel
    concretization: Concretization

    @property
    def tests(self) -> list[ConcreteTest]:
        return self.concretization.tests

    def driver(self) -> SimDriver:
        return SimDriver(self.spec)

    def run(self, fault: FaultSpec | None = None, config: RunConfig = RunConfig(), enforcer=None) -> SuiteSamples:
        dep = enforcer or Deployment.enforcer(self.model, fault)
        return run_suite(self.driver, self.tests, (Deployment.baseline(), dep), config)


def camera_setup(app: str = LEAKY, k: int = 10, budget: int = 1000) -> CameraSetup:
    model = parse_model(fixture_text("camera.model"))
    monitor = parse_monitor(fixture_text("camera.monitor"))
    spec = load_app_spec(fixture_text(app))
    suite = generate_hsi_suite(model)
    gui = rip(SimDriver(spec), model.alphabet, budget)
    conc = concretize_suite(gui, SimDriver(spec), model, suite, k)
    return CameraSetup(model, monitor, spec, suite, gui, conc)


def intercepted_events(samples: SuiteSamples, repetition: int = 0) -> int:
    alphabet = set(samples.meta["alphabet"])
    return sum(
        sum(1 for e in ex.req_trace if e in alphabet) for ex in samples.runs[ENFORCER][repetition]
    )


def size_cpu_hog(setup: CameraSetup, target_pct: float, config: RunConfig = RunConfig(repetitions=1)) -> float:
    """Per-event busy work (ms) that puts suite energy exactly ``target_pct`` over baseline.

    Energy is linear in the hog magnitude in the virtual clock, so this is a
    direct solve rather than a search.
    """
    clean = setup.run(config=config)
    agg = aggregate_medians(clean)
    base, enf = agg[BASELINE].energy_units, agg[ENFORCER].energy_units
    n = intercepted_events(clean)
    return (target_pct / 100.0 * base - (enf - base)) / (config.energy_alpha * n)


def size_memory_leak(setup: CameraSetup, target_pct: float, config: RunConfig = RunConfig(repetitions=1)) -> float:
    """Smallest per-event leak (kb) that puts suite peak memory ``target_pct`` over baseline.

    Peak memory is a nondecreasing piecewise-linear function of the leak, so
    bisection converges to the exact crossing point.
    """
    base = aggregate_medians(setup.run(config=config))[BASELINE].peak_memory_kb
    goal = base * (1 + target_pct / 100.0)

    def peak(leak: float) -> float:
        return aggregate_medians(setup.run(FaultSpec("memoryLeak", leak), config))[ENFORCER].peak_memory_kb

    lo, hi = 0.0, 1.0
    while peak(hi) < goal:
        hi *= 2
    for _ in range(60):
        mid = (lo + hi) / 2
        if peak(mid) >= goal:
            hi = mid
        else:
            lo = mid
    return hi


def fault_matrix(
    setup: CameraSetup,
    config: RunConfig = RunConfig(),
    thresholds: Thresholds = Thresholds(),
    energy_pct: float = 14.0,
    memory_pct: float = 6.0,
) -> dict[str, DegradationReport]:
    """Reports for the clean enforcer and each of the four injected faults."""
    faults = {
        "none": None,
        "responsivenessDelay": FaultSpec("responsivenessDelay", 250),
        "startupDelay": FaultSpec("startupDelay", 6000),
        "cpuHog": FaultSpec("cpuHog", size_cpu_hog(setup, energy_pct)),
        "memoryLeak": FaultSpec("memoryLeak", size_memory_leak(setup, memory_pct)),
    }
    return {name: build_report(setup.run(f, config), thresholds) for name, f in faults.items()}
