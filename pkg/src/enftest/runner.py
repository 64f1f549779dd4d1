"""Two-variant test execution with KPI accounting and fault injection.

In the virtual clock every KPI is computed from declared costs, so runs are
bit-for-bit reproducible.  The wall clock really sleeps, spins and allocates
for the enforcer's share of the work and measures it.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

from .appsim import AppDriver
from .concretize import TRANSPARENT, ConcreteTest
from .model import EnforcementModel, UndefinedTransition, step

FAULT_KINDS = ("responsivenessDelay", "startupDelay", "cpuHog", "memoryLeak")
BASELINE = "baseline"
ENFORCER = "enforcer"


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    magnitude: float

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}; expected one of {FAULT_KINDS}")
        if self.magnitude < 0:
            raise ValueError("fault magnitude must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "FaultSpec":
        kind, sep, value = text.partition("=")
        if not sep:
            raise ValueError(f"fault must look like kind=value, got {text!r}")
        return cls(kind.strip(), float(value))

    def __str__(self) -> str:
        return f"{self.kind}={self.magnitude:g}"


@dataclass(frozen=True)
class EnforcerCosts:
    """Declared runtime cost of a correct enforcer."""

    init_ms: float = 40.0
    per_event_cpu_ms: float = 2.0
    bookkeeping_kb: float = 512.0


@dataclass(frozen=True)
class Deployment:
    mode: str = BASELINE
    model: EnforcementModel | None = None
    fault: FaultSpec | None = None
    costs: EnforcerCosts = EnforcerCosts()

    def __post_init__(self):
        if self.mode == BASELINE and (self.model is not None or self.fault is not None):
            raise ValueError("a baseline deployment carries no model and no fault")
        if self.mode == ENFORCER and self.model is None:
            raise ValueError("an enforcer deployment needs a model")

    @classmethod
    def baseline(cls) -> "Deployment":
        return cls(BASELINE)

    @classmethod
    def enforcer(cls, model: EnforcementModel, fault: FaultSpec | None = None, costs=EnforcerCosts()):
        return cls(ENFORCER, model, fault, costs)


def inject_fault(deployment: Deployment, fault: FaultSpec) -> Deployment:
    if deployment.mode != ENFORCER:
        raise ValueError("faults can only be injected into an enforcer deployment")
    return replace(deployment, fault=fault)


@dataclass(frozen=True)
class KpiRecord:
    launch_ms: float
    action_handler_ms: tuple[float, ...]
    peak_memory_kb: float
    energy_units: float

    @property
    def max_handler_ms(self) -> float:
        return max(self.action_handler_ms, default=0.0)


@dataclass(frozen=True)
class RunConfig:
    repetitions: int = 10
    clock: str = "virtual"
    energy_alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.clock not in ("virtual", "wall"):
            raise ValueError("clock must be 'virtual' or 'wall'")


@dataclass(frozen=True)
class Verdict:
    passed: bool
    reason: str = ""
    index: int | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "reason": self.reason, "index": self.index}


PASS = Verdict(True)


class _Enforcer:
    """Enforcer runtime: model state plus its (possibly faulty) resource use."""

    def __init__(self, deployment: Deployment, wall: bool):
        self.model = deployment.model
        self.fault = deployment.fault
        self.costs = deployment.costs
        self.wall = wall
        self.state = self.model.initial
        self.alphabet = set(self.model.alphabet)
        self._leaked: list[bytearray] = []

    def _fault(self, kind: str) -> float:
        return self.fault.magnitude if self.fault and self.fault.kind == kind else 0.0

    def init_ms(self) -> float:
        delay = self._fault("startupDelay")
        if not self.wall:
            return self.costs.init_ms + delay
        t0 = time.perf_counter()
        time.sleep((self.costs.init_ms + delay) / 1000)
        return (time.perf_counter() - t0) * 1000

    def intercept(self, event: str, index: int) -> tuple[tuple[str, ...], float, float, float]:
        """Return (outputs, handler_ms, cpu_ms, alloc_kb) for one intercepted event."""
        if self.wall:
            return self._intercept_wall(event, index)
        outs = self._step(event, index)
        cpu = self.costs.per_event_cpu_ms + self._fault("cpuHog")
        handler = cpu + self._fault("responsivenessDelay")
        return outs, handler, cpu, self._fault("memoryLeak")

    def _intercept_wall(self, event, index):
        t0, c0 = time.perf_counter(), time.process_time()
        outs = self._step(event, index)
        _spin(self.costs.per_event_cpu_ms + self._fault("cpuHog"))
        if self._fault("responsivenessDelay"):
            time.sleep(self._fault("responsivenessDelay") / 1000)
        leak = self._fault("memoryLeak")
        if leak:
            self._leaked.append(bytearray(int(leak * 1024)))
        handler = (time.perf_counter() - t0) * 1000
        cpu = (time.process_time() - c0) * 1000
        return outs, handler, cpu, leak

    def _step(self, event, index):
        res = step(self.model, self.state, event)
        if res is None:
            raise UndefinedTransition(index, self.state, event)
        outs, self.state = res
        return outs


def _spin(ms: float) -> None:
    end = time.perf_counter() + ms / 1000
    while time.perf_counter() < end:
        pass


@dataclass
class Execution:
    api_trace: tuple[str, ...]
    req_trace: tuple[str, ...]
    kpis: KpiRecord | None
    error: str | None = None


def execute_test(driver: AppDriver, deployment: Deployment, test: ConcreteTest, config: RunConfig) -> Execution:
    """Run one test under one deployment.

    Memory is accounted per action as: app allocation, then enforcer
    allocations for the intercepted events, peak update, then app frees.
    """
    wall = config.clock == "wall"
    enforcer = _Enforcer(deployment, wall) if deployment.mode == ENFORCER else None
    _, launch_ms, launch_cost = driver.reset()
    launch = launch_ms + (enforcer.init_ms() if enforcer else 0.0)
    memory = launch_cost.alloc_kb + (deployment.costs.bookkeeping_kb if enforcer else 0.0)
    peak = memory
    memory -= launch_cost.free_kb
    cpu_total = launch_cost.cpu_ms
    declared_energy = launch_cost.energy_units
    handlers: list[float] = []
    api: list[str] = []
    req: list[str] = []
    index = 0  # position in the in-alphabet req trace
    try:
        for action in test.actions:
            _, emitted, cost = driver.perform(action)
            handler = cost.cpu_ms
            cpu_total += cost.cpu_ms
            declared_energy += cost.energy_units
            memory += cost.alloc_kb
            for event in emitted:
                req.append(event)
                if enforcer is None or event not in enforcer.alphabet:
                    api.append(event)
                    continue
                outs, h, c, kb = enforcer.intercept(event, index)
                index += 1
                api.extend(outs)
                handler += h
                cpu_total += c
                memory += kb
            peak = max(peak, memory)
            memory -= cost.free_kb
            handlers.append(handler)
    except UndefinedTransition as e:
        return Execution(tuple(api), tuple(req), None, f"enforcer model incomplete: {e}")
    energy = config.energy_alpha * cpu_total + declared_energy
    return Execution(tuple(api), tuple(req), KpiRecord(launch, tuple(handlers), peak, energy))


def _first_mismatch(a: Sequence[str], b: Sequence[str]) -> int | None:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return None if len(a) == len(b) else min(len(a), len(b))


def check_oracle(test: ConcreteTest, baseline_trace, enforcer_trace, alphabet) -> Verdict:
    alphabet = set(alphabet)
    base = [e for e in baseline_trace if e in alphabet]
    enf = [e for e in enforcer_trace if e in alphabet]
    if test.oracle.kind == TRANSPARENT:
        i = _first_mismatch(base, enf)
        return PASS if i is None else Verdict(False, "transparent: enforcer altered the trace", i)
    # actual: agree before the aligned divergence, then match the model's prediction
    cut = test.offset + test.oracle.divergence_index
    i = _first_mismatch(base[:cut], enf[:cut])
    if i is not None:
        return Verdict(False, "actual: traces differ before the divergence point", i)
    expected = list(test.oracle.expected_api_outputs or ())
    window = enf[test.offset : test.offset + len(expected)]
    j = _first_mismatch(window, expected)
    if j is not None:
        return Verdict(False, "actual: enforcer output differs from the model prediction", test.offset + j)
    if len(enf) < test.offset + len(expected):
        return Verdict(False, "actual: enforcer trace too short", len(enf))
    return PASS


@dataclass
class SuiteSamples:
    test_ids: list[str]
    repetitions: int
    # variant -> repetition -> test index -> Execution
    runs: dict[str, list[list[Execution]]]
    # repetition -> test index -> Verdict
    verdicts: list[list[Verdict]]
    meta: dict = field(default_factory=dict)

    def records(self, variant: str):
        for r, rep in enumerate(self.runs[variant]):
            for t, ex in enumerate(rep):
                yield r, t, ex

    def functional_failures(self) -> dict[str, list[dict]]:
        fails: dict[str, list[dict]] = {}
        for r, rep in enumerate(self.verdicts):
            for t, v in enumerate(rep):
                if not v.passed:
                    fails.setdefault(self.test_ids[t], []).append({"repetition": r, **v.to_dict()})
        return fails

    def to_json(self) -> str:
        doc = {
            "meta": self.meta,
            "repetitions": self.repetitions,
            "tests": self.test_ids,
            "runs": {
                variant: [[_execution_dict(ex) for ex in rep] for rep in reps]
                for variant, reps in self.runs.items()
            },
            "verdicts": [[v.to_dict() for v in rep] for rep in self.verdicts],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SuiteSamples":
        doc = json.loads(text)
        runs = {
            variant: [[_execution_from(d) for d in rep] for rep in reps]
            for variant, reps in doc["runs"].items()
        }
        verdicts = [[Verdict(**v) for v in rep] for rep in doc["verdicts"]]
        for variant in (BASELINE, ENFORCER):
            if variant not in runs:
                raise ValueError(f"samples lack the {variant} variant")
        return cls(list(doc["tests"]), int(doc["repetitions"]), runs, verdicts, doc.get("meta", {}))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["test_id", "variant", "repetition", "launch_ms", "max_handler_ms", "peak_memory_kb", "energy_units"])
        for variant in self.runs:
            for r, t, ex in self.records(variant):
                k = ex.kpis
                if k is None:
                    w.writerow([self.test_ids[t], variant, r, "", "", "", ""])
                else:
                    w.writerow([self.test_ids[t], variant, r, k.launch_ms, k.max_handler_ms, k.peak_memory_kb, k.energy_units])
        return buf.getvalue()


def _execution_dict(ex: Execution) -> dict:
    return {
        "api_trace": list(ex.api_trace),
        "req_trace": list(ex.req_trace),
        "kpis": None if ex.kpis is None else {**asdict(ex.kpis), "action_handler_ms": list(ex.kpis.action_handler_ms)},
        "error": ex.error,
    }


def _execution_from(d: dict) -> Execution:
    k = d["kpis"]
    kpis = None
    if k is not None:
        kpis = KpiRecord(k["launch_ms"], tuple(k["action_handler_ms"]), k["peak_memory_kb"], k["energy_units"])
    return Execution(tuple(d["api_trace"]), tuple(d["req_trace"]), kpis, d.get("error"))


def run_suite(
    driver_factory: Callable[[], AppDriver],
    tests: Sequence[ConcreteTest],
    deployments: tuple[Deployment, Deployment],
    config: RunConfig,
    parallel: bool = False,
) -> SuiteSamples:
    """Run every test ``config.repetitions`` times under both deployments.

    Each variant owns a private driver; oracles compare the two variants
    repetition by repetition.
    """
    if not tests:
        raise ValueError("run_suite needs at least one test")
    base_dep, enf_dep = deployments
    alphabet = enf_dep.model.alphabet

    def run_variant(dep: Deployment) -> list[list[Execution]]:
        driver = driver_factory()
        return [[execute_test(driver, dep, t, config) for t in tests] for _ in range(config.repetitions)]

    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fb, fe = pool.submit(run_variant, base_dep), pool.submit(run_variant, enf_dep)
            base_runs, enf_runs = fb.result(), fe.result()
    else:
        base_runs, enf_runs = run_variant(base_dep), run_variant(enf_dep)

    verdicts = []
    for r in range(config.repetitions):
        row = []
        for t, test in enumerate(tests):
            b, e = base_runs[r][t], enf_runs[r][t]
            if b.error or e.error:
                row.append(Verdict(False, f"test error: {b.error or e.error}"))
            else:
                row.append(check_oracle(test, b.api_trace, e.api_trace, alphabet))
        verdicts.append(row)
    meta = {
        "clock": config.clock,
        "energy_alpha": config.energy_alpha,
        "seed": config.seed,
        "fault": str(enf_dep.fault) if enf_dep.fault else None,
        "alphabet": list(alphabet),
        "targets": [list(t.target) for t in tests],
        "oracles": [t.oracle.kind for t in tests],
    }
    return SuiteSamples(
        [f"t{i}" for i in range(len(tests))],
        config.repetitions,
        {BASELINE: base_runs, ENFORCER: enf_runs},
        verdicts,
        meta,
    )
