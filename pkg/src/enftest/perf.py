"""Median aggregation of KPI samples and threshold-based degradation verdicts."""

from __future__ import annotations

import json
import statistics
from dataclasses import asdict, dataclass, field, fields

from .runner import BASELINE, ENFORCER, SuiteSamples

OK = "ok"
DEGRADED = "degraded"


@dataclass(frozen=True)
class Thresholds:
    responsiveness_ms: float = 200.0
    launch_ms: float = 5000.0
    memory_overhead_pct: float = 5.0
    energy_overhead_pct: float = 5.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"threshold {f.name} must be positive")

    @classmethod
    def merged(cls, *overrides: dict) -> "Thresholds":
        """Defaults, then each override dict in turn (later wins)."""
        values = asdict(cls())
        for o in overrides:
            for k, v in (o or {}).items():
                if k not in values:
                    raise ValueError(f"unknown threshold {k!r}")
                values[k] = float(v)
        return cls(**values)


@dataclass(frozen=True)
class Aggregates:
    launch_ms: float
    max_handler_ms: float
    peak_memory_kb: float
    energy_units: float
    # per-repetition suite-level values the medians were taken over
    samples: dict = field(default_factory=dict, compare=False)
    per_test: dict = field(default_factory=dict, compare=False)


def aggregate_medians(samples: SuiteSamples) -> dict[str, Aggregates]:
    return {v: _aggregate(samples, v) for v in samples.runs}


def _aggregate(samples: SuiteSamples, variant: str) -> Aggregates:
    reps = samples.runs[variant]
    if not reps or not any(ex.kpis for rep in reps for ex in rep):
        raise ValueError(f"no KPI samples for variant {variant!r}")
    launch, memory, energy = [], [], []
    handlers: dict[tuple[int, int], list[float]] = {}
    for rep in reps:
        kpis = [(t, ex.kpis) for t, ex in enumerate(rep) if ex.kpis is not None]
        if not kpis:
            continue
        launch.append(kpis[0][1].launch_ms)
        memory.append(max(k.peak_memory_kb for _, k in kpis))
        energy.append(sum(k.energy_units for _, k in kpis))
        for t, k in kpis:
            for pos, h in enumerate(k.action_handler_ms):
                handlers.setdefault((t, pos), []).append(h)
    handler_medians = {key: statistics.median(v) for key, v in handlers.items()}
    per_test: dict[str, dict] = {}
    for t, tid in enumerate(samples.test_ids):
        ks = [rep[t].kpis for rep in reps if rep[t].kpis is not None]
        if not ks:
            continue
        per_test[tid] = {
            "max_handler_ms": max((m for (tt, _), m in handler_medians.items() if tt == t), default=0.0),
            "peak_memory_kb": statistics.median(k.peak_memory_kb for k in ks),
            "energy_units": statistics.median(k.energy_units for k in ks),
        }
    return Aggregates(
        launch_ms=statistics.median(launch),
        max_handler_ms=max(handler_medians.values(), default=0.0),
        peak_memory_kb=statistics.median(memory),
        energy_units=statistics.median(energy),
        samples={"launch_ms": launch, "peak_memory_kb": memory, "energy_units": energy},
        per_test=per_test,
    )


@dataclass(frozen=True)
class KpiEntry:
    name: str
    baseline: float
    enforcer: float
    threshold: float
    verdict: str
    detail: str = ""


@dataclass
class DegradationReport:
    kpis: list[KpiEntry]
    functional: dict = field(default_factory=lambda: {"status": "pass", "failing_tests": []})
    samples: dict = field(default_factory=dict)

    @property
    def overall(self) -> str:
        return DEGRADED if any(k.verdict == DEGRADED for k in self.kpis) else OK

    @property
    def functional_ok(self) -> bool:
        return self.functional.get("status") == "pass"

    def degraded(self) -> list[str]:
        return [k.name for k in self.kpis if k.verdict == DEGRADED]

    @property
    def exit_code(self) -> int:
        return 0 if self.overall == OK and self.functional_ok else 1


def _absolute(name, base, enf, limit) -> KpiEntry:
    degraded = enf > limit and base <= limit
    if degraded:
        detail = f"{enf:g} > {limit:g} only with the enforcer"
    elif enf > limit:
        detail = f"baseline already exceeds {limit:g}"
    else:
        detail = f"{enf:g} <= {limit:g}"
    return KpiEntry(name, base, enf, limit, DEGRADED if degraded else OK, detail)


def _relative(name, base, enf, limit_pct) -> KpiEntry:
    if base == 0:
        if enf == 0:
            return KpiEntry(name, base, enf, limit_pct, OK, "both zero")
        return KpiEntry(name, base, enf, limit_pct, DEGRADED, "undefined relative overhead (baseline is 0)")
    pct = (enf - base) / base * 100.0
    verdict = DEGRADED if pct > limit_pct else OK
    return KpiEntry(name, base, enf, limit_pct, verdict, f"overhead {pct:.4f}%")


def overhead_pct(entry: KpiEntry) -> float:
    return (entry.enforcer - entry.baseline) / entry.baseline * 100.0


def compare(base: Aggregates, enf: Aggregates, t: Thresholds = Thresholds()) -> DegradationReport:
    return DegradationReport(
        kpis=[
            _absolute("responsiveness", base.max_handler_ms, enf.max_handler_ms, t.responsiveness_ms),
            _absolute("launch_time", base.launch_ms, enf.launch_ms, t.launch_ms),
            _relative("memory", base.peak_memory_kb, enf.peak_memory_kb, t.memory_overhead_pct),
            _relative("energy", base.energy_units, enf.energy_units, t.energy_overhead_pct),
        ]
    )


def build_report(samples: SuiteSamples, t: Thresholds = Thresholds(), policy_violations=None) -> DegradationReport:
    agg = aggregate_medians(samples)
    report = compare(agg[BASELINE], agg[ENFORCER], t)
    failures = samples.functional_failures()
    report.functional = {
        "status": "fail" if failures or policy_violations else "pass",
        "failing_tests": sorted(failures),
        "failures": failures,
    }
    if policy_violations is not None:
        report.functional["policy_violations"] = policy_violations
    report.samples = {
        variant: {**a.samples, "per_test": a.per_test} for variant, a in agg.items()
    }
    return report


def render_report(r: DegradationReport) -> tuple[str, str]:
    """Return (JSON document, aligned text table)."""
    doc = {
        "kpis": [asdict(k) for k in r.kpis],
        "overall": r.overall,
        "functional": r.functional,
        "exit_code": r.exit_code,
        "samples": r.samples,
    }
    rows = [("kpi", "baseline", "enforcer", "threshold", "verdict", "detail")]
    for k in r.kpis:
        rows.append((k.name, f"{k.baseline:.2f}", f"{k.enforcer:.2f}", f"{k.threshold:g}", k.verdict, k.detail))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    lines.append("")
    lines.append(f"overall: {r.overall}")
    fails = r.functional.get("failing_tests", [])
    lines.append(f"functional: {r.functional.get('status')}" + (f" ({', '.join(fails)})" if fails else ""))
    if r.functional.get("policy_violations"):
        lines.append(f"policy violations: {len(r.functional['policy_violations'])}")
    return json.dumps(doc, indent=2, sort_keys=True) + "\n", "\n".join(lines) + "\n"
