import json
import statistics

import pytest
from hypothesis import given, strategies as st

from enftest.perf import (
    DEGRADED,
    OK,
    Aggregates,
    Thresholds,
    aggregate_medians,
    build_report,
    compare,
    overhead_pct,
    render_report,
)
from enftest.runner import BASELINE, ENFORCER, Execution, KpiRecord, SuiteSamples, Verdict


def samples_from(base_reps, enf_reps, verdicts=None):
    """Each rep is a list of KpiRecord, one per test."""
    n = len(base_reps[0])
    wrap = lambda reps: [[Execution((), (), k) for k in rep] for rep in reps]
    verdicts = verdicts or [[Verdict(True)] * n for _ in base_reps]
    return SuiteSamples([f"t{i}" for i in range(n)], len(base_reps), {BASELINE: wrap(base_reps), ENFORCER: wrap(enf_reps)}, verdicts)


def kpi(launch=800, handlers=(50,), memory=1000, energy=100):
    return KpiRecord(launch, tuple(handlers), memory, energy)


def agg(launch=800, handler=50, memory=1000, energy=100):
    return Aggregates(launch, handler, memory, energy)


def verdicts(report):
    return {k.name: k.verdict for k in report.kpis}


def test_median_of_even_count():
    reps = [[kpi(energy=e)] for e in (1, 2, 3, 4)]
    a = aggregate_medians(samples_from(reps, reps))[BASELINE]
    assert a.energy_units == 2.5


def test_single_repetition_is_its_own_median():
    s = samples_from([[kpi(energy=7, memory=9)]], [[kpi(energy=8, memory=10)]])
    a = aggregate_medians(s)
    assert (a[BASELINE].energy_units, a[ENFORCER].peak_memory_kb) == (7, 10)


def test_suite_level_aggregation():
    rep = [kpi(launch=800, handlers=(10, 90), memory=500, energy=10), kpi(launch=900, handlers=(70,), memory=700, energy=5)]
    a = aggregate_medians(samples_from([rep], [rep]))[BASELINE]
    assert a.launch_ms == 800  # the first test's launch stands for the app
    assert a.max_handler_ms == 90
    assert a.peak_memory_kb == 700
    assert a.energy_units == 15


def test_handler_is_max_of_per_position_medians():
    reps = [[kpi(handlers=(h, 10))] for h in (100, 300, 120)]
    a = aggregate_medians(samples_from(reps, reps))[BASELINE]
    assert a.max_handler_ms == 120


def test_errored_runs_are_excluded():
    base = [[kpi(energy=1)], [kpi(energy=3)]]
    s = samples_from(base, base)
    s.runs[ENFORCER][1][0] = Execution((), (), None, "boom")
    a = aggregate_medians(s)
    assert a[ENFORCER].energy_units == 1
    s.runs[ENFORCER][0][0] = Execution((), (), None, "boom")
    with pytest.raises(ValueError):
        aggregate_medians(s)


def test_examples():
    assert verdicts(compare(agg(energy=100), agg(energy=114)))["energy"] == DEGRADED
    assert verdicts(compare(agg(memory=100000), agg(memory=104000)))["memory"] == OK
    assert verdicts(compare(agg(handler=50), agg(handler=250)))["responsiveness"] == DEGRADED
    assert verdicts(compare(agg(launch=800), agg(launch=6840)))["launch_time"] == DEGRADED


@pytest.mark.parametrize(
    "base,enf,name,expected",
    [
        (agg(handler=50), agg(handler=200), "responsiveness", OK),
        (agg(handler=50), agg(handler=200.001), "responsiveness", DEGRADED),
        (agg(handler=250), agg(handler=300), "responsiveness", OK),  # baseline already slow
        (agg(launch=800), agg(launch=5000), "launch_time", OK),
        (agg(launch=800), agg(launch=5001), "launch_time", DEGRADED),
        (agg(memory=1000), agg(memory=1050), "memory", OK),
        (agg(memory=1000), agg(memory=1050.01), "memory", DEGRADED),
        (agg(energy=200), agg(energy=210), "energy", OK),
        (agg(energy=200), agg(energy=190), "energy", OK),
    ],
)
def test_threshold_boundaries(base, enf, name, expected):
    assert verdicts(compare(base, enf))[name] == expected


def test_zero_baseline():
    r = compare(agg(energy=0), agg(energy=1))
    e = next(k for k in r.kpis if k.name == "energy")
    assert e.verdict == DEGRADED and "undefined" in e.detail
    assert verdicts(compare(agg(energy=0), agg(energy=0)))["energy"] == OK


def test_thresholds():
    t = Thresholds.merged({"energy_overhead_pct": 20}, {"memory_overhead_pct": "1"})
    assert (t.energy_overhead_pct, t.memory_overhead_pct, t.launch_ms) == (20, 1, 5000)
    assert verdicts(compare(agg(energy=100), agg(energy=114), t))["energy"] == OK
    with pytest.raises(ValueError):
        Thresholds.merged({"speed": 1})
    with pytest.raises(ValueError):
        Thresholds(responsiveness_ms=0)


def test_overhead_pct():
    e = next(k for k in compare(agg(memory=200), agg(memory=230)).kpis if k.name == "memory")
    assert overhead_pct(e) == pytest.approx(15.0)


values = st.lists(st.floats(1, 1e6, allow_nan=False), min_size=1, max_size=9)


@given(values, st.randoms())
def test_median_is_permutation_invariant(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    a = aggregate_medians(samples_from([[kpi(energy=x)] for x in xs], [[kpi()]] * len(xs)))[BASELINE]
    b = aggregate_medians(samples_from([[kpi(energy=y)] for y in ys], [[kpi()]] * len(ys)))[BASELINE]
    assert a.energy_units == b.energy_units == statistics.median(xs)


@given(st.floats(1, 1e6), st.floats(0, 1e6), st.floats(0, 1e6))
def test_degradation_is_monotone(base, enf, bump):
    t = Thresholds()
    if verdicts(compare(agg(energy=base), agg(energy=enf), t))["energy"] == DEGRADED:
        assert verdicts(compare(agg(energy=base), agg(energy=enf + bump), t))["energy"] == DEGRADED


def test_build_and_render_report():
    s = samples_from([[kpi(energy=100)], [kpi(energy=100)]], [[kpi(energy=120)], [kpi(energy=120)]],
                     [[Verdict(True)], [Verdict(False, "nope", 0)]])
    r = build_report(s)
    assert r.overall == DEGRADED and r.degraded() == ["energy"]
    assert r.functional["failing_tests"] == ["t0"]
    assert r.exit_code == 1
    text_json, table = render_report(r)
    doc = json.loads(text_json)
    assert doc["overall"] == DEGRADED and doc["exit_code"] == 1
    assert {k["name"] for k in doc["kpis"]} == {"responsiveness", "launch_time", "memory", "energy"}
    assert "energy" in table and "overall: degraded" in table


def test_clean_report_exits_zero():
    s = samples_from([[kpi()]], [[kpi()]])
    r = build_report(s)
    assert r.overall == OK and r.exit_code == 0
    assert build_report(s, policy_violations=[{"test": "t0"}]).exit_code == 1
