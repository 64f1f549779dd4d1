"""Acceptance criteria, one check per criterion.

Each ``acN`` function returns ``(passed, detail)``.  Under pytest every
criterion is a test and a one-line summary per criterion is printed at the end
of the session; ``python3 tests/test_acceptance.py`` prints the same lines.
"""

import filecmp
import json
import random
import sys
import tempfile
from pathlib import Path

import pytest

from enftest import fixture_path, fixture_text
from enftest.appsim import load_app_spec
from enftest.cli import EXIT_OK, PipelineConfig, run_pipeline
from enftest.concretize import concretize_suite
from enftest.experiments import COMPLIANT, LEAKY, camera_setup, fault_matrix
from enftest.hsi import generate_hsi_suite, separating_families, transition_cover
from enftest.model import Violated, check_policy, is_defined, parse_model, run_from, run_trace
from enftest.perf import DEGRADED, OK, Aggregates, compare, overhead_pct
from enftest.randmodels import random_model
from enftest.runner import BASELINE, ENFORCER, EnforcerCosts, RunConfig

OPEN, RELEASE, PAUSE = "camera.open", "camera.release", "activity.onPause"
RESULTS: dict[str, tuple[bool, str]] = {}


def _filter(trace, alphabet):
    return [e for e in trace if e in alphabet]


def ac1():
    model = parse_model(fixture_text("camera.model"))
    got = {tuple(s) for s in generate_hsi_suite(model).sequences}
    want = {
        (PAUSE,),
        (OPEN, PAUSE),
        (PAUSE, PAUSE),
        (OPEN, RELEASE, PAUSE),
        (OPEN, PAUSE, PAUSE),
    }
    return got == want, f"{len(got)} sequences, missing {sorted(want - got)}, extra {sorted(got - want)}"


def ac2():
    setup = camera_setup(COMPLIANT)
    target = (OPEN, RELEASE, PAUSE)
    res = concretize_suite(setup.gui, setup.driver(), setup.model, [target], 10)
    if not res.tests:
        return False, "target uncoverable"
    t = res.tests[0]
    path = [a.encode() for a in t.actions]
    ok = path == ["touch(Allow)", "touch(Allow)", "keyEvent(Back)"] and t.candidate_rank == 1
    return ok, f"path {path} at rank {t.candidate_rank}"


def ac3():
    base_peak = load_app_spec(fixture_text(LEAKY)).launch_cost.alloc_kb
    frac = EnforcerCosts().bookkeeping_kb / base_peak * 100
    with tempfile.TemporaryDirectory() as d:
        cfg = PipelineConfig(fixture_path("camera.model"), fixture_path(LEAKY), fixture_path("camera.monitor"),
                             repetitions=10, out=Path(d))
        code = run_pipeline(cfg)
        report = json.loads((Path(d) / "report.json").read_text())
    fails = report["functional"]["failing_tests"]
    degraded = [k["name"] for k in report["kpis"] if k["verdict"] == DEGRADED]
    ok = code == EXIT_OK and not fails and not degraded and frac < 5
    return ok, f"exit {code}, functional failures {fails}, degraded {degraded}, bookkeeping {frac:.2f}% of peak"


def ac4():
    setup = camera_setup(LEAKY)
    reports = fault_matrix(setup, RunConfig(repetitions=10), energy_pct=14.0, memory_pct=6.0)
    expected = {
        "none": [],
        "responsivenessDelay": ["responsiveness"],
        "startupDelay": ["launch_time"],
        "cpuHog": ["energy"],
        "memoryLeak": ["memory"],
    }
    got = {name: r.degraded() for name, r in reports.items()}
    energy = next(k for k in reports["cpuHog"].kpis if k.name == "energy")
    memory = next(k for k in reports["memoryLeak"].kpis if k.name == "memory")
    e_pct, m_pct = overhead_pct(energy), overhead_pct(memory)
    functional = all(r.functional_ok for r in reports.values())
    ok = got == expected and abs(e_pct - 14.0) < 1e-9 and abs(m_pct - 6.0) < 1e-6 and functional
    return ok, f"flags {got}; cpuHog energy +{e_pct:.6f}%, memoryLeak memory +{m_pct:.6f}%"


def _leaky_samples():
    setup = camera_setup(LEAKY)
    return setup, setup.run(config=RunConfig(repetitions=10))


def ac5():
    setup, samples = _leaky_samples()
    alpha = set(setup.monitor.alphabet)
    verdicts = {
        v: [check_policy(setup.monitor, _filter(ex.api_trace, alpha)) for _, _, ex in samples.records(v)]
        for v in (BASELINE, ENFORCER)
    }
    enf_bad = sum(isinstance(x, Violated) for x in verdicts[ENFORCER])
    base_bad = sum(isinstance(x, Violated) for x in verdicts[BASELINE])
    ok = enf_bad == 0 and base_bad >= 1
    return ok, f"enforcer violations {enf_bad}/{len(verdicts[ENFORCER])}, baseline violations {base_bad}"


def ac6():
    setup, samples = _leaky_samples()
    alpha = setup.model.alphabet
    mismatches, total = 0, 0
    for _, _, ex in samples.records(ENFORCER):
        total += 1
        expected = run_trace(setup.model, _filter(ex.req_trace, alpha)).outputs
        if ex.error or tuple(_filter(ex.api_trace, alpha)) != expected:
            mismatches += 1
    return mismatches == 0 and total == 10 * len(setup.tests), f"{total - mismatches}/{total} executions conform"


def _ac7_clauses(model):
    cover = transition_cover(model)
    finals = set()
    for p in (p for p in cover if p):
        state = model.initial
        for a in p[:-1]:
            state = model.transitions[(state, a)][1]
        finals.add((state, p[-1]))
    covered = finals == set(model.transitions)
    fam = separating_families(model)
    separated = all(
        run_from(model, si, w).outputs != run_from(model, sj, w).outputs
        and is_defined(model, si, w) and is_defined(model, sj, w)
        for (si, sj), w in fam.separators.items()
    )
    seqs = list(generate_hsi_suite(model).sequences)
    prefix_free = not any(a != b and b[: len(a)] == a for a in seqs for b in seqs)
    defined = all(is_defined(model, model.initial, s) for s in seqs)
    return {"cover": covered, "separators": separated, "prefix_free": prefix_free, "defined": defined}


def ac7():
    rng = random.Random(20240601)
    counts = {"cover": 0, "separators": 0, "prefix_free": 0, "defined": 0}
    full = 0
    for _ in range(100):
        clauses = _ac7_clauses(random_model(rng, max_states=6, max_inputs=4))
        for k, v in clauses.items():
            counts[k] += v
        full += all(clauses.values())
    detail = ", ".join(f"{k} {v}/100" for k, v in counts.items())
    return full == 100, f"{full}/100 machines pass every clause ({detail})"


def ac8():
    names = ("suite.json", "gui-model.json", "tests.json", "samples.json", "samples.csv", "report.json", "report.txt")
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        for d in (a, b):
            run_pipeline(PipelineConfig(fixture_path("camera.model"), fixture_path(LEAKY),
                                        fixture_path("camera.monitor"), seed=7, out=Path(d)))
        match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    return not mismatch and not errors, f"identical {match}, differing {mismatch + errors}"


def _agg(handler=50.0, launch=800.0, memory=100000.0, energy=1000.0):
    return Aggregates(launch, handler, memory, energy)


THRESHOLD_TABLE = [
    # (baseline, enforcer, kpi, verdict)
    (_agg(handler=50), _agg(handler=200), "responsiveness", OK),
    (_agg(handler=50), _agg(handler=200.5), "responsiveness", DEGRADED),
    (_agg(handler=50), _agg(handler=250), "responsiveness", DEGRADED),
    (_agg(handler=210), _agg(handler=260), "responsiveness", OK),
    (_agg(launch=800), _agg(launch=5000), "launch_time", OK),
    (_agg(launch=800), _agg(launch=5000.5), "launch_time", DEGRADED),
    (_agg(launch=5200), _agg(launch=6000), "launch_time", OK),
    (_agg(memory=100000), _agg(memory=105000), "memory", OK),
    (_agg(memory=100000), _agg(memory=105001), "memory", DEGRADED),
    (_agg(memory=100000), _agg(memory=104000), "memory", OK),
    (_agg(energy=1000), _agg(energy=1050), "energy", OK),
    (_agg(energy=1000), _agg(energy=1140), "energy", DEGRADED),
    (_agg(energy=1000), _agg(energy=900), "energy", OK),
]


def ac9():
    wrong = []
    for base, enf, name, want in THRESHOLD_TABLE:
        got = next(k.verdict for k in compare(base, enf).kpis if k.name == name)
        if got != want:
            wrong.append((name, enf, got))
    return not wrong, f"{len(THRESHOLD_TABLE) - len(wrong)}/{len(THRESHOLD_TABLE)} rows agree"


CRITERIA = {
    "AC1 HSI exactness": ac1,
    "AC2 concretization fidelity": ac2,
    "AC3 clean-enforcer gate": ac3,
    "AC4 fault detection matrix": ac4,
    "AC5 policy restoration": ac5,
    "AC6 model-conformance oracle": ac6,
    "AC7 HSI property suite": ac7,
    "AC8 determinism": ac8,
    "AC9 threshold rules": ac9,
}


@pytest.mark.parametrize("name", list(CRITERIA))
def test_criterion(name):
    ok, detail = CRITERIA[name]()
    RESULTS[name] = (ok, detail)
    assert ok, detail


if __name__ == "__main__":
    import contextlib, io, logging

    logging.basicConfig(level=logging.ERROR)
    failed = 0
    for name, fn in CRITERIA.items():
        with contextlib.redirect_stdout(io.StringIO()):
            ok, detail = fn()
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    sys.exit(1 if failed else 0)
