import hypothesis
import pytest

from enftest import fixture_text
from enftest.appsim import SimDriver, load_app_spec
from enftest.model import parse_model, parse_monitor

hypothesis.settings.register_profile("fast", max_examples=20)
hypothesis.settings.register_profile("thorough", max_examples=500)

CAMERA = fixture_text("camera.model")

OPEN, RELEASE, PAUSE = "camera.open", "camera.release", "activity.onPause"


@pytest.fixture
def camera():
    return parse_model(CAMERA)


@pytest.fixture
def monitor():
    return parse_monitor(fixture_text("camera.monitor"))


@pytest.fixture
def compliant_spec():
    return load_app_spec(fixture_text("foocam-mini-compliant.json"))


@pytest.fixture
def leaky_spec():
    return load_app_spec(fixture_text("foocam-mini-leaky.json"))


@pytest.fixture
def compliant(compliant_spec):
    return SimDriver(compliant_spec)


@pytest.fixture
def leaky(leaky_spec):
    return SimDriver(leaky_spec)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in RESULTS.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
