import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


_VERDICTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    n = props["criterion"]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _VERDICTS[n] = (props["title"], report.passed, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        title, ok, detail = _VERDICTS[n]
        line = f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
