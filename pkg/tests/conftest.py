import numpy as np
import pytest

from wmsense.core_dsp import Origin, SampleBuffer
from wmsense.synth import FS_DEFAULT


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        n, title = mark.args
        detail = dict(item.user_properties).get("detail", "")
        item.config._acceptance[n] = (title, rep.outcome, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, outcome, detail = results[n]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{verdict}] criterion {n}: {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)


@pytest.fixture
def fs():
    return FS_DEFAULT


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def tone(f0, fs=FS_DEFAULT, n=20000, amp=1.0, phase=0.0):
    k = np.arange(n)
    return SampleBuffer(amp * np.cos(2 * np.pi * f0 * k / fs + phase), fs, Origin.SYNTHETIC)
