import time

import pytest

from quadformation import preset, run

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def preset_runs():
    """Full 200 s runs of both presets, timed after a warm-up that loads the compiled kernels."""
    run(preset(2, t_final=0.005))
    out = {}
    for case in (1, 2):
        t0 = time.perf_counter()
        trace = run(preset(case))
        out[case] = (trace, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def case1_trace(preset_runs):
    return preset_runs[1][0]


@pytest.fixture(scope="session")
def case2_trace(preset_runs):
    return preset_runs[2][0]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
