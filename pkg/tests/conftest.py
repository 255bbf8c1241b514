import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIOS = os.path.join(ROOT, "scenarios")


import pytest  # noqa: E402


@pytest.fixture(scope="session")
def default_scenario_file():
    return os.path.join(SCENARIOS, "default.ini")


@pytest.fixture(scope="session")
def default_run(default_scenario_file):
    from vtolflight.scenario import load_scenario
    from vtolflight.sim import run_scenario

    return run_scenario(load_scenario(default_scenario_file))


@pytest.fixture(scope="session")
def calm_run():
    from vtolflight.scenario import load_scenario
    from vtolflight.sim import run_scenario

    return run_scenario(load_scenario(os.path.join(SCENARIOS, "calm.ini")))


ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 8


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def report(request):
    """Record the outcome of one acceptance criterion for the run summary."""
    def record(n, ok, detail):
        request.config.stash[ACCEPTANCE][n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[ACCEPTANCE]
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n not in results:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
            continue
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
