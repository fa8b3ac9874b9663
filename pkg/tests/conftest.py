import numpy as np
import pytest

from lcmpc.simulator import Mode, SimulationConfig, run_closed_loop


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def paper_cfg():
    return SimulationConfig()


@pytest.fixture(scope="session")
def compensated_log(paper_cfg):
    return run_closed_loop(paper_cfg)


@pytest.fixture(scope="session")
def uncompensated_log(paper_cfg):
    import dataclasses
    return run_closed_loop(dataclasses.replace(paper_cfg, mode=Mode.UNCOMPENSATED))


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number, title, passed, detail):
        line = f"AC{number:<2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
