import pytest

from pargpu.config import default_config, replace
from pargpu.trace import parse_trace

MINIMAL = "KERNEL k1\nCTA 0\nWARP 0\nALU 4\nEXIT\n"

# acceptance lines collected by test_acceptance and echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def cfg():
    return default_config()


@pytest.fixture
def small_cfg():
    """Four SMs and two memory partitions; quick to simulate."""
    return replace(default_config(), num_sms=4, num_mem_partitions=2, l2_total_size_bytes=256 * 1024)


@pytest.fixture
def minimal_program():
    return parse_trace(MINIMAL)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
