import pytest

from vanetsim.config import ScenarioConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def small_cfg():
    """A short, dense scenario that runs in well under a second."""
    return ScenarioConfig(
        node_counts=[30], stopped_fractions=[0.3], seeds=[1],
        area_width_m=1000.0, area_height_m=1000.0, sim_duration_s=60.0, flows=5,
    )


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  -- {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
