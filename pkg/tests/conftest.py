import re

import pytest

from rydlink.constants import TWO_PI
from rydlink.quantum_core import AtomicSystem, DriveFields


@pytest.fixture
def cs():
    return AtomicSystem.cesium()


@pytest.fixture
def drives():
    return DriveFields(omega_p=TWO_PI * 8e6, omega_c=TWO_PI * 1e6)


_CRITERION = re.compile(r"^(PASS|FAIL) \[\d+\]")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            for name, text in getattr(rep, "sections", []):
                if name.startswith("Captured stdout"):
                    lines += [ln for ln in text.splitlines() if _CRITERION.match(ln)]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda ln: int(ln.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
