import functools
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from hypothesis import settings  # noqa: E402

from paylevel.scenarios import builtin  # noqa: E402
from paylevel.sim import run  # noqa: E402

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

CRITERIA: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in CRITERIA:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@functools.cache
def builtin_logs(name: str, leveling: bool = True):
    """Cached run of a built-in scenario, shared across test modules."""
    scenario = replace(builtin(name), leveling=leveling)
    return tuple(run(scenario))
