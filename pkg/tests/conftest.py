from __future__ import annotations

import pytest

_verdicts = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record a one-line verdict for the acceptance summary, then assert it.
    ``ok=None`` marks a criterion that could not be evaluated here."""
    lines = request.config.stash.setdefault(_verdicts, [])

    def record(name: str, ok: bool | None, detail: str = "") -> None:
        tag = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        lines.append(f"{tag}  {name}" + (f"  ({detail})" if detail else ""))
        if ok is None:
            pytest.skip(detail)
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_verdicts, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
