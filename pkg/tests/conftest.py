from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fig4_repo():
    from align_retrieve.corpus import load_repo

    return load_repo(FIXTURES / "fig4")


@pytest.fixture
def java_repo():
    from align_retrieve.corpus import load_repo

    return load_repo(FIXTURES / "java_repo")


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, with the measured values each test recorded."""
    reports = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") == "call" and "test_acceptance.py" in rep.nodeid:
                reports.append((rep.nodeid, outcome, dict(rep.user_properties)))
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome, props in sorted(reports, key=lambda r: r[2].get("criterion", 99)):
        label = props.get("label", nodeid.split("::")[-1])
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{props.get('criterion', '?'):>2}] {status}  {label}  {props.get('detail', '')}")
