import time

import pytest

from resched.audit import audit_instance
from resched.experiments import DISC_CONFIGS, PROBLEMS, fuzz_instance

FUZZ_SEED = 20240601
FUZZ_COUNT = 500

_criteria: dict[str, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def fuzz_audits():
    """Every fuzzed instance audited under every DISC configuration.

    Returns ``{problem: [(instance, [AuditReport per config])]}`` and the
    wall-clock seconds spent.
    """
    start = time.perf_counter()
    out = {}
    for problem in PROBLEMS:
        rows = []
        for i in range(FUZZ_COUNT):
            inst = fuzz_instance(problem, FUZZ_SEED, i)
            rows.append((inst, [audit_instance(inst, M, beta) for M, beta in DISC_CONFIGS]))
        out[problem] = rows
    return out, time.perf_counter() - start


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[props["criterion"]] = (report.outcome.upper(), props.get("title", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=int):
        outcome, title = _criteria[key]
        verdict = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"criterion {key}: {verdict}  {title}")
