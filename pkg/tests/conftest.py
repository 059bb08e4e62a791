import re

import pytest

from dprkit.config import ProjectConfig

_criteria: dict[int, str] = {}


@pytest.fixture(scope="session")
def ref_cfg():
    return ProjectConfig.load()


@pytest.fixture(scope="session")
def ref_plans(ref_cfg):
    return ref_cfg.plans()


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.failed:
        if report.failed:
            _criteria[n] = "FAIL"
        else:
            _criteria.setdefault(n, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(f"criterion {n:2d}: {_criteria[n]}")
