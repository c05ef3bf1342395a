import time

import pytest

from stefanbc.config import parse_scenario
from stefanbc.controller import closed_loop_run

_acceptance_results: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = report.keywords.get("criterion_label")
    if marker is None:
        return
    _acceptance_results[report.nodeid] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.keywords["criterion_label"] = f"criterion {mark.args[0]:>2}: {mark.args[1]}"
            item.user_properties.append(("criterion", item.keywords["criterion_label"]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    labels = {}
    for item in terminalreporter.config._acceptance_items:
        labels[item.nodeid] = item.keywords["criterion_label"]
    terminalreporter.section("acceptance criteria")
    for nodeid, label in sorted(labels.items(), key=lambda kv: kv[1]):
        if nodeid in _acceptance_results:
            terminalreporter.write_line(f"{_acceptance_results[nodeid]}  {label}")


@pytest.hookimpl(trylast=True)
def pytest_collection_finish(session):
    session.config._acceptance_items = [i for i in session.items if i.get_closest_marker("criterion")]


@pytest.fixture(scope="session")
def feasible():
    return parse_scenario("zinc_feasible")


@pytest.fixture(scope="session")
def infeasible():
    return parse_scenario("zinc_infeasible")


@pytest.fixture(scope="session")
def feasible_run(feasible):
    start = time.perf_counter()
    records = closed_loop_run(feasible)
    return records, time.perf_counter() - start


@pytest.fixture(scope="session")
def feasible_trace(feasible_run):
    return feasible_run[0]


@pytest.fixture(scope="session")
def infeasible_trace(infeasible):
    return closed_loop_run(infeasible)
