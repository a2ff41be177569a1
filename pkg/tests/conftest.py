import time

import pytest

from lattice_ppt import census

# criterion number -> list of (label, passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record_criterion(number: int, label: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE.setdefault(number, []).append((label, bool(passed), detail))


def pytest_addoption(parser):
    parser.addoption("--run-long", action="store_true", default=False, help="run flag-gated long checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "long: long-running check, needs --run-long")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-long"):
        return
    skip = pytest.mark.skip(reason="long-running; pass --run-long")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p for _, p, _ in parts)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}")
        for label, passed, detail in parts:
            mark = "pass" if passed else "FAIL"
            terminalreporter.write_line(f"    [{mark}] {label}" + (f" ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def store(tmp_path_factory):
    return census.ResultCache(tmp_path_factory.mktemp("records"))


@pytest.fixture(scope="session")
def quad_census(store):
    start = time.perf_counter()
    result = census.enumerate_quadruples_t2(store, timestamp=False)
    result.elapsed = time.perf_counter() - start
    return result


@pytest.fixture(scope="session")
def t3_samples(store):
    start = time.perf_counter()
    six = census.random_sample_census(3, 6, 500, seed=0, cache=store)
    seven = census.random_sample_census(3, 7, 200, seed=1, cache=store)
    return six, seven, time.perf_counter() - start
