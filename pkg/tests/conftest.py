import logging
from pathlib import Path

import pytest

from vrdforge.corpus import bundled_corpus_path, load_corpus
from vrdforge.renderer import FontPool

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        if not rep.passed:
            detail = detail or str(rep.longrepr).strip().splitlines()[-1][:160]
        _criteria.append((marker.args[0], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _criteria:
        terminalreporter.write_line(f"{status}  {name}" + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def fonts():
    return FontPool.from_directory()


@pytest.fixture(scope="session")
def spanish_pool():
    return load_corpus(bundled_corpus_path())


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.WARNING, logger="vrdforge")
