from pathlib import Path

import pytest

from gridphp.formula_core import FregeProof, exactly_one, incident_edges

DATA = Path(__file__).parent / "data"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        item.config._criteria[mark.args[0]] = (rep.passed, detail, rep.duration)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = config._criteria
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(crit):
        ok, detail, secs = crit[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  ({secs:.1f}s) {detail}")


@pytest.fixture(scope="session")
def depth3_proof():
    return FregeProof.from_text((DATA / "depth3.proof").read_text())


@pytest.fixture(scope="session")
def depth3_axioms():
    # the derivation uses the axioms of two neighbouring nodes of the 451 grid
    return exactly_one(incident_edges(451, (5, 5))) + exactly_one(incident_edges(451, (5, 6)))
