import sys
from collections import defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> {"title": str, "outcomes": [(nodeid, passed)]}
_CRITERIA: dict[int, dict] = defaultdict(lambda: {"title": "", "outcomes": []})


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _CRITERIA[mark.args[0]]["title"] = mark.args[1]


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    mark = dict(report.user_properties).get("criterion")
    if mark is not None:
        _CRITERIA[mark]["outcomes"].append((report.nodeid, report.passed))


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark:
        item.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        outcomes = entry["outcomes"]
        failed = [n for n, ok in outcomes if not ok]
        status = "PASS" if outcomes and not failed else "FAIL"
        detail = f"{len(outcomes) - len(failed)}/{len(outcomes)} checks"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']} ({detail})")
        for nodeid in failed:
            terminalreporter.write_line(f"    failed: {nodeid}")
