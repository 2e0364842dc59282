from __future__ import annotations

_outcomes: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): exit criterion reported in the terminal summary")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            item.user_properties.append(("acceptance", m.args[0]))


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome == "failed":
        for key, name in report.user_properties:
            if key == "acceptance":
                _outcomes[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_outcomes, key=lambda s: int(s.split(".")[0])):
        terminalreporter.write_line(f"{_outcomes[name]}  {name}")
