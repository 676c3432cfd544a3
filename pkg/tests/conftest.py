ACCEPTANCE_MODULE = "test_acceptance"

_results = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and ACCEPTANCE_MODULE in report.nodeid:
        _results[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _results.items():
        terminalreporter.write_line(f"ACCEPTANCE {name}: {outcome.upper()}")
