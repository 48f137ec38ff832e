_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): exit criterion of the build")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark:
            title = mark.args[1]
            if hasattr(item, "callspec"):
                title += f" [{item.callspec.id}]"
            _criteria[item.nodeid] = [mark.args[0], title, "NOT RUN"]


def pytest_runtest_logreport(report):
    entry = _criteria.get(report.nodeid)
    if entry is None:
        return
    if report.failed:
        entry[2] = "FAIL"
    elif report.when == "call" and report.passed and entry[2] != "FAIL":
        entry[2] = "PASS"
    elif report.skipped:
        entry[2] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid, title, status in sorted(_criteria.values(), key=lambda e: e[0]):
        terminalreporter.write_line(f"{status:4}  {cid}  {title}")

