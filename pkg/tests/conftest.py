"""Collects acceptance outcomes and prints one verdict line per criterion."""

_VERDICTS = {}


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    props = dict(report.user_properties)
    name = props.get("criterion")
    if name is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _VERDICTS[name] = ("PASS" if report.passed else "FAIL", props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_VERDICTS, key=lambda n: int(n.split()[1])):
        verdict, detail = _VERDICTS[name]
        terminalreporter.write_line(f"{verdict}  {name}: {detail}")
