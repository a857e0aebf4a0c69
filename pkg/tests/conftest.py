"""Collects the acceptance criteria outcomes into one summary block."""

_LINES = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    status = "PASS" if report.passed else "FAIL"
    detail = props.get("detail", "")
    _LINES.append(f"criterion {props['criterion']}: {status} ({props.get('elapsed', report.duration):.2f} s) {detail}")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
