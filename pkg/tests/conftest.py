_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for name, value in report.user_properties:
        if name == "criterion":
            num, detail = value
            _CRITERIA.append((num, "PASS" if report.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, verdict, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {num:>2}: {verdict}  {detail}")
