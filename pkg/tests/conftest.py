import re

from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props and report.when == "call":
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _ACCEPTANCE.append((props.get("criterion", report.nodeid), report.outcome,
                            props.get("title", ""), props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def order(row):
        m = re.match(r"(\d+)(.*)", str(row[0]))
        return (int(m.group(1)), m.group(2)) if m else (10**6, str(row[0]))

    for crit, outcome, title, detail in sorted(_ACCEPTANCE, key=order):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {crit}: {title} | {detail}")
