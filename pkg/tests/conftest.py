import pytest

_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    label = getattr(item.function, "criterion", None)
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE.append((label, report.outcome == "passed"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
    passed = sum(ok for _, ok in _ACCEPTANCE)
    terminalreporter.write_line(f"{passed}/{len(_ACCEPTANCE)} criteria passed")
