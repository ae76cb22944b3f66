from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

# (number, title, passed, detail) appended by the acceptance tests
CRITERIA = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(CRITERIA):
        terminalreporter.write_line(f"[{number:>2}] {'PASS' if passed else 'FAIL'}  {title}: {detail}")
