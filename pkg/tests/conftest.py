import pytest

_ACCEPTANCE = {}


class AcceptanceLog:
    def record(self, criterion: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
