import pytest

from lnwald import datasets

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)
    print(f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if passed else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def cloud():
    return datasets.load("cloud-natural"), datasets.load("cloud-seeded")


@pytest.fixture(scope="session")
def air():
    return datasets.load("air-refinery"), datasets.load("air-baaqmd")
