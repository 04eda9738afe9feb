import pytest

from twistlab.cusp_form import generate_coefficients


@pytest.fixture(scope="session")
def coeffs():
    # covers the longest consumer: the first moment at p = 13 with X = sqrt(13)
    return generate_coefficients(200_000)


@pytest.fixture(scope="session")
def small_coeffs():
    return generate_coefficients(4000)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    def record(criterion: int, passed: bool, text: str) -> None:
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {text}"
        ACCEPTANCE_LINES[criterion] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
