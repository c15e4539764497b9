import numpy as np
import pytest

from rfppv.activation import gaussian_coefficients, relu

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def relu_coeffs():
    return gaussian_coefficients(relu)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture(scope="session")
def acceptance(request):
    """``record(number, passed, detail)`` for the acceptance summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, passed, detail):
        lines[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(lines[number])

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
