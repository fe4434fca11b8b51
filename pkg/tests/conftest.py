import numpy as np
import pytest

from bbmh.sbp import GridSpec, build_upwind_operators

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=[2, 3, 4], ids=lambda o: f"order{o}")
def order(request):
    return request.param


@pytest.fixture
def unit_ops(order):
    return build_upwind_operators(GridSpec(0.0, 1.0, 32), order)


@pytest.fixture(scope="session")
def soliton_ops():
    grid = GridSpec(-90.0, 90.0, 256)
    return grid, build_upwind_operators(grid, 4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
