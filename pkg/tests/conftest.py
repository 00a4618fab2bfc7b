import numpy as np
import pytest

from dprgda import problems


@pytest.fixture
def micro_sensing():
    """3x3, rank-1, 6-measurement instance with a generic point."""
    inst = problems.generate_matrix_sensing(np.random.default_rng(7), p=3, q=3, r=1, n=6, sigma_noise=0.01)
    x = np.random.default_rng(8).standard_normal(inst.dim_x) * 0.5
    return inst, x


@pytest.fixture
def small_saddle():
    return problems.random_quadratic_saddle(np.random.default_rng(3), dim_x=3, dim_y=2, n=10, mu=1.0, L=2.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines.values():
            terminalreporter.write_line(line)
