import numpy as np
import pytest

from tfelab import Field, ModelParams, make_uniform_grid


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])


@pytest.fixture
def unit_parabola():
    """``6x(1-x)`` on (0,1), N=1024."""
    g = make_uniform_grid(0.0, 1.0, 1024)
    return Field.from_function(g, lambda x: 6 * x * (1 - x))


@pytest.fixture
def embedded_parabola():
    """``6x(1-x)_+`` on (-0.5, 1.5), N=2048: contact points sit on faces and
    the walls see a flat film of height zero."""
    g = make_uniform_grid(-0.5, 1.5, 2048)
    return Field.from_function(g, lambda x: 6 * np.maximum(x, 0) * np.maximum(1 - x, 0))


@pytest.fixture
def params_2():
    return ModelParams(1e-2, 2.0)
