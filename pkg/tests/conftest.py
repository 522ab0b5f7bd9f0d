import numpy as np
import pytest

from proxcycles import catalog, functions, roots, simons


def scenario_parts(scenario_id):
    """``(f, ops)`` for a built-in scenario."""
    sc = catalog.get(scenario_id)
    return functions.function_from_dict(sc["function"]), simons.build(roots.root_from_dict(sc["root"]))


def grid_sup(points, values, y):
    """``max_i <p_i, y> - v_i``: brute-force conjugate over sampled points."""
    return float(np.max(points @ y - values))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def shift22():
    return simons.build(roots.right_shift(2, 2))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
