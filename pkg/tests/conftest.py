import numpy as np
import pytest
from hypothesis import settings

from lambdaflow.metric import SampledCurve
from lambdaflow.order import cantor_time_change, singular_dilate
from lambdaflow.problems import (
    cantor_scenario,
    degenerate_power_scenario,
    degenerate_solution,
    quadratic_scenario,
    quadratic_solution,
    uniform_grid,
)

DT = 1e-3

# the first call of a jitted kernel compiles it
settings.register_profile("lambdaflow", deadline=None)
settings.load_profile("lambdaflow")


@pytest.fixture(scope="session")
def quad():
    return quadratic_scenario(1)


@pytest.fixture(scope="session")
def degen():
    return degenerate_power_scenario()


@pytest.fixture(scope="session")
def exp_curve():
    t = uniform_grid(1.0, DT)
    return SampledCurve(t, quadratic_solution([1.0], t))


@pytest.fixture(scope="session")
def x_tau():
    """Degenerate solutions ``x_tau`` on ``[0, 2]`` keyed by ``tau``."""
    t = uniform_grid(2.0, DT)
    return {tau: SampledCurve(t, degenerate_solution(tau, t)) for tau in (0.0, 0.1, 0.25, 0.5)}


@pytest.fixture(scope="session")
def cantor():
    sc = cantor_scenario(6)
    w = sc.oracle.minimal_curve(DT, sc.problem.eps_g)
    beta = cantor_time_change(sc.problem, w, 6)
    return sc, w, beta, singular_dilate(w, beta)


def reversed_curve(c):
    return SampledCurve(c.times, c.points[::-1])


def moving_then_frozen(t_move=1.0, horizon=2.0, dt=0.01):
    t = uniform_grid(horizon, dt)
    return SampledCurve(t, np.minimum(t, t_move))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("[")[1].split("]")[0])):
        terminalreporter.write_line(line)
