import pytest

from dirac_soliton.contraction import ContractionConfig, fixed_point_solve
from dirac_soliton.ground_state import solve_ground_state
from dirac_soliton.linear_operator import LinearizedOp
from dirac_soliton.nonlinearity import NonlinearContext
from dirac_soliton.radial_core import make_grid


@pytest.fixture(scope="session")
def grid20():
    return make_grid(20.0, 4000)


@pytest.fixture(scope="session")
def coarse_grid():
    return make_grid(20.0, 1000)


@pytest.fixture(scope="session")
def ground_states(grid20):
    return {theta: solve_ground_state(theta, grid20) for theta in (1.0, 1.5)}


@pytest.fixture(scope="session")
def gs1(ground_states):
    return ground_states[1.0]


@pytest.fixture(scope="session")
def gs_coarse(coarse_grid):
    return solve_ground_state(1.0, coarse_grid)


@pytest.fixture(scope="session")
def op1(gs1):
    return LinearizedOp.from_ground_state(gs1)


@pytest.fixture(scope="session")
def op_coarse(gs_coarse):
    return LinearizedOp.from_ground_state(gs_coarse)


@pytest.fixture(scope="session")
def fixed_points(ground_states):
    """Converged corrections keyed by (theta, eps)."""
    cases = {(1.0, 1e-3): "picard", (1.5, 1e-3): "picard", (1.5, 1e-2): "newton"}
    out = {}
    for (theta, eps), iteration in cases.items():
        gs = ground_states[theta]
        ctx = NonlinearContext(theta, eps, gs)
        op = LinearizedOp.from_ground_state(gs)
        point = fixed_point_solve(ctx, op, ContractionConfig(iteration=iteration))
        out[(theta, eps)] = (ctx, op, point)
    return out


@pytest.fixture(scope="session")
def shot_theta1(fixed_points, gs1):
    """Shooting solution at theta = 1, eps = 1e-3 and its rescaled counterpart."""
    from dirac_soliton.diagnostics import physical_grid, rescale_to_physical
    from dirac_soliton.shooting import shoot_dirac

    _, _, point = fixed_points[(1.0, 1e-3)]
    rescaled = rescale_to_physical(point.pair, gs1)
    shot = shoot_dirac(0.499, 1.0, physical_grid(gs1, 1e-3), guess=rescaled.g0)
    return rescaled, shot


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines, key=str):
        terminalreporter.write_line(lines[key])
