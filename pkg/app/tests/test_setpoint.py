import numpy as np
import pytest

from app.control.ems import regret, setpoint_grid
from app.control.setpoint import (
    check_nonoverlap,
    check_requirements,
    constant_setpoints,
    resolve_p_rated,
    storage_rho_bounds,
)
from app.core.exception import ConfigurationError, InvalidArgument
from app.schemas.bands import GridState
from app.schemas.fleet import FleetParams, RenewableUnit, SetpointLimits, ThermalUnit
from app.schemas.scenario import DisturbanceTrajectory
from app.tests.conftest import RATED, case_study_bounds, make_bounds


def test_case_study_setpoints(u_star):
    np.testing.assert_allclose(u_star.u_t, [-0.8])
    np.testing.assert_allclose(u_star.u_s, [0.0])
    np.testing.assert_allclose(u_star.u_r, [2.2, 1.55])
    np.testing.assert_array_equal(u_star.delta_t, [1])


def test_storage_rho_bounds(params):
    bounds = storage_rho_bounds(params)
    assert (bounds.rho_min_s, bounds.rho_max_s) == (-1.0, 1.0)


def test_storage_rho_bounds_need_storage():
    with pytest.raises(InvalidArgument):
        storage_rho_bounds(FleetParams(thermal=[ThermalUnit(p_min=0.2, p_max=1.0)]))


def test_setpoints_outside_limits_are_a_configuration_error(params):
    with pytest.raises(ConfigurationError):
        constant_setpoints(params, RATED, SetpointLimits(u_min=-5.0, u_max=2.0))


def test_resolve_p_rated_precedence(params):
    np.testing.assert_array_equal(resolve_p_rated(params, explicit=[1.0, 0.5]), [1.0, 0.5])
    np.testing.assert_array_equal(resolve_p_rated(params), RATED)


def test_resolve_p_rated_falls_back_to_forecast():
    params = FleetParams(renewable=[RenewableUnit(), RenewableUnit(p_rated=0.4)])
    bounds = make_bounds([[0.0, 0.0], [0.1, 0.2]], [[0.7, 0.3], [0.9, 0.35]], [[-0.5], [-0.5]], [[-0.4], [-0.4]])
    np.testing.assert_allclose(resolve_p_rated(params, bounds=bounds), [0.9, 0.4])
    with pytest.raises(ConfigurationError):
        resolve_p_rated(params)


def test_requirements_hold_for_day1_bounds(params, day1_bounds):
    report = check_requirements(params, day1_bounds)
    assert report.passed
    assert report.requirement_1 == "assumed"
    assert len(report.rows) == 2 * 25
    assert report.failed_steps == []


def test_requirements_flag_excess_load(params):
    bounds = make_bounds([[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]], [[-1.2], [-0.5]], [[-0.1], [-0.4]])
    report = check_requirements(params, bounds)
    assert not report.passed
    assert report.failed_steps == [0]
    failed = [row for row in report.rows if not row.passed]
    assert {(row.profile, row.requirement_2, row.requirement_3) for row in failed} == {
        ("w_min", False, True),
        ("w_max", True, False),
    }


def test_droop_regions_are_ordered_for_case_study(params, u_star):
    report = check_nonoverlap(u_star, params, ([0.0, 0.0], [1.2, 0.55]), ([0.0], [6.0]))
    assert report.passed
    assert report.hulls["thermal"] == pytest.approx((1.0, 1.8))
    assert report.hulls["storage"] == pytest.approx((-1.0, 1.0))
    assert report.hulls["renewable"] == pytest.approx((-2.2, -1.0))


def test_shifted_storage_setpoint_overlaps_thermal(params, u_star):
    shifted = u_star.model_copy(update={"u_s": np.array([-0.5])})
    report = check_nonoverlap(shifted, params, ([0.0, 0.0], [1.2, 0.55]), ([0.0], [6.0]))
    assert not report.passed
    assert ("storage", "thermal") in report.overlapping_pairs


def _random_case_study_trajectory(rng: np.random.Generator, steps: int) -> DisturbanceTrajectory:
    bounds = case_study_bounds(rng, steps, spread=0.0)
    return bounds.lower


@pytest.mark.parametrize("np_steps, radius", [(1, 2), (2, 1)])
def test_constant_setpoints_match_grid_optimum(params, common_weights, u_star, np_steps, radius):
    rng = np.random.default_rng(np_steps)
    grid = setpoint_grid(u_star, spacing=0.5, radius=radius)
    for _ in range(4 if np_steps == 1 else 1):
        w = _random_case_study_trajectory(rng, np_steps)
        state = GridState(x=[rng.uniform(0.0, 6.0)], delta_prev=[1])
        report = regret(
            (u_star, np.ones((1, np_steps))), {"w": w}, state, params, common_weights, grid, free_commitment=False
        )
        assert report.max_regret <= 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("np_steps, radius", [(1, 3), (2, 2), (3, 1)])
def test_constant_setpoints_match_fine_grid_optimum(params, common_weights, u_star, np_steps, radius):
    rng = np.random.default_rng(100 + np_steps)
    # renewables sit at their available power for every grid value near u_r
    grid = setpoint_grid(u_star, spacing=0.01, radius=radius).model_copy(
        update={"u_r": [np.array([v]) for v in u_star.u_r]}
    )
    for _ in range(200):
        w = _random_case_study_trajectory(rng, np_steps)
        state = GridState(x=[rng.uniform(0.0, 6.0)], delta_prev=[1])
        report = regret(
            (u_star, np.ones((1, np_steps))), {"w": w}, state, params, common_weights, grid, free_commitment=False
        )
        assert report.max_regret <= 1e-6
        assert report.evaluated_controls == grid.per_step ** np_steps
