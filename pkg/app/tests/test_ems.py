import copy

import numpy as np
import pytest

from app.control.cost import stage_cost
from app.control.dispatch import step
from app.control.ems import (
    commit_over_scenarios,
    prescient_plan,
    receding_horizon_run,
    regret,
    rollout,
    setpoint_grid,
    solve_unit_commitment,
    worst_case_cost,
)
from app.control.scenario import alpha_grid, extreme_set, interpolate, scenario_label
from app.control.setpoint import constant_setpoints
from app.core.exception import EXIT_INFEASIBLE, Infeasible, InvalidArgument, NoFeasiblePlan
from app.schemas.bands import GridState
from app.schemas.cost import CostWeights
from app.schemas.ems import EmsOptions
from app.schemas.enum import Controller, Solver
from app.schemas.fleet import FleetConfig, SetpointLimits
from app.schemas.scenario import DisturbanceTrajectory, ForecastBounds
from app.tests.conftest import CASE_STUDY, RATED, case_study_bounds, random_fleet


def _trajectory(w_r, w_d) -> DisturbanceTrajectory:
    return DisturbanceTrajectory(w_r=w_r, w_d=w_d)


def _opts(np_steps: int, **kwargs) -> EmsOptions:
    kwargs.setdefault("max_switches", np_steps)
    kwargs.setdefault("max_nodes", None)
    return EmsOptions(np_steps=np_steps, **kwargs)


class TestRollout:
    def test_single_step_cost_is_the_stage_cost(self, params, weights, u_star):
        w = _trajectory([[0.6, 0.3]], [[-0.9]])
        state = GridState(x=[2.0], delta_prev=[0])
        total, log = rollout(np.array([[1]]), u_star, w, state, params, weights)

        dispatch, following = step(state, u_star.with_delta([1]), w.sample(0), params)
        assert total == pytest.approx(stage_cost(dispatch, [1], [0], weights), abs=1e-12)
        np.testing.assert_allclose(log.x[0], following.x, atol=1e-12)

    def test_empty_storage_without_thermal_is_infeasible(self, params, weights, u_star):
        w = _trajectory([[0.0, 0.0], [0.0, 0.0]], [[-0.5], [-0.5]])
        with pytest.raises(Infeasible) as e:
            rollout(np.zeros((1, 2)), u_star, w, GridState(x=[0.0], delta_prev=[0]), params, weights, scenario="w_min")
        assert e.value.step == 1
        assert e.value.scenario == "w_min"
        assert e.value.exit_code == EXIT_INFEASIBLE

    def test_plan_shape_is_checked(self, params, weights, u_star):
        w = _trajectory([[0.0, 0.0]], [[-0.5]])
        with pytest.raises(InvalidArgument):
            rollout(np.ones((2, 1)), u_star, w, GridState(x=[2.0], delta_prev=[0]), params, weights)
        with pytest.raises(InvalidArgument):
            rollout(np.ones((1, 3)), u_star, w, GridState(x=[2.0], delta_prev=[0]), params, weights)

    def test_worst_case_is_the_costliest_scenario(self, params, weights, u_star):
        scenarios = {
            "light": _trajectory([[1.0, 0.5], [1.0, 0.5]], [[-0.4], [-0.4]]),
            "heavy": _trajectory([[0.1, 0.0], [0.1, 0.0]], [[-0.9], [-0.9]]),
        }
        delta = np.ones((1, 2))
        state = GridState(x=[3.0], delta_prev=[1])
        costs = [rollout(delta, u_star, w, state, params, weights)[0] for w in scenarios.values()]
        assert worst_case_cost(delta, u_star, scenarios, state, params, weights) == max(costs)
        assert costs[1] > costs[0]


class TestCommitment:
    def test_storage_covers_a_light_load(self, params, weights, u_star):
        scenarios = {"w_min": _trajectory([[0.0, 0.0]], [[-0.5]])}
        plan = commit_over_scenarios(GridState(x=[2.0], delta_prev=[0]), scenarios, u_star, params, weights, _opts(1))
        np.testing.assert_array_equal(plan.delta, [[0]])
        assert plan.worst_case_cost == pytest.approx(0.45)
        assert plan.stats.optimal

    def test_heavy_load_needs_the_thermal_unit(self, params, weights, u_star):
        scenarios = {"w_min": _trajectory([[0.0, 0.0]], [[-1.5]])}
        plan = commit_over_scenarios(GridState(x=[2.0], delta_prev=[0]), scenarios, u_star, params, weights, _opts(1))
        np.testing.assert_array_equal(plan.first, [1])

    def test_no_feasible_plan(self, params, weights, u_star):
        scenarios = {"w_min": _trajectory([[0.0, 0.0]], [[-2.5]])}
        with pytest.raises(NoFeasiblePlan) as e:
            commit_over_scenarios(GridState(x=[2.0], delta_prev=[0]), scenarios, u_star, params, weights, _opts(1))
        assert e.value.exit_code == EXIT_INFEASIBLE

    def test_switch_cap_can_exclude_every_plan(self, params, weights, u_star):
        scenarios = {"w_min": _trajectory([[0.0, 0.0]] * 2, [[-0.5], [-1.5]])}
        state = GridState(x=[2.0], delta_prev=[0])
        with pytest.raises(NoFeasiblePlan):
            commit_over_scenarios(state, scenarios, u_star, params, weights, _opts(2, max_switches=0))
        plan = commit_over_scenarios(state, scenarios, u_star, params, weights, _opts(2, max_switches=1))
        np.testing.assert_array_equal(plan.delta, [[0, 1]])

    def test_binding_switch_cap_is_reported(self, params, weights, u_star):
        # three light steps off pay for a shutdown and a restart
        scenarios = {"w_min": _trajectory([[0.0, 0.0]] * 5, [[-1.5], [-0.3], [-0.3], [-0.3], [-1.5]])}
        state = GridState(x=[6.0], delta_prev=[1])
        free = commit_over_scenarios(state, scenarios, u_star, params, weights, _opts(5))
        np.testing.assert_array_equal(free.delta, [[1, 0, 0, 0, 1]])
        assert free.worst_case_cost == pytest.approx(4.61)

        capped = commit_over_scenarios(state, scenarios, u_star, params, weights, _opts(5, max_switches=1))
        np.testing.assert_array_equal(capped.delta, [[1, 1, 1, 1, 1]])
        assert capped.worst_case_cost == pytest.approx(4.67)
        assert capped.stats.cap_pruned
        assert not capped.stats.optimal

    def test_node_budget_returns_the_incumbent(self, params, weights, u_star):
        rng = np.random.default_rng(2)
        bounds = case_study_bounds(rng, 6)
        opts = _opts(6, max_nodes=1)
        plan = solve_unit_commitment(GridState(x=[3.0], delta_prev=[0]), bounds, u_star, params, weights, opts)
        assert plan.stats.budget_exhausted
        assert not plan.stats.optimal
        np.testing.assert_array_equal(plan.delta, np.ones((1, 6)))

    def test_exhaustive_search_is_size_limited(self, params, weights, u_star):
        bounds = case_study_bounds(np.random.default_rng(0), 21)
        opts = _opts(21, solver=Solver.exhaustive)
        with pytest.raises(InvalidArgument):
            solve_unit_commitment(GridState(x=[3.0], delta_prev=[0]), bounds, u_star, params, weights, opts)

    def test_branch_and_bound_matches_exhaustive_search(self):
        rng = np.random.default_rng(19)
        compared = 0
        for _ in range(100):
            params = random_fleet(rng, n_t=2, n_s=1, n_r=1)
            weights = CostWeights.from_fleet(params)
            u = constant_setpoints(params, params.p_rated, SetpointLimits(u_min=-50.0, u_max=50.0))
            np_steps = 3
            lo = rng.uniform(0.0, float(params.thermal_p_max.sum()), np_steps)
            w_r = rng.uniform(0.0, 0.6, (np_steps, 1))
            bounds = ForecastBounds(
                lower=_trajectory(w_r * 0.5, -(lo + 0.1)[:, None]),
                upper=_trajectory(w_r, -lo[:, None]),
                ts=params.ts,
            )
            state = GridState(x=[rng.uniform(params.x_min[0], params.x_max[0])], delta_prev=rng.integers(0, 2, 2))
            scenarios = extreme_set(bounds)
            results = []
            for solver in (Solver.branch_and_bound, Solver.exhaustive):
                try:
                    results.append(commit_over_scenarios(
                        state, scenarios, u, params, weights, _opts(np_steps, max_switches=6, solver=solver)
                    ))
                except NoFeasiblePlan:
                    results.append(None)
            bnb, brute = results
            assert (bnb is None) == (brute is None)
            if bnb is None:
                continue
            compared += 1
            assert bnb.worst_case_cost == pytest.approx(brute.worst_case_cost, abs=1e-9)
            np.testing.assert_array_equal(bnb.delta, brute.delta)
            assert bnb.stats.optimal
            assert bnb.stats.nodes_explored <= brute.stats.nodes_explored
        assert compared >= 20

    @pytest.mark.parametrize("c_st", [0.5, 0.9, 1.5])
    @pytest.mark.parametrize("max_switches", [1, 2, 8])
    def test_merged_prefixes_keep_the_exhaustive_optimum(self, c_st, max_switches):
        config = copy.deepcopy(CASE_STUDY)
        config["storage"][0]["c_st"] = c_st
        params = FleetConfig.model_validate(config).params
        weights = CostWeights.from_fleet(params)
        u = constant_setpoints(params, RATED)
        rng = np.random.default_rng(int(10 * c_st) + max_switches)
        for _ in range(4):
            bounds = case_study_bounds(rng, 8, spread=0.15)
            state = GridState(x=[rng.uniform(0.0, 6.0)], delta_prev=[int(rng.integers(0, 2))])
            results = []
            for solver in (Solver.branch_and_bound, Solver.exhaustive):
                try:
                    results.append(solve_unit_commitment(
                        state, bounds, u, params, weights, _opts(8, max_switches=max_switches, solver=solver)
                    ))
                except NoFeasiblePlan:
                    results.append(None)
            bnb, brute = results
            assert (bnb is None) == (brute is None)
            if bnb is None:
                continue
            assert bnb.worst_case_cost == pytest.approx(brute.worst_case_cost, abs=1e-9)
            np.testing.assert_array_equal(bnb.delta, brute.delta)
            assert bnb.stats.nodes_explored < brute.stats.nodes_explored

    def test_more_scenarios_never_lower_the_worst_case(self, params, weights, u_star):
        rng = np.random.default_rng(4)
        state = GridState(x=[2.5], delta_prev=[1])
        for _ in range(5):
            bounds = case_study_bounds(rng, 4)
            extremes = extreme_set(bounds)
            one = commit_over_scenarios(state, {"w_min": extremes["w_min"]}, u_star, params, weights, _opts(4))
            both = commit_over_scenarios(state, extremes, u_star, params, weights, _opts(4))
            assert both.worst_case_cost >= one.worst_case_cost - 1e-9

    def test_extremes_plan_is_feasible_for_every_interpolated_scenario(self, params, weights, u_star):
        rng = np.random.default_rng(8)
        state = GridState(x=[1.0], delta_prev=[0])
        for _ in range(5):
            bounds = case_study_bounds(rng, 4, spread=0.15)
            plan = solve_unit_commitment(state, bounds, u_star, params, weights, _opts(4))
            for alpha in alpha_grid():
                _, log = rollout(plan.delta, u_star, interpolate(bounds, alpha), state, params, weights)
                assert len(log) == 4

    def test_prescient_plan_is_never_worse_on_the_realization(self, params, weights, u_star):
        rng = np.random.default_rng(13)
        state = GridState(x=[4.0], delta_prev=[1])
        for _ in range(5):
            bounds = case_study_bounds(rng, 4)
            w_actual = interpolate(bounds, float(rng.uniform()))
            robust = solve_unit_commitment(state, bounds, u_star, params, weights, _opts(4))
            oracle = prescient_plan(state, w_actual, u_star, params, weights, _opts(4))
            robust_cost, _ = rollout(robust.delta, u_star, w_actual, state, params, weights)
            assert list(oracle.per_scenario_costs) == ["w_actual"]
            assert oracle.worst_case_cost <= robust_cost + 1e-9

    def test_shifted_plan_holds_the_last_column(self, params, weights, u_star):
        scenarios = {"w_min": _trajectory([[0.0, 0.0]] * 3, [[-1.5], [-0.3], [-0.3]])}
        plan = commit_over_scenarios(GridState(x=[2.0], delta_prev=[1]), scenarios, u_star, params, weights, _opts(3))
        shifted = plan.shifted()
        np.testing.assert_array_equal(shifted[:, :2], plan.delta[:, 1:])
        np.testing.assert_array_equal(shifted[:, 2], plan.delta[:, 2])


class TestRecedingHorizon:
    def test_degenerate_bounds_match_the_prescient_controller(self, params, weights, u_star):
        realization = case_study_bounds(np.random.default_rng(21), 12, spread=0.0).lower
        bounds = ForecastBounds.degenerate(realization, ts=params.ts)
        state = GridState(x=[2.0], delta_prev=[0])
        opts = _opts(4)

        robust = receding_horizon_run(Controller.uc_ems, bounds, realization, state, params, weights, opts, 6, u_star)
        oracle = receding_horizon_run(Controller.prescient, None, realization, state, params, weights, opts, 6, u_star)

        assert len(robust) == 6
        assert robust.total_cost == oracle.total_cost
        np.testing.assert_array_equal(robust.delta, oracle.delta)
        np.testing.assert_array_equal(robust.w_d, realization.w_d[1:7])

    def test_fixed_on_keeps_every_unit_committed(self, params, weights, u_star):
        realization = case_study_bounds(np.random.default_rng(22), 8).upper
        log = receding_horizon_run(
            Controller.fixed_on, None, realization, GridState(x=[2.0], delta_prev=[0]), params, weights, _opts(2), 5,
            u_star,
        )
        np.testing.assert_array_equal(log.delta, np.ones((5, 1)))
        assert log.stage_cost[0] == pytest.approx(stage_cost(log.dispatch(0), [1], [0], weights))
        planned, _ = rollout(
            np.ones((1, 5)), u_star, realization.window(1, 5), GridState(x=[2.0], delta_prev=[0]), params, weights
        )
        assert log.total_cost == pytest.approx(planned, abs=1e-12)
        assert np.all((log.x >= 0.0) & (log.x <= 6.0))

    def test_run_needs_enough_data(self, params, weights, u_star):
        realization = case_study_bounds(np.random.default_rng(23), 6).upper
        state = GridState(x=[2.0], delta_prev=[0])
        with pytest.raises(InvalidArgument):
            receding_horizon_run(Controller.prescient, None, realization, state, params, weights, _opts(4), 3, u_star)
        with pytest.raises(InvalidArgument):
            receding_horizon_run(Controller.uc_ems, None, realization, state, params, weights, _opts(2), 3, u_star)

    def test_infeasible_step_is_reported(self, params, weights, u_star):
        realization = _trajectory([[0.0, 0.0]] * 4, [[-0.5], [-0.5], [-3.0], [-0.5]])
        with pytest.raises(Infeasible) as e:
            receding_horizon_run(
                Controller.fixed_on, None, realization, GridState(x=[2.0], delta_prev=[1]), params, weights,
                _opts(1), 3, u_star,
            )
        assert e.value.step == 2

    def test_planner_failure_names_the_step(self, params, weights, u_star):
        realization = _trajectory([[0.0, 0.0]] * 4, [[-0.5], [-0.5], [-3.0], [-0.5]])
        with pytest.raises(NoFeasiblePlan) as e:
            receding_horizon_run(
                Controller.prescient, None, realization, GridState(x=[2.0], delta_prev=[1]), params, weights,
                _opts(1), 3, u_star,
            )
        assert "at step 2" in e.value.detail


class TestRegret:
    def test_constant_setpoints_have_zero_regret(self, params, common_weights, u_star):
        bounds = case_study_bounds(np.random.default_rng(31), 1)
        scenarios = {scenario_label(a): interpolate(bounds, a) for a in alpha_grid()}
        grid = setpoint_grid(u_star, spacing=0.5, radius=1)
        state = GridState(x=[3.0], delta_prev=[1])

        report = regret(
            (u_star, np.ones((1, 1))), scenarios, state, params, common_weights, grid, free_commitment=False
        )
        assert report.max_regret == pytest.approx(0.0, abs=1e-9)
        assert set(report.scenarios) == set(scenarios)
        assert report.evaluated_controls == 11 * grid.per_step

    def test_thermal_first_setpoints_have_positive_regret(self, params, weights, u_star):
        scenarios = {"w": _trajectory([[0.2, 0.1]], [[-0.6]])}
        grid = setpoint_grid(u_star, spacing=0.5, radius=1)
        thermal_first = u_star.model_copy(update={"u_t": np.array([5.0])})
        state = GridState(x=[3.0], delta_prev=[1])

        report = regret((thermal_first, np.ones((1, 1))), scenarios, state, params, weights, grid)
        # thermal at p_max instead of p_min, storage picks up the difference at c_st
        assert report.max_regret == pytest.approx(0.8 * (1.0 - 0.9))

    def test_free_commitment_never_increases_the_reference(self, params, weights, u_star):
        scenarios = {"w": _trajectory([[0.0, 0.0]], [[-0.5]])}
        grid = setpoint_grid(u_star, spacing=0.5, radius=1)
        state = GridState(x=[3.0], delta_prev=[0])
        candidate = (u_star, np.ones((1, 1)))

        fixed = regret(candidate, scenarios, state, params, weights, grid, free_commitment=False)
        free = regret(candidate, scenarios, state, params, weights, grid)
        assert fixed.max_regret == pytest.approx(0.0, abs=1e-12)
        # staying off avoids the start-up and lets storage carry the load
        assert free.max_regret == pytest.approx(0.97 - 0.45)
        assert free.evaluated_controls == 2 * fixed.evaluated_controls

    def test_infeasible_scenario_leaves_regret_undefined(self, params, weights, u_star):
        scenarios = {
            "ok": _trajectory([[0.0, 0.0]], [[-0.5]]),
            "overload": _trajectory([[0.0, 0.0]], [[-5.0]]),
        }
        grid = setpoint_grid(u_star, spacing=0.5, radius=0)
        state = GridState(x=[3.0], delta_prev=[1])
        report = regret((u_star, np.ones((1, 1))), scenarios, state, params, weights, grid, free_commitment=False)
        assert report.max_regret is None
        assert report.scenarios["overload"].infeasible
        assert report.scenarios["ok"].regret == pytest.approx(0.0)

    def test_long_horizons_are_rejected(self, params, weights, u_star):
        w = _trajectory([[0.0, 0.0]] * 4, [[-0.5]] * 4)
        grid = setpoint_grid(u_star, spacing=0.5, radius=0)
        with pytest.raises(InvalidArgument):
            regret((u_star, np.ones((1, 4))), {"w": w}, GridState(x=[3.0], delta_prev=[1]), params, weights, grid)
