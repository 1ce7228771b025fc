import copy
import io
import json

import numpy as np
import pytest

from app.control.ems import rollout
from app.core.exception import ConfigurationError, ParseError
from app.repository.fleet import FleetRepository
from app.repository.forecast import ForecastRepository
from app.repository.simlog import SimLogRepository
from app.schemas.bands import GridState
from app.schemas.scenario import DisturbanceTrajectory
from app.tests.conftest import CASE_STUDY, case_study_bounds


@pytest.fixture
def fleet_path(tmp_path):
    def write(config=CASE_STUDY, text=None):
        path = tmp_path / "fleet.json"
        path.write_text(json.dumps(config) if text is None else text)
        return path
    return write


class TestFleetRepository:
    def test_load_case_study(self, fleet_path):
        config = FleetRepository(fleet_path()).load()
        assert (config.params.n_t, config.params.n_s, config.params.n_r) == (1, 1, 2)
        assert config.params.ts == 0.25
        np.testing.assert_array_equal(config.state0.x, [2.0])
        np.testing.assert_array_equal(config.state0.delta_prev, [0])
        assert config.limits.u_max == 5.0

    def test_missing_initial_state_defaults_to_empty_and_off(self, fleet_path):
        config = copy.deepcopy(CASE_STUDY)
        del config["initial_state"]
        state = FleetRepository(fleet_path(config)).load().state0
        np.testing.assert_array_equal(state.x, [0.0])
        np.testing.assert_array_equal(state.delta_prev, [0])

    def test_invalid_json_names_the_line(self, fleet_path):
        with pytest.raises(ParseError) as e:
            FleetRepository(fleet_path(text='{\n  "thermal": [\n}')).load()
        assert e.value.row == 3

    def test_truncated_json_names_the_first_line(self, fleet_path):
        with pytest.raises(ParseError) as e:
            FleetRepository(fleet_path(text="{")).load()
        assert e.value.row == 1
        assert e.value.detail.startswith("row 1: ")
        assert "not valid JSON" in e.value.detail

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            FleetRepository(tmp_path / "absent.json").load()

    def test_wrong_field_type(self, fleet_path):
        config = copy.deepcopy(CASE_STUDY)
        config["thermal"][0]["p_max"] = "lots"
        with pytest.raises(ConfigurationError):
            FleetRepository(fleet_path(config)).load()

    def test_every_broken_invariant_is_listed(self, fleet_path):
        config = copy.deepcopy(CASE_STUDY)
        config["thermal"][0]["p_min"] = 2.0
        config["storage"][0]["x_min"] = 7.0
        with pytest.raises(ConfigurationError) as e:
            FleetRepository(fleet_path(config)).load()
        assert "thermal[0] p_min ≤ p_max" in e.value.detail
        assert "storage[0] x_min < x_max" in e.value.detail


class TestForecastRepository:
    def test_written_bounds_load_back(self, tmp_path):
        bounds = case_study_bounds(np.random.default_rng(1), 5)
        path = tmp_path / "bounds.csv"
        ForecastRepository().write_bounds(bounds, path)

        frame = ForecastRepository.bounds_frame(bounds)
        assert list(frame.columns) == ["k", "wr_min_1", "wr_min_2", "wr_max_1", "wr_max_2", "wd_min_1", "wd_max_1"]
        loaded = ForecastRepository(path).load()
        np.testing.assert_allclose(loaded.lower.w_r, bounds.lower.w_r, rtol=1e-15)
        np.testing.assert_allclose(loaded.upper.w_d, bounds.upper.w_d, rtol=1e-15)

    def test_trajectory_columns(self):
        trajectory = DisturbanceTrajectory(w_r=[[0.5, 0.1], [0.4, 0.0]], w_d=[[-0.7], [-0.6]])
        frame = ForecastRepository.trajectory_frame(trajectory)
        assert list(frame.columns) == ["k", "w_r_1", "w_r_2", "w_d_1"]
        assert frame["k"].tolist() == [0, 1]


class TestSimLogRepository:
    def test_log_reads_back_exactly(self, params, weights, u_star):
        w = case_study_bounds(np.random.default_rng(6), 4).lower
        state = GridState(x=[2.0], delta_prev=[0])
        _, log = rollout(np.array([[1, 1, 0, 1]]), u_star, w, state, params, weights)

        buffer = io.StringIO()
        SimLogRepository().write(log, buffer)
        buffer.seek(0)
        frame = SimLogRepository.frame(log)
        assert frame.columns[:3].tolist() == ["k", "rho", "p_t_1"]
        assert frame["k"].tolist() == [1, 2, 3, 4]

        loaded = SimLogRepository().read(buffer, x_0=state.x, delta_0=state.delta_prev, ts=params.ts)
        np.testing.assert_array_equal(loaded.x, log.x)
        np.testing.assert_array_equal(loaded.delta, log.delta)
        np.testing.assert_array_equal(loaded.stage_cost, log.stage_cost)
        assert loaded.total_cost == log.total_cost

    def test_missing_columns(self):
        with pytest.raises(ParseError):
            SimLogRepository().read(io.StringIO("k,rho\n1,0.2\n"), x_0=[2.0], delta_0=[0], ts=0.25)
