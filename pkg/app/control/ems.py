"""
Energy management on top of the droop layer.

The commitment search shares one on/off plan across every scenario; each
scenario carries its own storage energies forward under that plan.
"""
import logging
from itertools import product
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from app.control.cost import stage_cost, stage_cost_arrays
from app.control.dispatch import advance_energy, dispatch_powers, row_powers, solve_rho_rows, step
from app.control.model import check_state
from app.control.scenario import alpha_grid, extreme_set, interpolate, scenario_label
from app.core.exception import Infeasible, NoFeasiblePlan, invalid_argument, no_feasible_plan
from app.schemas.bands import GridState, Setpoints
from app.schemas.cost import CostWeights
from app.schemas.enum import Controller, ScenarioPolicy, Solver
from app.schemas.ems import CommitmentPlan, EmsOptions, RegretReport, ScenarioRegret, SetpointGrid, SolverStats
from app.schemas.fleet import FleetParams
from app.schemas.scenario import DisturbanceTrajectory, ForecastBounds, SimLog

logger = logging.getLogger("mg_opcon.ems")

EXHAUSTIVE_LIMIT = 20
REGRET_HORIZON_LIMIT = 3

# storage energies that agree to this many decimals are one search state
_STATE_DECIMALS = 9
_DOMINANCE_CHUNK = 256

Control = Tuple[np.ndarray, np.ndarray, np.ndarray]
SetpointPlan = Union[Setpoints, Sequence[Setpoints]]


def scenario_set(bounds: ForecastBounds, opts: EmsOptions) -> Dict[str, DisturbanceTrajectory]:
    if bounds.is_degenerate or opts.scenario_policy is ScenarioPolicy.extremes:
        return extreme_set(bounds)
    return {scenario_label(a): interpolate(bounds, a) for a in alpha_grid(opts.alpha_grid_size)}


def _controls(u: SetpointPlan, np_steps: int) -> List[Control]:
    if isinstance(u, Setpoints):
        return [(u.u_t, u.u_s, u.u_r)] * np_steps
    if len(u) != np_steps:
        raise invalid_argument(msg=f"{len(u)} setpoint steps given for a horizon of {np_steps}")
    return [(sp.u_t, sp.u_s, sp.u_r) for sp in u]


def _check_plan(delta: np.ndarray, params: FleetParams) -> np.ndarray:
    delta = np.asarray(delta)
    if delta.ndim != 2 or delta.shape[0] != params.n_t or delta.shape[1] < 1:
        raise invalid_argument(msg=f"commitment plan has shape {delta.shape}, expected ({params.n_t}, Np >= 1)")
    if delta.size and not np.isin(delta, (0, 1)).all():
        raise invalid_argument(msg="commitment entries must be 0 or 1")
    return delta.astype(np.int8)


def _check_window(w_traj: DisturbanceTrajectory, np_steps: int, params: FleetParams) -> None:
    if len(w_traj) < np_steps:
        raise invalid_argument(msg=f"disturbance trajectory has {len(w_traj)} steps, horizon needs {np_steps}")
    if w_traj.n_r != params.n_r:
        raise invalid_argument(msg=f"trajectory has {w_traj.n_r} renewable columns, fleet has {params.n_r}")


def rollout(
        delta: np.ndarray,
        u_star: SetpointPlan,
        w_traj: DisturbanceTrajectory,
        state0: GridState,
        params: FleetParams,
        weights: CostWeights,
        scenario: Optional[str] = None,
) -> Tuple[float, SimLog]:
    """
    Simulate one scenario over the plan's horizon and return its cost and log.

    `u_star` is either constant setpoints or one Setpoints per step; the
    commitment always comes from `delta`.

    Raises:
        Infeasible: with the 1-based step and the scenario name when the
            plan cannot balance that scenario.
    """
    delta = _check_plan(delta, params)
    np_steps = delta.shape[1]
    _check_window(w_traj, np_steps, params)
    check_state(state0, params)
    controls = _controls(u_star, np_steps)
    n_t, n_s = params.n_t, params.n_s

    x, previous = state0.x, state0.delta_prev
    rows = {"rho": [], "p_t": [], "p_s": [], "p_r": [], "x": [], "stage_cost": []}
    for j in range(np_steps):
        u_t, u_s, u_r = controls[j]
        column = delta[:, j]
        try:
            rho, powers, _ = dispatch_powers(u_t, u_s, u_r, column, w_traj.w_r[j], w_traj.w_d[j], x, params)
        except Infeasible as e:
            raise e.at(step=j + 1, scenario=scenario) from e
        p_t, p_s = powers[:n_t], powers[n_t:n_t + n_s]
        x = advance_energy(x, p_s, params)
        rows["rho"].append(rho)
        rows["p_t"].append(p_t)
        rows["p_s"].append(p_s)
        rows["p_r"].append(powers[n_t + n_s:])
        rows["x"].append(x)
        rows["stage_cost"].append(stage_cost_arrays(p_t, p_s, column, previous, weights))
        previous = column

    log = SimLog(
        ts=params.ts,
        x_0=state0.x,
        delta_0=state0.delta_prev,
        rho=rows["rho"],
        p_t=np.array(rows["p_t"]).reshape(np_steps, n_t),
        p_s=np.array(rows["p_s"]).reshape(np_steps, n_s),
        p_r=np.array(rows["p_r"]).reshape(np_steps, params.n_r),
        x=np.array(rows["x"]).reshape(np_steps, n_s),
        delta=delta.T,
        w_r=w_traj.w_r[:np_steps],
        w_d=w_traj.w_d[:np_steps],
        stage_cost=rows["stage_cost"],
    )
    return log.total_cost, log


def worst_case_cost(
        delta: np.ndarray,
        u_star: SetpointPlan,
        scenarios: Dict[str, DisturbanceTrajectory],
        state0: GridState,
        params: FleetParams,
        weights: CostWeights,
) -> float:
    if not scenarios:
        raise invalid_argument(msg="worst_case_cost needs at least one scenario")
    return max(rollout(delta, u_star, w, state0, params, weights, scenario=name)[0] for name, w in scenarios.items())


def _tie_key(delta: np.ndarray) -> Tuple[int, Tuple[int, ...]]:
    # fewer committed unit-steps first, then the plan that switches off earliest
    return int(delta.sum()), tuple(int(v) for v in delta.T.ravel())


def _preferred(cost: float, delta: np.ndarray, best_cost: Optional[float], best_delta, tol: float) -> bool:
    if best_cost is None or cost < best_cost - tol:
        return True
    if cost > best_cost + tol:
        return False
    return _tie_key(delta) < _tie_key(best_delta)


class _Frontier(NamedTuple):
    """Partial plans of one depth; row f is one plan prefix, scenarios along the second axis."""

    x: np.ndarray  # (F, S, n_s)
    acc: np.ndarray  # (F, S)
    column: np.ndarray  # (F,) index of the last column
    switches: np.ndarray  # (F,)
    bound: np.ndarray  # (F,)
    ones: np.ndarray  # (F,) committed unit-steps so far
    lex: np.ndarray  # (F,) rank of the prefix in lexicographic order
    path: np.ndarray  # (F, depth) column indices


def _dominated(group: np.ndarray, switches: np.ndarray, acc: np.ndarray, rank: np.ndarray, tol: float) -> np.ndarray:
    """
    Rows some other row of the same group makes redundant.

    Rows of one group share their last column and storage energies, so they
    have the same continuations; row a drops row b when it used no more
    switches, costs no more in any scenario, and either wins the tie order or
    is cheaper by more than `tol` everywhere.
    """
    out = np.zeros(len(group), dtype=bool)
    for start in range(0, len(group), _DOMINANCE_CHUNK):
        b = slice(start, start + _DOMINANCE_CHUNK)
        same = group[:, None] == group[None, b]
        no_worse = (acc[:, None, :] <= acc[None, b, :] + tol).all(axis=2)
        cheaper = (acc[:, None, :] < acc[None, b, :] - tol).all(axis=2)
        earlier = rank[:, None] < rank[None, b]
        dom = same & (switches[:, None] <= switches[None, b]) & no_worse & (earlier | cheaper)
        out[b] = dom.any(axis=0)
    return out


class _CommitmentSearch:
    """
    Layered branch-and-bound over commitment columns with per-scenario storage states.

    Every prefix of one depth is expanded by every column in a single batched
    balance solve. Prefixes ending in the same column with the same storage
    energies are merged by dominance, and prefixes whose cost floor exceeds
    the incumbent are cut.
    """

    def __init__(
            self,
            scenarios: Dict[str, DisturbanceTrajectory],
            u_star: Setpoints,
            state0: GridState,
            params: FleetParams,
            weights: CostWeights,
            opts: EmsOptions,
    ) -> None:
        self.names = list(scenarios)
        self.np_steps = opts.np_steps
        self.state0 = state0
        self.params = params
        self.weights = weights
        self.opts = opts
        self.tol = opts.tolerance
        # below this cap, prefixes that differ only in their switch count are not interchangeable
        self.cap_active = opts.max_switches < params.n_t * opts.np_steps

        n_t = params.n_t
        self.columns = np.array(list(product((0, 1), repeat=n_t)), dtype=np.int8)
        self.column_ones = self.columns.sum(axis=1).astype(int)
        flips = np.abs(self.columns[:, None, :].astype(float) - self.columns[None, :, :])
        self.flip_count = flips.sum(axis=2).astype(int)
        self.flip_cost = (flips * weights.c_sw).sum(axis=2)
        self.on_cost = (self.columns * weights.c_on).sum(axis=1)
        self.all_off = self.column_ones == 0
        self.start_column = self._index(state0.delta_prev)

        w_r = np.stack([scenarios[n].w_r[:self.np_steps] for n in self.names], axis=1)  # (Np, S, n_r)
        w_d = np.stack([scenarios[n].w_d[:self.np_steps] for n in self.names], axis=1)
        self.demand = -w_d.sum(axis=2)  # (Np, S)
        self._prepare_lines(u_star, w_r)
        self._prepare_bound(w_r)

        self.best_cost: Optional[float] = None
        self.best_delta: Optional[np.ndarray] = None
        self.best_costs: List[float] = []
        self.nodes = 0
        self.plans = 0
        self.exhausted = False
        self.cap_bound = np.inf

    def _index(self, column) -> int:
        return int(np.flatnonzero((self.columns == np.asarray(column, dtype=np.int8)).all(axis=1))[0])

    def _prepare_lines(self, u_star: Setpoints, w_r: np.ndarray) -> None:
        """Droop lines of every (step, column, scenario); the storage clamps are filled in per state."""
        p = self.params
        n_cols, (np_steps, n_sc) = len(self.columns), self.demand.shape
        on = self.columns.astype(bool)

        def stack(thermal, storage, renewable):
            return np.concatenate([
                np.broadcast_to(thermal[None, :, None, :], (np_steps, n_cols, n_sc, p.n_t)),
                np.broadcast_to(storage, (np_steps, n_cols, n_sc, p.n_s)),
                np.broadcast_to(renewable[:, None, :, :], (np_steps, n_cols, n_sc, p.n_r)),
            ], axis=3)

        r_lo = np.minimum(p.renewable_p_min, w_r)
        self.lo = stack(np.where(on, p.thermal_p_min, 0.0), np.zeros(p.n_s), r_lo)
        self.hi = stack(np.where(on, p.thermal_p_max, 0.0), np.zeros(p.n_s), w_r)
        self.u = stack(np.where(on, u_star.u_t, 0.0), u_star.u_s, np.broadcast_to(u_star.u_r, w_r.shape))
        self.chi = stack(np.where(on, p.thermal_chi, 0.0), p.storage_chi, np.broadcast_to(p.renewable_chi, w_r.shape))
        self.storage = slice(p.n_t, p.n_t + p.n_s)

    def _prepare_bound(self, w_r: np.ndarray) -> None:
        p, w = self.params, self.weights
        renewable = w_r.sum(axis=2)
        need = np.maximum(self.demand - renewable, float(p.storage_p_min.sum()))
        forced = (self.demand > float(p.storage_p_max.sum()) + renewable + self.tol).astype(float)
        self.need_suffix = np.vstack([np.cumsum(need[::-1], axis=0)[::-1], np.zeros((1, need.shape[1]))])
        self.forced_suffix = np.vstack([np.cumsum(forced[::-1], axis=0)[::-1], np.zeros((1, forced.shape[1]))])

        self.storage_order = [int(i) for i in np.argsort(w.c_st, kind="stable")]
        if p.n_t:
            self.fuel_price = float(w.c_fuel.min())
            # each committed unit pays its on-cost for at most p_max of output
            producing = p.thermal_p_max > 0
            per_unit = np.where(producing, w.c_fuel + w.c_on / np.where(producing, p.thermal_p_max, 1.0), np.inf)
            self.energy_price = float(per_unit.min())
            self.min_on = float(w.c_on.min())
            self.min_sw = float(w.c_sw.min())
        else:
            self.fuel_price = self.energy_price = None
            self.min_on = self.min_sw = 0.0

    def _fill(self, base: np.ndarray, deficit: np.ndarray, room: np.ndarray, thermal_price: Optional[float]):
        """Cost of covering `deficit` with storage in price order, then with thermal energy."""
        bound, deficit = base.copy(), deficit.copy()
        thermal_done = thermal_price is None
        for index in self.storage_order:
            price = float(self.weights.c_st[index])
            if not thermal_done and thermal_price < price:
                break
            amount = np.clip(deficit, 0.0, room[..., index])
            bound += price * amount
            deficit -= amount
        if not thermal_done:
            uncovered = np.maximum(deficit, 0.0)
            with np.errstate(invalid="ignore"):
                bound += np.where(uncovered > 0, thermal_price * uncovered, 0.0)
        return bound

    def lower_bound(self, j: int, x: np.ndarray, column: np.ndarray) -> np.ndarray:
        """
        Cost floor of steps j..Np-1 per scenario, for storage energies `x` (..., S, n_s).

        Covering LP over the storage energy window: storage may deliver at most
        its stored energy and thermal output is priced at its cheapest rate,
        once at fuel cost plus the on-cost of every step the load forces a unit
        on and once with the on-cost spread over p_max. A start-up is added
        when the last column `column` (...) has every unit off and thermal
        energy is still needed.
        """
        remaining = self.np_steps - j
        if remaining <= 0:
            return np.zeros(x.shape[:-1])
        p = self.params
        b_lo = np.maximum(remaining * p.storage_p_min, (x - p.x_max) / p.ts)
        b_hi = np.minimum(remaining * p.storage_p_max, (x - p.x_min) / p.ts)
        base = (b_lo * self.weights.c_st).sum(axis=-1)
        deficit = self.need_suffix[j] - b_lo.sum(axis=-1)
        room = b_hi - b_lo

        forced = self.forced_suffix[j]
        by_fuel = self._fill(base, deficit, room, self.fuel_price)
        by_energy = self._fill(base, deficit, room, self.energy_price)
        bound = np.maximum(by_fuel + self.min_on * forced, by_energy)
        if self.params.n_t:
            needs_thermal = (deficit - room.sum(axis=-1) > self.tol) | (forced > 0)
            start_up = self.all_off[column][..., None] & needs_thermal
            bound = bound + np.where(start_up, self.min_sw, 0.0)
        return bound

    def advance(self, j: int, x: np.ndarray, previous: np.ndarray, columns: np.ndarray):
        """
        Apply `columns` (C',) at step j to every state: x (F, S, n_s), previous (F,) column indices.

        Returns (feasible (F, C'), next x (F, C', S, n_s), stage cost (F, C', S)).
        """
        p, w = self.params, self.weights
        n_f, n_c, n_sc = len(x), len(columns), self.demand.shape[1]
        shape = (n_f, n_c, n_sc, self.lo.shape[3])

        s_lo = np.maximum(p.storage_p_min, (x - p.x_max) / p.ts)
        s_hi = np.minimum(p.storage_p_max, (x - p.x_min) / p.ts)
        lo = np.array(np.broadcast_to(self.lo[j][columns][None], shape))
        hi = np.array(np.broadcast_to(self.hi[j][columns][None], shape))
        lo[..., self.storage] = s_lo[:, None]
        hi[..., self.storage] = s_hi[:, None]
        u = np.broadcast_to(self.u[j][columns][None], shape).reshape(-1, shape[3])
        chi = np.broadcast_to(self.chi[j][columns][None], shape).reshape(-1, shape[3])
        demand = np.broadcast_to(self.demand[j], shape[:3]).reshape(-1)

        lo, hi = lo.reshape(-1, shape[3]), hi.reshape(-1, shape[3])
        rho, ok, _, _ = solve_rho_rows(lo, hi, u, chi, demand, self.tol)
        powers = row_powers(lo, hi, u, chi, rho).reshape(shape)
        p_t, p_s = powers[..., :p.n_t], powers[..., self.storage]

        stage = (
            (p_t * w.c_fuel).sum(axis=-1)
            + (p_s * w.c_st).sum(axis=-1)
            + self.on_cost[columns][None, :, None]
            + self.flip_cost[previous][:, columns][:, :, None]
        )
        following = np.clip(x[:, None] - p.ts * p_s, p.x_min, p.x_max)
        return ok.reshape(shape[:3]).all(axis=2), following, stage

    def _offer(self, delta: np.ndarray, costs: List[float]) -> None:
        self.plans += 1
        cost = max(costs)
        if _preferred(cost, delta, self.best_cost, self.best_delta, self.tol):
            self.best_cost, self.best_delta, self.best_costs = cost, delta, costs

    def _switches(self, delta: np.ndarray) -> int:
        full = np.column_stack([self.state0.delta_prev, delta]).astype(int)
        return int(np.abs(np.diff(full, axis=1)).sum())

    def _delta(self, path) -> np.ndarray:
        return self.columns[np.asarray(path, dtype=int)].T.copy()

    def evaluate(self, delta: np.ndarray) -> Optional[List[float]]:
        x = np.broadcast_to(self.state0.x, (1, len(self.names), self.params.n_s)).copy()
        acc = np.zeros(len(self.names))
        previous = np.array([self.start_column])
        for j in range(self.np_steps):
            column = np.array([self._index(delta[:, j])])
            ok, following, stage = self.advance(j, x, previous, column)
            if not ok[0, 0]:
                return None
            x, acc, previous = following[:, 0], acc + stage[0, 0], column
        return [float(a) for a in acc]

    def seed(self, delta: np.ndarray) -> None:
        if delta.shape != (self.params.n_t, self.np_steps) or self._switches(delta) > self.opts.max_switches:
            return
        costs = self.evaluate(delta)
        if costs is not None:
            self._offer(delta, costs)

    def _root(self) -> _Frontier:
        x = np.broadcast_to(self.state0.x, (1, len(self.names), self.params.n_s)).copy()
        column = np.array([self.start_column])
        bound = self.lower_bound(0, x, column).max(axis=1)
        return _Frontier(x=x, acc=np.zeros((1, len(self.names))), column=column, switches=np.zeros(1, dtype=int),
                         bound=bound, ones=np.zeros(1, dtype=int), lex=np.zeros(1, dtype=int),
                         path=np.zeros((1, 0), dtype=int))

    def _expand(self, j: int, front: _Frontier) -> Optional[_Frontier]:
        """Next layer of prefixes, or None when the budget runs out or every prefix is cut."""
        all_columns = np.arange(len(self.columns))
        used = front.switches[:, None] + self.flip_count[front.column]
        allowed = used <= self.opts.max_switches
        capped = ~allowed.all(axis=1)
        if capped.any():
            self.cap_bound = min(self.cap_bound, float(front.bound[capped].min()))

        count = int(allowed.sum())
        if self.opts.max_nodes is not None and self.nodes + count > self.opts.max_nodes:
            self.exhausted = True
            return None
        self.nodes += count

        ok, following, stage = self.advance(j, front.x, front.column, all_columns)
        acc = front.acc[:, None, :] + stage
        with np.errstate(invalid="ignore"):
            bound = (acc + self.lower_bound(j + 1, following, np.broadcast_to(all_columns, ok.shape))).max(axis=2)
        keep = allowed & ok
        if self.best_cost is not None:
            keep &= bound <= self.best_cost + self.tol
        parent, column = np.nonzero(keep)
        if not len(parent):
            return None

        ones = front.ones[parent] + self.column_ones[column]
        lex = np.empty(len(parent), dtype=int)
        lex[np.lexsort((column, front.lex[parent]))] = np.arange(len(parent))
        rank = np.empty(len(parent), dtype=int)
        rank[np.lexsort((lex, ones))] = np.arange(len(parent))

        x_next = following[parent, column]
        # + 0.0 folds -0.0 into 0.0 so equal energies compare equal bytewise
        key = np.column_stack([column, np.round(x_next.reshape(len(parent), -1), _STATE_DECIMALS) + 0.0])
        _, group = np.unique(key, axis=0, return_inverse=True)
        switches = used[parent, column] if self.cap_active else np.zeros(len(parent), dtype=int)
        survive = ~_dominated(group.reshape(-1), switches, acc[parent, column], rank, self.tol)

        parent, column, lex = parent[survive], column[survive], lex[survive]
        order = np.argsort(lex, kind="stable")
        parent, column = parent[order], column[order]
        return _Frontier(
            x=x_next[survive][order],
            acc=acc[parent, column],
            column=column,
            switches=used[parent, column],
            bound=bound[parent, column],
            ones=ones[survive][order],
            lex=np.arange(len(parent)),
            path=np.column_stack([front.path[parent], column]),
        )

    def branch_and_bound(self) -> SolverStats:
        front = self._root()
        for j in range(self.np_steps):
            front = self._expand(j, front)
            if front is None:
                break
        else:
            for f in np.lexsort((front.lex, front.ones)):
                self._offer(self._delta(front.path[f]), [float(a) for a in front.acc[f]])

        cap_binding = self.best_cost is None or self.cap_bound <= self.best_cost + self.tol
        cap_binding = cap_binding and np.isfinite(self.cap_bound)
        return SolverStats(
            nodes_explored=self.nodes,
            plans_evaluated=self.plans,
            optimal=not (cap_binding or self.exhausted),
            cap_pruned=bool(cap_binding),
            budget_exhausted=self.exhausted,
        )

    def exhaustive(self) -> SolverStats:
        for path in product(range(len(self.columns)), repeat=self.np_steps):
            delta = self._delta(path)
            self.nodes += self.np_steps
            if self._switches(delta) > self.opts.max_switches:
                continue
            costs = self.evaluate(delta)
            if costs is not None:
                self._offer(delta, costs)
        return SolverStats(nodes_explored=self.nodes, plans_evaluated=self.plans)

    def plan(self, stats: SolverStats) -> CommitmentPlan:
        if self.best_delta is None:
            reason = " within the node budget" if self.exhausted else ""
            raise no_feasible_plan(msg=f"No commitment plan is feasible for every scenario{reason}")
        return CommitmentPlan(
            delta=self.best_delta,
            worst_case_cost=self.best_cost,
            per_scenario_costs=dict(zip(self.names, self.best_costs)),
            stats=stats,
        )


def commit_over_scenarios(
        state0: GridState,
        scenarios: Dict[str, DisturbanceTrajectory],
        u_star: Setpoints,
        params: FleetParams,
        weights: CostWeights,
        opts: EmsOptions,
        warm_start: Optional[np.ndarray] = None,
) -> CommitmentPlan:
    """
    Commitment plan minimizing the worst scenario cost over `opts.np_steps` steps.

    Raises:
        NoFeasiblePlan: if no plan balances every scenario at every step.
    """
    if not scenarios:
        raise invalid_argument(msg="unit commitment needs at least one scenario")
    for w in scenarios.values():
        _check_window(w, opts.np_steps, params)
    check_state(state0, params)

    search = _CommitmentSearch(scenarios, u_star, state0, params, weights, opts)
    if opts.solver is Solver.exhaustive:
        if params.n_t * opts.np_steps > EXHAUSTIVE_LIMIT:
            raise invalid_argument(
                msg=f"exhaustive search needs n_t * Np <= {EXHAUSTIVE_LIMIT}, got {params.n_t * opts.np_steps}"
            )
        stats = search.exhaustive()
    else:
        if warm_start is not None:
            search.seed(np.asarray(warm_start, dtype=np.int8))
        search.seed(np.ones((params.n_t, opts.np_steps), dtype=np.int8))
        stats = search.branch_and_bound()

    plan = search.plan(stats)
    logger.debug(
        f"Commitment over {len(scenarios)} scenario(s): cost {plan.worst_case_cost:.6g}, "
        f"{stats.nodes_explored} nodes, optimal={stats.optimal}"
    )
    return plan


def solve_unit_commitment(
        state0: GridState,
        bounds: ForecastBounds,
        u_star: Setpoints,
        params: FleetParams,
        weights: CostWeights,
        opts: EmsOptions,
        warm_start: Optional[np.ndarray] = None,
) -> CommitmentPlan:
    if len(bounds) < opts.np_steps:
        raise invalid_argument(msg=f"forecast bounds cover {len(bounds)} steps, horizon needs {opts.np_steps}")
    scenarios = scenario_set(bounds.window(0, opts.np_steps), opts)
    return commit_over_scenarios(state0, scenarios, u_star, params, weights, opts, warm_start)


def prescient_plan(
        state0: GridState,
        w_actual: DisturbanceTrajectory,
        u_star: Setpoints,
        params: FleetParams,
        weights: CostWeights,
        opts: EmsOptions,
        warm_start: Optional[np.ndarray] = None,
) -> CommitmentPlan:
    _check_window(w_actual, opts.np_steps, params)
    scenarios = {"w_actual": w_actual.window(0, opts.np_steps)}
    return commit_over_scenarios(state0, scenarios, u_star, params, weights, opts, warm_start)


def receding_horizon_run(
        controller: Controller,
        bounds: Optional[ForecastBounds],
        realization: DisturbanceTrajectory,
        state0: GridState,
        params: FleetParams,
        weights: CostWeights,
        opts: EmsOptions,
        nsim: int,
        u_star: Setpoints,
) -> SimLog:
    """
    Closed loop: plan, apply the first commitment column, step the true system.

    Row 0 of `realization` (and of `bounds`) is the initial instant; step k
    plans over rows k..k+Np-1 and is realized on row k.

    Raises:
        Infeasible: tagged with the closed-loop step that failed.
        NoFeasiblePlan: when a planner finds no admissible plan.
    """
    controller = Controller(controller)
    if nsim < 1:
        raise invalid_argument(msg=f"nsim must be >= 1, got {nsim}")
    needed = nsim + opts.np_steps
    if len(realization) < needed:
        raise invalid_argument(msg=f"realization has {len(realization)} steps, the run needs {needed}")
    if controller is Controller.uc_ems:
        if bounds is None:
            raise invalid_argument(msg="the uc-ems controller needs forecast bounds")
        if len(bounds) < needed:
            raise invalid_argument(msg=f"forecast bounds have {len(bounds)} steps, the run needs {needed}")
    check_state(state0, params)

    state = state0
    warm: Optional[np.ndarray] = None
    dispatches, deltas, states, samples, costs = [], [], [], [], []
    for k in range(1, nsim + 1):
        if controller is Controller.fixed_on:
            column = np.ones(params.n_t, dtype=np.int8)
        else:
            try:
                if controller is Controller.uc_ems:
                    plan = solve_unit_commitment(
                        state, bounds.window(k, opts.np_steps), u_star, params, weights, opts, warm_start=warm
                    )
                else:
                    plan = prescient_plan(
                        state, realization.window(k, opts.np_steps), u_star, params, weights, opts, warm_start=warm
                    )
            except NoFeasiblePlan as e:
                raise no_feasible_plan(msg=f"{e.detail} at step {k}") from e
            column = plan.first
            warm = plan.shifted()

        sample = realization.sample(k)
        try:
            dispatch, following = step(state, u_star.with_delta(column), sample, params)
        except Infeasible as e:
            raise e.at(step=k) from e
        costs.append(stage_cost(dispatch, column, state.delta_prev, weights))
        dispatches.append(dispatch)
        deltas.append(column)
        states.append(following.x)
        samples.append(sample)
        state = following
        logger.debug(f"{controller.value} step {k}: delta={column.tolist()} rho={dispatch.rho:.4f} "
                     f"cost={costs[-1]:.4f}")

    log = SimLog.from_steps(params.ts, state0.x, state0.delta_prev, dispatches, deltas, states, samples, costs)
    logger.info(f"{controller.value} closed loop over {nsim} steps: total cost {log.total_cost:.6g}")
    return log


def setpoint_grid(center: Setpoints, spacing: float, radius: int) -> SetpointGrid:
    """Per-unit values center +/- spacing * {0..radius}; the center is always a candidate."""
    if spacing <= 0 or radius < 0:
        raise invalid_argument(msg=f"grid spacing must be > 0 and radius >= 0, got {spacing}, {radius}")
    offsets = spacing * np.arange(-radius, radius + 1)

    def around(values: np.ndarray) -> List[np.ndarray]:
        return [np.round(v + offsets, 12) for v in values]

    return SetpointGrid(u_t=around(center.u_t), u_s=around(center.u_s), u_r=around(center.u_r))


def _control_plans(grid: SetpointGrid, np_steps: int, params: FleetParams):
    for per_step in product(list(grid.controls()), repeat=np_steps):
        yield [Setpoints(u_t=u_t, u_s=u_s, u_r=u_r, delta_t=np.ones(params.n_t, dtype=int))
               for u_t, u_s, u_r in per_step]


def regret(
        candidate: Tuple[SetpointPlan, np.ndarray],
        scenarios: Dict[str, DisturbanceTrajectory],
        state0: GridState,
        params: FleetParams,
        weights: CostWeights,
        u_grid: SetpointGrid,
        free_commitment: bool = True,
) -> RegretReport:
    """
    Maximum regret of a shared control over a scenario set, by grid search.

    Each scenario's reference optimum is the cheapest feasible rollout over
    every per-step combination of grid setpoints and every commitment plan,
    or only the candidate's commitment when `free_commitment` is off. The
    candidate itself is a reference, so regrets are nonnegative.
    """
    u, delta = candidate
    delta = _check_plan(delta, params)
    np_steps = delta.shape[1]
    if np_steps > REGRET_HORIZON_LIMIT:
        raise invalid_argument(msg=f"regret search supports Np <= {REGRET_HORIZON_LIMIT}, got {np_steps}")
    if not scenarios:
        raise invalid_argument(msg="regret needs at least one scenario")
    if (len(u_grid.u_t), len(u_grid.u_s), len(u_grid.u_r)) != (params.n_t, params.n_s, params.n_r):
        raise invalid_argument(msg="setpoint grid does not match the fleet")

    if free_commitment:
        columns = [np.array(c, dtype=np.int8) for c in product((0, 1), repeat=params.n_t)]
        commitments = [np.array(p, dtype=np.int8).reshape(np_steps, params.n_t).T
                       for p in product(columns, repeat=np_steps)]
    else:
        commitments = [delta]
    control_plans = list(_control_plans(u_grid, np_steps, params))

    results: Dict[str, ScenarioRegret] = {}
    evaluated = 0
    for name, w in scenarios.items():
        try:
            candidate_cost, _ = rollout(delta, u, w, state0, params, weights, scenario=name)
        except Infeasible as e:
            results[name] = ScenarioRegret(scenario=name, infeasible=e.detail)
            continue
        best = candidate_cost
        for plan in commitments:
            for controls in control_plans:
                evaluated += 1
                try:
                    cost, _ = rollout(plan, controls, w, state0, params, weights)
                except Infeasible:
                    continue
                best = min(best, cost)
        results[name] = ScenarioRegret(
            scenario=name, candidate_cost=candidate_cost, optimal_cost=best, regret=candidate_cost - best,
        )

    feasible = [r.regret for r in results.values() if r.regret is not None]
    # an infeasible scenario leaves the regret unbounded
    max_regret = max(feasible) if feasible and len(feasible) == len(results) else None
    logger.info(f"Regret over {len(scenarios)} scenario(s), {evaluated} rollouts: max {max_regret}")
    return RegretReport(max_regret=max_regret, scenarios=results, evaluated_controls=evaluated)
