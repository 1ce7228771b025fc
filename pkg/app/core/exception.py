from typing import Optional

EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2


class OperationError(Exception):
    def __init__(self, exit_code: int, detail: str) -> None:
        super().__init__(detail)
        self.exit_code = exit_code
        self.detail = detail


class InvalidArgument(OperationError):
    ...


class StateViolation(OperationError):
    ...


class ConfigurationError(OperationError):
    ...


class ParseError(OperationError):
    def __init__(self, exit_code: int, detail: str, row: Optional[int] = None) -> None:
        super().__init__(exit_code, detail)
        self.row = row


class Infeasible(OperationError):
    def __init__(
            self,
            exit_code: int,
            detail: str,
            demand: float,
            low: float,
            high: float,
            step: Optional[int] = None,
            scenario: Optional[str] = None,
    ) -> None:
        super().__init__(exit_code, detail)
        self.demand = demand
        self.low = low
        self.high = high
        self.step = step
        self.scenario = scenario

    def at(self, step: Optional[int] = None, scenario: Optional[str] = None) -> "Infeasible":
        return infeasible(
            demand=self.demand,
            low=self.low,
            high=self.high,
            step=self.step if step is None else step,
            scenario=self.scenario if scenario is None else scenario,
        )


class NoFeasiblePlan(OperationError):
    ...


def invalid_argument(msg: str = "Invalid argument") -> InvalidArgument:
    """Argument breaks an operation precondition."""
    return InvalidArgument(exit_code=EXIT_VALIDATION, detail=msg)


def state_violation(msg: str = "Grid state outside its limits") -> StateViolation:
    """Storage energy or commitment vector is inconsistent with the fleet."""
    return StateViolation(exit_code=EXIT_VALIDATION, detail=msg)


def configuration_error(msg: str = "Invalid configuration") -> ConfigurationError:
    """Raised when configured values cannot support the requested computation."""
    return ConfigurationError(exit_code=EXIT_VALIDATION, detail=msg)


def parse_error(msg: str = "Malformed input", row: Optional[int] = None) -> ParseError:
    """Input file does not match its schema."""
    detail = msg if row is None else f"row {row}: {msg}"
    return ParseError(exit_code=EXIT_VALIDATION, detail=detail, row=row)


def infeasible(
        demand: float,
        low: float,
        high: float,
        step: Optional[int] = None,
        scenario: Optional[str] = None,
) -> Infeasible:
    """Raised when no balancing variable satisfies the power balance."""
    where = ""
    if step is not None:
        where += f" at step {step}"
    if scenario is not None:
        where += f" in scenario {scenario}"
    detail = f"Power balance infeasible{where}: demand {demand:.6g} outside [{low:.6g}, {high:.6g}]"
    return Infeasible(
        exit_code=EXIT_INFEASIBLE,
        detail=detail,
        demand=demand,
        low=low,
        high=high,
        step=step,
        scenario=scenario,
    )


def no_feasible_plan(msg: str = "No commitment plan is feasible for every scenario") -> NoFeasiblePlan:
    """Raised when the commitment search closes without a feasible plan."""
    return NoFeasiblePlan(exit_code=EXIT_INFEASIBLE, detail=msg)
