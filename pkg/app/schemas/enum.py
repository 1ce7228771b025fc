from enum import Enum


class SaturationState(Enum):
    off = "off"
    lower = "lower"
    interior = "interior"
    upper = "upper"


class RenewableKind(Enum):
    wind = "wind"
    pv = "pv"


class Controller(Enum):
    uc_ems = "uc-ems"
    prescient = "prescient"
    fixed_on = "fixed-on"


class ScenarioPolicy(Enum):
    extremes = "extremes"
    alpha_grid = "alpha-grid"


class Solver(Enum):
    branch_and_bound = "branch-and-bound"
    exhaustive = "exhaustive"
