from pydantic import model_validator

from app.schemas.bands import ValueBase, Vector
from app.schemas.fleet import FleetParams


class CostWeights(ValueBase):
    c_fuel: Vector
    c_on: Vector
    c_sw: Vector
    c_st: Vector

    @model_validator(mode="after")
    def _check(self) -> "CostWeights":
        if not (len(self.c_fuel) == len(self.c_on) == len(self.c_sw)):
            raise ValueError("thermal weight vectors differ in length")
        for name in ("c_fuel", "c_on", "c_sw", "c_st"):
            if (getattr(self, name) < 0).any():
                raise ValueError(f"cost weight {name} must be >= 0")
        return self

    @classmethod
    def from_fleet(cls, params: FleetParams) -> "CostWeights":
        return cls(
            c_fuel=[u.c_fuel for u in params.thermal],
            c_on=[u.c_on for u in params.thermal],
            c_sw=[u.c_sw for u in params.thermal],
            c_st=[u.c_st for u in params.storage],
        )
