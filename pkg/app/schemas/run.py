from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings
from app.schemas.ems import EmsOptions
from app.schemas.enum import Controller


class RunConfig(BaseModel):
    """Everything a closed-loop run or a sweep needs besides the loaded files."""
    model_config = ConfigDict(frozen=True)

    controllers: Tuple[Controller, ...] = tuple(Controller)
    alphas: Tuple[float, ...] = (0.0,)
    nsim: Optional[int] = Field(default=None, ge=1)
    rated: Optional[Tuple[float, ...]] = None
    options: EmsOptions = EmsOptions()
    timing: bool = True

    @field_validator("alphas")
    @classmethod
    def _check_alphas(cls, alphas: Tuple[float, ...]) -> Tuple[float, ...]:
        if not alphas:
            raise ValueError("at least one alpha is required")
        for alpha in alphas:
            if not 0.0 <= alpha <= 1.0:
                raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        return alphas

    def steps(self, available: int) -> int:
        """Closed-loop steps: the configured count, else as many as the bounds allow up to the default week."""
        if self.nsim is not None:
            return self.nsim
        return min(settings.simulation_steps, available - self.options.np_steps)
