import os

from dotenv import load_dotenv
from pydantic_settings import BaseSettings

load_dotenv()


class GlobalConfig(BaseSettings):
    title: str = os.environ.get("TITLE", "mg-opcon")
    version: str = "1.0.0"
    description: str = os.environ.get(
        "DESCRIPTION",
        "Saturating-droop microgrid operation control: dispatch, constant setpoints and robust unit commitment",
    )
    debug: bool = os.environ.get("DEBUG", "false").lower() in ("1", "true", "yes")
    threads: int = int(os.environ.get("MG_OPCON_THREADS", os.cpu_count() or 1))

    # case study defaults
    ts_hours: float = 0.25
    u_min: float = -5.0
    u_max: float = 5.0
    prediction_horizon: int = 32
    simulation_steps: int = 672
    max_switches: int = 4
    max_nodes: int = int(os.environ.get("MG_OPCON_MAX_NODES", 50_000))
    seed: int = 42
    tolerance: float = 1e-9

    @property
    def log_level(self) -> str:
        return "DEBUG" if self.debug else "INFO"


settings = GlobalConfig()
