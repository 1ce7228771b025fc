import logging
import re
from pathlib import Path
from typing import Optional, Union

from pydantic import ValidationError

from app.control.model import validate_params
from app.core.exception import configuration_error, parse_error
from app.schemas.fleet import FleetConfig

logger = logging.getLogger("mg_opcon.repository")

_JSON_POSITION = re.compile(r"at line (\d+) column (\d+)")


def _json_line(error: dict) -> Optional[int]:
    match = _JSON_POSITION.search(str(error.get("ctx", {}).get("error", "")))
    return int(match.group(1)) if match else None


class FleetRepository:
    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)

    def _read(self) -> str:
        try:
            return self.path.read_text()
        except OSError as e:
            raise configuration_error(msg=f"cannot read fleet file {self.path}: {e}") from e

    def load(self) -> FleetConfig:
        """
        Read and validate `fleet.json`.

        Raises:
            ConfigurationError: if the file is missing, a field has the wrong
                type, or the fleet breaks a physical invariant.
            ParseError: if the file is not JSON, with the line of the first error.
        """
        try:
            config = FleetConfig.model_validate_json(self._read())
        except ValidationError as e:
            broken = [err for err in e.errors() if err["type"] == "json_invalid"]
            if broken:
                reason = broken[0].get("ctx", {}).get("error", broken[0]["msg"])
                raise parse_error(msg=f"{self.path} is not valid JSON: {reason}", row=_json_line(broken[0])) from e
            raise configuration_error(msg=f"{self.path}: {e.error_count()} invalid field(s)\n{e}") from e

        report = validate_params(config.params)
        if not report.ok:
            rules = "; ".join(f"{v.unit}[{v.index}] {v.rule} ({v.detail})" for v in report.violations)
            raise configuration_error(msg=f"{self.path}: {rules}")

        logger.debug(
            f"Loaded fleet {self.path}: {config.params.n_t} thermal, "
            f"{config.params.n_s} storage, {config.params.n_r} renewable"
        )
        return config
