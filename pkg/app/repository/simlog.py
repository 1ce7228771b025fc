import logging
import re
from pathlib import Path
from typing import IO, List, Union

import numpy as np
import pandas as pd

from app.core.exception import parse_error
from app.schemas.scenario import SimLog

logger = logging.getLogger("mg_opcon.repository")

Source = Union[str, Path, IO[str]]

_SERIES = ("p_t", "p_s", "p_r", "x", "delta")
_DISTURBANCE = ("w_r", "w_d")


def _block(values: np.ndarray, prefix: str) -> dict:
    return {f"{prefix}_{i + 1}": values[:, i] for i in range(values.shape[1])}


def _numbered(frame: pd.DataFrame, prefix: str) -> List[str]:
    pattern = re.compile(rf"^{prefix}_(\d+)$")
    found = sorted((int(m.group(1)), name) for name in frame.columns if (m := pattern.match(name)))
    return [name for _, name in found]


class SimLogRepository:
    """
    SimLog CSV: `k, rho, p_t_i, p_s_i, p_r_i, x_i, delta_i, stage_cost`, then the
    realized `w_r_i, w_d_i` so a log can be read back on its own.
    """

    @staticmethod
    def frame(log: SimLog) -> pd.DataFrame:
        columns = {"k": np.arange(1, len(log) + 1), "rho": log.rho}
        for name in _SERIES:
            columns.update(_block(getattr(log, name), name))
        columns["stage_cost"] = log.stage_cost
        for name in _DISTURBANCE:
            columns.update(_block(getattr(log, name), name))
        return pd.DataFrame(columns)

    def write(self, log: SimLog, target: Source) -> None:
        self.frame(log).to_csv(target, index=False)
        logger.debug(f"Wrote {len(log)} log rows")

    def read(self, source: Source, x_0, delta_0, ts: float) -> SimLog:
        try:
            frame = pd.read_csv(source, float_precision="round_trip")
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise parse_error(msg=f"cannot read simulation log: {e}") from e

        missing = {"k", "rho", "stage_cost"} - set(frame.columns)
        if missing:
            raise parse_error(msg=f"simulation log lacks column(s) {sorted(missing)}")

        def matrix(prefix: str) -> np.ndarray:
            names = _numbered(frame, prefix)
            return frame[names].to_numpy(dtype=float).reshape(len(frame), len(names))

        try:
            return SimLog(
                ts=ts,
                x_0=x_0,
                delta_0=delta_0,
                rho=frame["rho"].to_numpy(dtype=float),
                p_t=matrix("p_t"),
                p_s=matrix("p_s"),
                p_r=matrix("p_r"),
                x=matrix("x"),
                delta=matrix("delta").astype(np.int8),
                w_r=matrix("w_r"),
                w_d=matrix("w_d"),
                stage_cost=frame["stage_cost"].to_numpy(dtype=float),
            )
        except ValueError as e:
            raise parse_error(msg=f"simulation log is inconsistent: {e}") from e
