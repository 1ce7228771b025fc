from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, PlainSerializer, model_validator


def _read_only(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def as_vector(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise ValueError(f"expected a vector, got shape {arr.shape}")
    return _read_only(arr)


def as_binary(value: Any) -> np.ndarray:
    arr = np.array(value, ndmin=1)
    if arr.ndim != 1:
        raise ValueError(f"expected a vector, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("commitment entries must be 0 or 1")
    return _read_only(arr.astype(np.int8))


def as_matrix(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    return _read_only(arr)


def as_binary_matrix(value: Any) -> np.ndarray:
    arr = np.array(value)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("commitment entries must be 0 or 1")
    return _read_only(arr.astype(np.int8))


_to_list = PlainSerializer(lambda a: a.tolist(), return_type=list, when_used="json")

Vector = Annotated[np.ndarray, BeforeValidator(as_vector), _to_list]
BinaryVector = Annotated[np.ndarray, BeforeValidator(as_binary), _to_list]
Matrix = Annotated[np.ndarray, BeforeValidator(as_matrix), _to_list]
BinaryMatrix = Annotated[np.ndarray, BeforeValidator(as_binary_matrix), _to_list]


class ValueBase(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class GridState(ValueBase):
    x: Vector
    delta_prev: BinaryVector


class Setpoints(ValueBase):
    u_t: Vector
    u_s: Vector
    u_r: Vector
    delta_t: BinaryVector

    def with_delta(self, delta: Any) -> "Setpoints":
        return self.model_copy(update={"delta_t": as_binary(delta)})


class DisturbanceSample(ValueBase):
    w_r: Vector
    w_d: Vector

    @model_validator(mode="after")
    def _check_signs(self) -> "DisturbanceSample":
        if (self.w_r < 0).any():
            raise ValueError("available renewable power w_r must be >= 0")
        if (self.w_d > 0).any():
            raise ValueError("load w_d must be <= 0")
        return self

    @property
    def demand(self) -> float:
        return float(-self.w_d.sum())
