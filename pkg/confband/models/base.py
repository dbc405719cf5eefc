"""
confband Regression Contract
Pluggable train/predict pairs and their fitted payloads
"""
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, ConfigDict

from confband.core.errors import DimensionMismatch, ModelMismatch


class ModelFit(BaseModel):
    """Opaque fitted parameters, usable only with the ModelSpec that produced them."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    model: str
    payload: Any


class ModelSpec(BaseModel):
    """
    A regression method as a pair of procedures.

    train(x, y) returns any payload; predict(payload, x0) returns one row per
    test point and q columns (tabular) or q arrays of shape (n0, T_j)
    (functional). Both must be deterministic and safe to call concurrently
    on disjoint inputs.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    train: Callable[..., Any]
    predict: Callable[..., Any]
    functional: bool = False

    def fit(self, *args: Any) -> ModelFit:
        return ModelFit(model=self.name, payload=self.train(*args))

    def apply(self, fit: ModelFit, x0: Any):
        if fit.model != self.name:
            raise ModelMismatch(f"fit from model '{fit.model}' used with model '{self.name}'")
        out = self.predict(fit.payload, x0)
        if self.functional:
            return [np.asarray(c, dtype=float) for c in out]
        out = np.asarray(out, dtype=float)
        if out.ndim == 1:
            out = out.reshape(-1, 1)
        n0 = x0.shape[0] if hasattr(x0, "shape") else len(x0)
        if out.shape[0] != n0:
            raise DimensionMismatch(
                f"model '{self.name}' returned {out.shape[0]} rows for {n0} test points")
        return out


def custom_model(name: str, train: Callable[..., Any], predict: Callable[..., Any],
                 functional: bool = False) -> ModelSpec:
    """Wrap user procedures into a ModelSpec."""
    return ModelSpec(name=name, train=train, predict=predict, functional=functional)


def least_squares(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares coefficients (pseudo-inverse behaviour on rank deficiency)."""
    return np.linalg.lstsq(design, targets, rcond=None)[0]


def with_intercept(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return np.hstack([np.ones((x.shape[0], 1)), x])
