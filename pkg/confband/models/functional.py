"""
confband Functional Regression Models
Pointwise mean and concurrent linear regression on shared grids
"""
from typing import List

import numpy as np

from confband.core.errors import EmptyTraining, GridMismatch
from confband.models.base import ModelSpec, least_squares, with_intercept
from confband.types import FunctionalCovariates


def mean_model_fd() -> ModelSpec:
    """Pointwise cross-observation mean curve per component."""

    def train(x: FunctionalCovariates, y: List[np.ndarray], grids: List[np.ndarray]):
        if y[0].shape[0] == 0:
            raise EmptyTraining("mean model needs at least one curve")
        return {"mean": [v.mean(axis=0) for v in y]}

    def predict(payload, x0: FunctionalCovariates):
        return [np.tile(m, (x0.n, 1)) for m in payload["mean"]]

    return ModelSpec(name="mean", train=train, predict=predict, functional=True)


def _design_at(x: FunctionalCovariates, grid: np.ndarray, s: int) -> np.ndarray:
    """Covariate matrix (n, p) at grid point s; scalar covariates are constant in t."""
    cols = []
    for k, (vals, g) in enumerate(zip(x.values, x.grids)):
        if g is None:
            cols.append(vals)
        else:
            if g.shape != grid.shape or not np.array_equal(g, grid):
                raise GridMismatch(f"covariate {k} is not evaluated on the response grid")
            cols.append(vals[:, s])
    if not cols:
        return np.empty((x.n, 0))
    return np.column_stack(cols)


def concurrent_model() -> ModelSpec:
    """
    Concurrent functional regression.

    y_j(s) = b0(s) + sum_k b_k(s) x_k(s) + e(s), fitted by an independent
    least-squares problem at every grid point s of every component j.
    Functional covariates must share the response grid.
    """

    def train(x: FunctionalCovariates, y: List[np.ndarray], grids: List[np.ndarray]):
        if y[0].shape[0] == 0:
            raise EmptyTraining("concurrent model needs at least one curve")
        betas = []
        for vals, grid in zip(y, grids):
            beta = np.empty((len(grid), x.p + 1))
            for s in range(len(grid)):
                design = with_intercept(_design_at(x, grid, s))
                beta[s] = least_squares(design, vals[:, s:s + 1])[:, 0]
            betas.append(beta)
        return {"beta": betas, "grids": [np.asarray(g) for g in grids]}

    def predict(payload, x0: FunctionalCovariates):
        out = []
        for beta, grid in zip(payload["beta"], payload["grids"]):
            pred = np.empty((x0.n, len(grid)))
            for s in range(len(grid)):
                pred[:, s] = (with_intercept(_design_at(x0, grid, s)) @ beta[s][:, None])[:, 0]
            out.append(pred)
        return out

    return ModelSpec(name="concurrent", train=train, predict=predict, functional=True)
