"""
confband Tabular Regression Models
Mean, per-component least squares and ridge for multivariate responses
"""
import numpy as np

from confband.core.errors import BadLambda, EmptyTraining
from confband.models.base import ModelSpec, least_squares, with_intercept


def _as_matrix(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y.reshape(-1, 1) if y.ndim == 1 else y


def mean_model() -> ModelSpec:
    """Columnwise sample mean, ignoring the features."""

    def train(x, y):
        y = _as_matrix(y)
        if y.shape[0] == 0:
            raise EmptyTraining("mean model needs at least one observation")
        return {"mean": y.mean(axis=0)}

    def predict(payload, x0):
        n0 = np.asarray(x0).shape[0]
        return np.tile(payload["mean"], (n0, 1))

    return ModelSpec(name="mean", train=train, predict=predict)


def ols_model() -> ModelSpec:
    """
    Ordinary least squares with intercept, fitted separately per component.

    Rank-deficient designs get the minimum-norm solution.
    """

    def train(x, y):
        y = _as_matrix(y)
        if y.shape[0] == 0:
            raise EmptyTraining("least squares needs at least one observation")
        return {"beta": least_squares(with_intercept(x), y)}

    def predict(payload, x0):
        return with_intercept(x0) @ payload["beta"]

    return ModelSpec(name="ols", train=train, predict=predict)


def ridge_model(lam: float) -> ModelSpec:
    """
    Ridge regression, beta = (X'X + lam*I)^-1 X'y per component.

    The intercept is not penalized and features are used as given.
    """
    if lam < 0:
        raise BadLambda(f"ridge lambda must be nonnegative, got {lam}")

    def train(x, y):
        y = _as_matrix(y)
        if y.shape[0] == 0:
            raise EmptyTraining("ridge needs at least one observation")
        design = with_intercept(x)
        k = design.shape[1]
        penalty = np.sqrt(lam) * np.eye(k)[1:]
        # augmented least squares: [X; sqrt(lam) D] beta = [y; 0]
        augmented = np.vstack([design, penalty])
        targets = np.vstack([y, np.zeros((k - 1, y.shape[1]))])
        return {"beta": least_squares(augmented, targets)}

    def predict(payload, x0):
        return with_intercept(x0) @ payload["beta"]

    return ModelSpec(name="ridge", train=train, predict=predict)
