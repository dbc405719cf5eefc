from confband.core.errors import BadConfig
from confband.models.base import ModelFit, ModelSpec, custom_model
from confband.models.functional import concurrent_model, mean_model_fd
from confband.models.tabular import mean_model, ols_model, ridge_model


def build_model(name: str, functional: bool = False, ridge_lambda: float = 1.0) -> ModelSpec:
    """Resolve a built-in model by its CLI name."""
    if functional:
        builders = {"mean": mean_model_fd, "concurrent": concurrent_model}
    else:
        builders = {"mean": mean_model, "ols": ols_model,
                    "ridge": lambda: ridge_model(ridge_lambda)}
    if name not in builders:
        kind = "functional" if functional else "multivariate"
        raise BadConfig(f"unknown {kind} model '{name}'")
    return builders[name]()


__all__ = [
    "ModelFit", "ModelSpec", "custom_model", "build_model",
    "mean_model", "ols_model", "ridge_model", "mean_model_fd", "concurrent_model",
]
