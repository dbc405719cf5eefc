"""
confband Synthetic Data
Generators for linear, bivariate daily-count and daily-flow-curve datasets,
their file writers and the end-to-end method comparison demo
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from confband.analysis.evaluate import evaluate
from confband.config import config
from confband.core.logger import console, logger
from confband.types import (
    FunctionalCovariates, FunctionalDataset, Method, Mode, RunConfig, TabularDataset,
)


def linear_data(n: int = 200, slope: float = 2.0, noise: float = 1.0, q: int = 1,
                seed: Optional[int] = None) -> TabularDataset:
    """y_j = slope * x + N(0, noise^2) for each of q components, x ~ U(0, 1)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, 1))
    y = slope * x + rng.normal(0.0, noise, size=(n, q))
    return TabularDataset(x=x, y=y)


def _day_covariates(rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    weekend = (np.arange(n) % 7 >= 5).astype(float)
    rain = (rng.uniform(size=n) < 0.25).astype(float)
    temp = rng.normal(18.0, 5.0, size=n)
    return weekend, rain, temp


def daily_counts(n: int = 41, seed: Optional[int] = None) -> TabularDataset:
    """
    Bivariate daily counts (trips started, trips ended) driven by weekend,
    rain and temperature, on a log scale.
    """
    rng = np.random.default_rng(seed)
    weekend, rain, temp = _day_covariates(rng, n)
    base = 5.0 - 0.35 * weekend - 0.5 * rain + 0.03 * temp
    shared = rng.normal(0.0, 0.15, size=n)
    started = base + shared + rng.normal(0.0, 0.08, size=n)
    ended = base - 0.05 + shared + rng.normal(0.0, 0.08, size=n)
    return TabularDataset(x=np.column_stack([weekend, rain, temp]),
                          y=np.column_stack([started, ended]))


def daily_flows(n: int = 41, grid_points: int = 90,
                seed: Optional[int] = None) -> Tuple[FunctionalDataset, FunctionalCovariates]:
    """
    Bivariate daily flow curves (entering, exiting) on a grid over [0, 24] hours.

    Working days show morning and evening peaks; weekends a single midday
    bump. Rain scales the whole day down.
    """
    rng = np.random.default_rng(seed)
    weekend, rain, temp = _day_covariates(rng, n)
    t = np.linspace(0.0, 24.0, grid_points)

    def bump(center: float, width: float) -> np.ndarray:
        return np.exp(-0.5 * ((t - center) / width) ** 2)

    working_in = 1.0 * bump(8.0, 1.2) + 0.6 * bump(18.0, 1.5)
    working_out = 0.6 * bump(8.5, 1.2) + 1.0 * bump(17.5, 1.5)
    leisure = 0.7 * bump(14.0, 3.0)

    entering, exiting = [], []
    for i in range(n):
        scale = (1.0 - 0.4 * rain[i]) * (1.0 + 0.01 * (temp[i] - 18.0))
        profile_in = leisure if weekend[i] else working_in
        profile_out = leisure if weekend[i] else working_out
        wiggle = 0.05 * np.sin(2 * np.pi * t / 24.0 + rng.uniform(0, 2 * np.pi))
        entering.append(scale * profile_in + wiggle + rng.normal(0.0, 0.04, grid_points))
        exiting.append(scale * profile_out + wiggle + rng.normal(0.0, 0.04, grid_points))

    ds = FunctionalDataset(values=[np.array(entering), np.array(exiting)], grids=[t, t])
    x = FunctionalCovariates(n=n, values=[weekend, rain, temp], grids=[None, None, None])
    return ds, x


# === Writers ===

def write_tabular_csv(ds: TabularDataset, path: Union[str, Path], n_test: int = 1,
                      feature_names: Optional[List[str]] = None,
                      response_names: Optional[List[str]] = None) -> List[str]:
    """Write ds as CSV, flagging the last n_test rows as test rows; returns the response columns."""
    feature_names = feature_names or [f"x{k + 1}" for k in range(ds.p)]
    response_names = response_names or [f"y{j + 1}" for j in range(ds.q)]
    df = pd.DataFrame(np.hstack([ds.x, ds.y]), columns=feature_names + response_names)
    flag = config.get("io.test_flag_column", "is_test")
    df[flag] = [0] * (ds.n - n_test) + [1] * n_test
    df.to_csv(path, index=False, float_format="%.10g")
    return response_names


def functional_document(ds: FunctionalDataset, x: Optional[FunctionalCovariates] = None,
                        n_test: int = 1) -> Dict[str, Any]:
    """The interchange document for ds; the last n_test curves become test entries."""
    n_train = ds.n - n_test
    doc: Dict[str, Any] = {
        "schema": config.get("io.schema_version", "confband/v1"),
        "grids": [g.tolist() for g in ds.grids],
        "train": [[c.tolist() for c in ds.curves(i)] for i in range(n_train)],
    }

    def covariate_row(i: int) -> List[Any]:
        return [v[i].tolist() for v in x.values]

    if x is not None and x.p:
        doc["covariates"] = {
            "grids": [None if g is None else g.tolist() for g in x.grids],
            "train": [covariate_row(i) for i in range(n_train)],
        }
    doc["test"] = []
    for i in range(n_train, ds.n):
        entry: Dict[str, Any] = {"y": [c.tolist() for c in ds.curves(i)]}
        if x is not None and x.p:
            entry["x"] = covariate_row(i)
        doc["test"].append(entry)
    return doc


def write_functional_document(doc: Dict[str, Any], path: Union[str, Path]):
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def generate(kind: str, out: Union[str, Path], n: int, seed: Optional[int],
             n_test: int = 1) -> Path:
    """Write one synthetic dataset (linear, counts or flows) to `out`."""
    out = Path(out)
    if kind == "linear":
        write_tabular_csv(linear_data(n, seed=seed), out, n_test)
    elif kind == "counts":
        write_tabular_csv(daily_counts(n, seed=seed), out, n_test,
                          feature_names=["weekend", "rain", "temp"],
                          response_names=["started", "ended"])
    else:
        ds, x = daily_flows(n, seed=seed)
        write_functional_document(functional_document(ds, x, n_test), out)
    logger.info(f"Wrote synthetic {kind} data ({n} rows) to {out}")
    return out


# === Demo ===

def run_demo(seed: int = 0, n: int = 41, alpha: float = 0.1):
    """
    Leave-one-out comparison of every method on the daily-count and
    daily-flow datasets; prints one table per mode.
    """
    counts = daily_counts(n, seed=seed)
    multi_cfg = RunConfig(mode=Mode.MULTI, method=Method.FULL, input="<synthetic>",
                          model="ols", alpha=alpha, score="max", seed=seed,
                          num_grid_pts_dim=30)
    console.rule("[bold]Bivariate daily counts[/]")
    report = evaluate(multi_cfg, counts,
                      methods=[Method.SPLIT, Method.JACKPLUS, Method.MSPLIT, Method.FULL])
    logger.eval_report([r.model_dump() for r in report.rows], alpha)

    flows, x = daily_flows(n, seed=seed)
    fd_cfg = RunConfig(mode=Mode.FD, method=Method.SPLIT, input="<synthetic>",
                       model="concurrent", alpha=alpha, seed=seed)
    console.rule("[bold]Daily flow curves[/]")
    fd_report = evaluate(fd_cfg, flows, x=x,
                         methods=[Method.SPLIT, Method.JACKPLUS, Method.MSPLIT])
    logger.eval_report([r.model_dump() for r in fd_report.rows], alpha)
    return report, fd_report
