"""
confband Evaluation
Leave-one-out coverage, region size and runtime comparison of methods
"""
import time
from typing import List, Optional, Sequence, Union

import numpy as np

from confband.core.data import region_size
from confband.core.errors import ConformalError, TooFewRows
from confband.core.logger import logger
from confband.methods.dispatch import model_for, run_fd, run_multi
from confband.methods.multi import full_region_size, pvalue_at
from confband.types import (
    EvalReport, EvalRow, FunctionalCovariates, FunctionalDataset, Method, Mode, RunConfig,
    TabularDataset,
)


def _method_config(cfg: RunConfig, method: Method) -> RunConfig:
    """Per-method copy of cfg; flags a method does not take are dropped."""
    update = {"method": method}
    if method != Method.MSPLIT:
        update.update({"B": None, "tau": None, "lam": None})
    if method != Method.FULL:
        update.update({"num_grid_pts_dim": None, "grid_factor": None})
    return cfg.model_copy(update=update)


def _fold_multi(cfg: RunConfig, ds: TabularDataset, i: int):
    rest = ds.take(np.delete(np.arange(ds.n), i))
    x0, y0 = ds.x[i:i + 1], ds.y[i]
    model = model_for(cfg)
    start = time.perf_counter()
    result = run_multi(cfg, rest, x0, model)
    elapsed = time.perf_counter() - start
    if cfg.method == Method.FULL:
        surface = result.surfaces[0]
        covered = pvalue_at(rest.x, rest.y, x0[0], y0, model, cfg.score, cfg.s_type) > cfg.alpha
        return covered, full_region_size(surface, cfg.alpha), elapsed
    region = result.regions[0]
    return region.contains(y0), region_size(region), elapsed


def _fold_fd(cfg: RunConfig, ds: FunctionalDataset, x: Optional[FunctionalCovariates], i: int):
    keep = np.delete(np.arange(ds.n), i)
    rest = ds.take(keep)
    x_rest = x.take(keep) if x is not None else None
    x0 = x.take([i]) if x is not None else FunctionalCovariates(n=1)
    start = time.perf_counter()
    result = run_fd(cfg, rest, x_rest, x0)
    elapsed = time.perf_counter() - start
    band = result.bands[0]
    return band.contains(ds.curves(i)), region_size(band), elapsed


def evaluate(cfg: RunConfig, dataset: Union[TabularDataset, FunctionalDataset],
             x: Optional[FunctionalCovariates] = None,
             methods: Optional[Sequence[Method]] = None) -> EvalReport:
    """
    Leave-one-out evaluation.

    For every observation i the method is run on the other n-1 points and
    asked whether its region at x_i contains y_i. Wall time covers the
    method call only.

    Args:
        cfg: run settings (method is overridden by `methods`)
        dataset: tabular or functional data, n >= 3
        x: functional covariates
        methods: methods to compare; cfg.method when omitted

    Returns:
        EvalReport with one row per method
    """
    if dataset.n < 3:
        raise TooFewRows(f"leave-one-out evaluation needs at least 3 observations, got {dataset.n}")
    methods = list(methods) if methods else [cfg.method]

    rows: List[EvalRow] = []
    for method in methods:
        mcfg = _method_config(cfg, Method(method))
        covered, sizes, times = [], [], []
        for i in range(dataset.n):
            try:
                if cfg.mode == Mode.FD:
                    hit, size, elapsed = _fold_fd(mcfg, dataset, x, i)
                else:
                    hit, size, elapsed = _fold_multi(mcfg, dataset, i)
            except ConformalError as e:
                raise e.with_context(fold=i, method=mcfg.method.value)
            covered.append(bool(hit))
            sizes.append(size)
            times.append(elapsed)
            logger.method_step(mcfg.method.value, "fold", f"{i}: covered={hit} size={size:.4g}",
                               fold=i)
        rows.append(EvalRow(method=mcfg.method.value, coverage=float(np.mean(covered)),
                            avg_size=float(np.mean(sizes)), avg_time=float(np.mean(times)),
                            folds=dataset.n))
    return EvalReport(mode=cfg.mode, alpha=cfg.alpha, rows=rows)
