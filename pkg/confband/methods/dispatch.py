"""
confband Method Dispatch
Turns a RunConfig into a call of the matching conformal method
"""
from typing import Optional, Union

import numpy as np

from confband.config import config
from confband.core.errors import BadConfig
from confband.methods.functional import jackplus_fd, msplit_fd, split_fd
from confband.methods.multi import full, jackknife, jackplus, msplit, split
from confband.models import build_model
from confband.models.base import ModelSpec
from confband.types import (
    FullConfig, FullResult, FunctionalCovariates, FunctionalDataset, FunctionalResult, Method,
    Mode, MsplitConfig, MultiResult, RunConfig, TabularDataset,
)


def split_rho(cfg: RunConfig) -> float:
    return cfg.rho[0] if cfg.rho else float(config.get("split.rho", 0.5))


def full_config(cfg: RunConfig) -> FullConfig:
    return FullConfig(
        alpha=cfg.alpha, score=cfg.score, s_type=cfg.s_type,
        num_grid_pts_dim=cfg.num_grid_pts_dim or config.get("full.num_grid_pts_dim", 100),
        grid_factor=cfg.grid_factor or config.get("full.grid_factor", 1.25),
        max_candidates=config.get("full.max_candidates", 1_000_000),
    )


def msplit_config(cfg: RunConfig) -> MsplitConfig:
    """Flags first, then the per-mode defaults in config.yaml; one rho is shared by all replicates."""
    key = "msplit.fd" if cfg.mode == Mode.FD else "msplit.multi"
    B = cfg.B if cfg.B is not None else config.get(f"{key}.B", 50 if cfg.mode == Mode.FD else 100)
    rho = None
    if cfg.rho:
        rho = list(cfg.rho) if len(cfg.rho) > 1 else [cfg.rho[0]] * max(B, 0)
    return MsplitConfig(
        B=B,
        tau=cfg.tau if cfg.tau is not None else config.get(
            f"{key}.tau", 0.5 if cfg.mode == Mode.FD else 0.1),
        lam=cfg.lam if cfg.lam is not None else config.get("msplit.lambda", 0),
        rho=rho,
    )


def model_for(cfg: RunConfig) -> ModelSpec:
    return build_model(cfg.model, functional=cfg.mode == Mode.FD, ridge_lambda=cfg.ridge_lambda)


def run_multi(cfg: RunConfig, ds: TabularDataset, x0: np.ndarray,
              model: Optional[ModelSpec] = None,
              mad_model: Optional[ModelSpec] = None) -> Union[MultiResult, FullResult]:
    model = model or model_for(cfg)
    if cfg.method == Method.FULL:
        return full(ds, x0, model, full_config(cfg))
    if cfg.method == Method.SPLIT:
        return split(ds, x0, model, cfg.alpha, split_rho(cfg), cfg.seed, cfg.split, cfg.score,
                     cfg.s_type, cfg.randomized, cfg.seed_rand, mad_model)
    if cfg.method == Method.JACKPLUS:
        return jackplus(ds, x0, model, cfg.alpha, cfg.s_type)
    if cfg.method == Method.JACKKNIFE:
        return jackknife(ds, x0, model, cfg.alpha, cfg.s_type)
    if cfg.method == Method.MSPLIT:
        return msplit(ds, x0, model, cfg.alpha, msplit_config(cfg), cfg.seed, cfg.split,
                      cfg.score, cfg.s_type, cfg.randomized, cfg.seed_rand, mad_model)
    raise BadConfig(f"unknown method {cfg.method}")


def run_fd(cfg: RunConfig, ds: FunctionalDataset, x: Optional[FunctionalCovariates],
           x0: Optional[FunctionalCovariates],
           model: Optional[ModelSpec] = None) -> FunctionalResult:
    model = model or model_for(cfg)
    if cfg.method == Method.SPLIT:
        return split_fd(ds, x, x0, model, cfg.alpha, split_rho(cfg), cfg.seed, cfg.split,
                        cfg.s_type, cfg.randomized, cfg.seed_rand)
    if cfg.method == Method.JACKPLUS:
        return jackplus_fd(ds, x, x0, model, cfg.alpha, cfg.s_type)
    if cfg.method == Method.MSPLIT:
        return msplit_fd(ds, x, x0, model, cfg.alpha, msplit_config(cfg), cfg.seed, cfg.split,
                         cfg.s_type, cfg.randomized, cfg.seed_rand)
    raise BadConfig(f"method {cfg.method.value} is not available for functional responses")


def fresh_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1)[0])


def with_drawn_seeds(cfg: RunConfig) -> RunConfig:
    """
    Fill the seeds a run would otherwise draw internally.

    Split-based methods without an explicit split get a concrete split seed,
    and randomized runs a concrete smoothing seed, so the echoed config
    replays the same regions.
    """
    update = {}
    if cfg.method in (Method.SPLIT, Method.MSPLIT):
        if cfg.seed is None and cfg.split is None:
            update["seed"] = fresh_seed()
        if cfg.randomized and cfg.seed_rand is None:
            update["seed_rand"] = fresh_seed()
    return cfg.model_copy(update=update) if update else cfg
