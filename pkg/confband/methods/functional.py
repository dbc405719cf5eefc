"""
confband Functional Conformal Methods
Split, jackknife+ and multi-split prediction bands for multivariate functional responses
"""
import math
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from confband.analysis.aggregate import interleave_bounds, most_conformal_box
from confband.analysis.scores import (
    bounding_box, ceil_index, extended_quantile_indices, fit_modulation, score_fun_batch,
)
from confband.config import config
from confband.core.data import make_split
from confband.core.errors import DimensionMismatch, TooFewRows, check_alpha
from confband.core.logger import logger
from confband.core.parallel import ordered_map
from confband.methods.multi import replicate_seeds, split_radius
from confband.models.base import ModelSpec
from confband.models.functional import mean_model_fd
from confband.types import (
    FunctionalBand, FunctionalCovariates, FunctionalDataset, FunctionalResult, Method,
    ModulationKind, MsplitConfig,
)


def _covariates(ds: FunctionalDataset, x: Optional[FunctionalCovariates]) -> FunctionalCovariates:
    if x is None:
        return FunctionalCovariates(n=ds.n)
    if x.n != ds.n:
        raise DimensionMismatch(f"{x.n} covariate rows for {ds.n} response curves")
    return x


def _test_covariates(x: FunctionalCovariates,
                     x0: Optional[FunctionalCovariates]) -> FunctionalCovariates:
    """A missing x0 means one prediction from a covariate-free model."""
    if x0 is None:
        if x.p:
            raise DimensionMismatch("test covariates are required when training covariates exist")
        return FunctionalCovariates(n=1)
    if x0.p != x.p:
        raise DimensionMismatch(f"test points have {x0.p} covariates, training has {x.p}")
    return x0


class BandCore(NamedTuple):
    pred: List[np.ndarray]      # q arrays (n0, T_j)
    lo: List[np.ndarray]
    up: List[np.ndarray]
    d: float
    k: int
    tau: Optional[float]
    calib: List[int]


def _split_fd_core(ds: FunctionalDataset, x: FunctionalCovariates, x0: FunctionalCovariates,
                   model: ModelSpec, alpha: float, rho: float, seed: Optional[int],
                   explicit: Optional[Sequence[int]], s_type: ModulationKind,
                   randomized: bool, seed_rand: Optional[int],
                   method: Method = Method.SPLIT) -> BandCore:
    idx = make_split(ds.n, rho, seed, explicit)
    train, calib = ds.take(idx.train), ds.take(idx.calib)
    x_train, x_calib = x.take(idx.train), x.take(idx.calib)

    fit = model.fit(x_train, list(train.values), list(ds.grids))
    resid_train = [y - p for y, p in zip(train.values, model.apply(fit, x_train))]
    mod = fit_modulation(s_type, resid_train, alpha, list(ds.grids))

    resid_calib = [y - p for y, p in zip(calib.values, model.apply(fit, x_calib))]
    scores = score_fun_batch(resid_calib, mod.s)
    d, k, tau = split_radius(scores, alpha, randomized, seed_rand)
    if math.isinf(d):
        logger.degenerate(method.value, f"k = {k} exceeds l = {idx.l}: band is unbounded")
    logger.method_step(method.value, "split_fd", f"m={idx.m} l={idx.l} k={k} d={d:.6g}")

    pred = model.apply(fit, x0)
    lo = [p - d * s[None, :] for p, s in zip(pred, mod.s)]
    up = [p + d * s[None, :] for p, s in zip(pred, mod.s)]
    return BandCore(pred=pred, lo=lo, up=up, d=d, k=k, tau=tau,
                    calib=[int(i) for i in idx.calib])


def _bands(grids, core: BandCore, alpha: float, method: Method) -> List[FunctionalBand]:
    n0 = core.pred[0].shape[0]
    return [
        FunctionalBand(t=list(grids), lo=[c[i] for c in core.lo], up=[c[i] for c in core.up],
                       alpha=alpha, method=method, pred=[c[i] for c in core.pred])
        for i in range(n0)
    ]


def split_fd(ds: FunctionalDataset, x: Optional[FunctionalCovariates] = None,
             x0: Optional[FunctionalCovariates] = None, model: Optional[ModelSpec] = None,
             alpha: float = 0.1, rho: float = 0.5, seed: Optional[int] = None,
             explicit: Optional[Sequence[int]] = None,
             s_type: ModulationKind = ModulationKind.ST_DEV, randomized: bool = False,
             seed_rand: Optional[int] = None) -> FunctionalResult:
    """
    Split conformal prediction bands.

    Trains on I1, fits the modulation on I1 residual curves, takes d from the
    sup-modulated scores on I2 and returns mu_j(x0)(t) +/- d*s_j(t). Without
    x0 the mean model is used and one band is reported per validation point.

    Args:
        ds: functional responses
        x: covariates (None for none)
        x0: test covariates
        model: functional regression method (mean when omitted)
        alpha: miscoverage level
        rho: training fraction
        seed: split seed
        explicit: training indices overriding the random split
        s_type: identity, st-dev or alpha-max
        randomized: smoothed variant
        seed_rand: seed of the smoothing draw

    Returns:
        FunctionalResult with one band per test (or validation) point
    """
    check_alpha(alpha)
    x = _covariates(ds, x)
    s_type = ModulationKind(s_type)
    info = {}
    if x0 is None:
        model = mean_model_fd()
        idx = make_split(ds.n, rho, seed, explicit)
        # pin the split so the reported points are the calibration set used
        explicit = [int(i) for i in idx.train]
        x0_eff = FunctionalCovariates(n=idx.l)
        info["points"] = [int(i) for i in idx.calib]
    else:
        model = model or mean_model_fd()
        x0_eff = _test_covariates(x, x0)

    core = _split_fd_core(ds, x, x0_eff, model, alpha, rho, seed, explicit, s_type,
                          randomized, seed_rand)
    info.update({"d": core.d, "k": core.k, "model": model.name})
    if core.tau is not None:
        info["tau"] = core.tau
    return FunctionalResult(method=Method.SPLIT, alpha=alpha,
                            bands=_bands(ds.grids, core, alpha, Method.SPLIT), info=info)


def jackplus_fd(ds: FunctionalDataset, x: Optional[FunctionalCovariates] = None,
                x0: Optional[FunctionalCovariates] = None, model: Optional[ModelSpec] = None,
                alpha: float = 0.1,
                s_type: ModulationKind = ModulationKind.ST_DEV) -> FunctionalResult:
    """
    Jackknife+ prediction bands.

    The 2n candidate curves mu_{-i}(x0) -/+ |R_i| are ranked by the max
    conformity around their pointwise median, with the modulation fitted on
    the signed LOO residual curves; the band is the pointwise bounding box
    of the ceil((1-alpha)2n) most conformal.
    """
    check_alpha(alpha)
    model = model or mean_model_fd()
    x = _covariates(ds, x)
    x0 = _test_covariates(x, x0)
    n = ds.n
    if n < 2:
        raise TooFewRows(f"leave-one-out needs at least 2 observations, got {n}")
    grids = list(ds.grids)
    everyone = np.arange(n)

    def fit_without(i: int):
        rest = np.delete(everyone, i)
        fit = model.fit(x.take(rest), list(ds.take(rest).values), grids)
        at_i = model.apply(fit, x.take([i]))
        return [c[0] for c in at_i], model.apply(fit, x0)

    outs = ordered_map(fit_without, range(n))
    logger.method_step(Method.JACKPLUS.value, "loo", f"{n} leave-one-out fits")
    q = ds.q
    residuals = [ds.values[j] - np.vstack([o[0][j] for o in outs]) for j in range(q)]
    abs_res = [np.abs(r) for r in residuals]
    # pred_test[j] has shape (n, n0, T_j)
    pred_test = [np.stack([o[1][j] for o in outs]) for j in range(q)]
    mod = fit_modulation(ModulationKind(s_type), residuals, alpha, grids)
    keep = min(max(ceil_index((1 - alpha) * 2 * n), 1), 2 * n)

    full_fit = model.fit(x, list(ds.values), grids)
    full_pred = model.apply(full_fit, x0)
    bands = []
    for t in range(x0.n):
        cand = [np.vstack([pred_test[j][:, t, :] - abs_res[j], pred_test[j][:, t, :] + abs_res[j]])
                for j in range(q)]
        center = [np.median(c, axis=0) for c in cand]
        idx = extended_quantile_indices(cand, keep, mod, center)
        lo, up = bounding_box([c[idx] for c in cand])
        bands.append(FunctionalBand(t=grids, lo=lo, up=up, alpha=alpha, method=Method.JACKPLUS,
                                    pred=[p[t] for p in full_pred]))
    return FunctionalResult(method=Method.JACKPLUS, alpha=alpha, bands=bands,
                            info={"n_fits": n, "keep": keep, "model": model.name})


def msplit_fd(ds: FunctionalDataset, x: Optional[FunctionalCovariates] = None,
              x0: Optional[FunctionalCovariates] = None, model: Optional[ModelSpec] = None,
              alpha: float = 0.1, cfg: Optional[MsplitConfig] = None,
              seed: Optional[int] = None, explicit: Optional[Sequence[int]] = None,
              s_type: ModulationKind = ModulationKind.ST_DEV, randomized: bool = False,
              seed_rand: Optional[int] = None) -> FunctionalResult:
    """
    Multi-split prediction bands.

    B split_fd replicates at alpha(1 - tau + lambda/B); the 2B bound curves
    are pooled and the band is the pointwise bounding box of the
    ceil(2*tau*B) most conformal.
    """
    check_alpha(alpha)
    cfg = cfg or MsplitConfig(B=config.get("msplit.fd.B", 50),
                              tau=config.get("msplit.fd.tau", 0.5),
                              lam=config.get("msplit.lambda", 0))
    inner = cfg.inner_alpha(alpha)
    model = model or mean_model_fd()
    x = _covariates(ds, x)
    x0 = _test_covariates(x, x0)
    rhos = cfg.rhos()
    seeds = replicate_seeds(seed, cfg.B)
    rand_seeds = replicate_seeds(seed_rand, cfg.B)
    s_type = ModulationKind(s_type)

    def replicate(b: int) -> BandCore:
        return _split_fd_core(ds, x, x0, model, inner, rhos[b], seeds[b], explicit, s_type,
                              randomized, rand_seeds[b], method=Method.MSPLIT)

    cores = ordered_map(replicate, range(cfg.B))
    keep = cfg.keep_count
    if keep < 2:
        logger.degenerate(Method.MSPLIT.value,
                          f"ceil(2*tau*B) = {keep}: the joined band is a single bound curve")

    bands = []
    for t in range(x0.n):
        pool = interleave_bounds([[c[t] for c in core.lo] for core in cores],
                                 [[c[t] for c in core.up] for core in cores])
        pred = [np.median(np.stack([core.pred[j][t] for core in cores]), axis=0)
                for j in range(ds.q)]
        lo, up = most_conformal_box(pool, keep, Method.MSPLIT.value, center=pred)
        bands.append(FunctionalBand(t=list(ds.grids), lo=lo, up=up, alpha=alpha,
                                    method=Method.MSPLIT, pred=pred))
    return FunctionalResult(method=Method.MSPLIT, alpha=alpha, bands=bands,
                            info={"B": cfg.B, "tau": cfg.tau, "lambda": cfg.lam,
                                  "inner_alpha": inner, "keep": keep, "model": model.name,
                                  "replicate_seeds": seeds})
