"""
confband Multivariate Conformal Methods
Full, split (classical and smoothed), jackknife+, jackknife and multi-split
prediction regions for q-dimensional responses
"""
import math
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from confband.analysis.aggregate import (
    interleave_bounds, membership_segments, most_conformal_box,
)
from confband.analysis.scores import (
    as_components, bounding_box, ceil_index, extended_quantile_indices, fit_modulation,
    jk_quantiles, modulation_floor, order_statistic, residual_covariance, score_multi_batch,
)
from confband.config import config
from confband.core.data import make_split
from confband.core.errors import (
    DimensionMismatch, EmptyCalibration, GridExplosion, TooFewRows, check_alpha,
)
from confband.core.logger import logger
from confband.core.parallel import get_threads, ordered_map
from confband.models.base import ModelSpec
from confband.types import (
    EllipsoidShape, FullConfig, FullResult, Method, ModulationKind, MsplitConfig,
    MultiResult, PredictionRegion, PValueSurface, ScoreKind, TabularDataset,
)


def _test_matrix(ds: TabularDataset, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = x0.reshape(1, -1) if ds.p > 1 or x0.shape[0] == 1 else x0.reshape(-1, 1)
    if x0.shape[0] == 0:
        raise DimensionMismatch("no test points given")
    if x0.shape[1] != ds.p:
        raise DimensionMismatch(f"test points have {x0.shape[1]} features, training has {ds.p}")
    return x0


def _modulation_vector(kind: ModulationKind, residuals: np.ndarray, alpha: float) -> np.ndarray:
    return fit_modulation(kind, residuals, alpha).vector()


# === Full conformal ===

def _augmented_scores(x_aug: np.ndarray, y_aug: np.ndarray, model: ModelSpec,
                      score: ScoreKind, s_type: ModulationKind) -> np.ndarray:
    fit = model.fit(x_aug, y_aug)
    resid = y_aug - model.apply(fit, x_aug)
    if s_type == ModulationKind.ST_DEV:
        s = np.maximum(np.std(resid, axis=0, ddof=1), modulation_floor())
    else:
        s = np.ones(resid.shape[1])
    cov_inv = residual_covariance(resid)[1] if score == ScoreKind.MAHALANOBIS else None
    return score_multi_batch(score, resid, s, cov_inv)


def pvalue_at(x, y, x0, ycand, model: ModelSpec, score: ScoreKind = ScoreKind.L2,
              s_type: ModulationKind = ModulationKind.ST_DEV) -> float:
    """
    Full conformal p-value of one candidate response.

    Refits on {(x_i, y_i)} plus (x0, ycand) and returns the fraction of the
    n+1 augmented scores that are >= the candidate's own score.

    Args:
        x: (n, p) training features, n >= 1
        y: (n, q) training responses
        x0: one test feature vector
        ycand: candidate response of length q
        model: regression method
        score: nonconformity score
        s_type: identity or st-dev, fitted on the augmented residuals

    Returns:
        delta_y, a multiple of 1/(n+1) in (0, 1]
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    y = y.reshape(x.shape[0], -1)
    x_aug = np.vstack([x, np.asarray(x0, dtype=float).reshape(1, -1)])
    y_aug = np.vstack([y, np.asarray(ycand, dtype=float).reshape(1, -1)])
    scores = _augmented_scores(x_aug, y_aug, model, ScoreKind(score), ModulationKind(s_type))
    return float(np.count_nonzero(scores >= scores[-1]) / len(scores))


def candidate_axes(y: np.ndarray, num_grid_pts_dim: int, grid_factor: float) -> List[np.ndarray]:
    """Per-component candidate axis on [-g*max|y_k|, g*max|y_k|]."""
    y = np.atleast_2d(y)
    return [np.linspace(-grid_factor * np.max(np.abs(y[:, k])),
                        grid_factor * np.max(np.abs(y[:, k])), num_grid_pts_dim)
            for k in range(y.shape[1])]


def full(ds: TabularDataset, x0, model: ModelSpec,
         cfg: Optional[FullConfig] = None) -> FullResult:
    """
    Full conformal prediction over a candidate grid.

    Every candidate refits the model on the augmented dataset; candidates
    are evaluated in order-preserving chunks across the worker pool.
    """
    cfg = cfg or FullConfig()
    x0 = _test_matrix(ds, x0)
    n, q = ds.n, ds.q
    n_candidates = cfg.num_grid_pts_dim ** q
    if n_candidates > cfg.max_candidates:
        raise GridExplosion(
            f"{cfg.num_grid_pts_dim}^{q} = {n_candidates} candidates exceed the cap "
            f"of {cfg.max_candidates}")

    axes = candidate_axes(ds.y, cfg.num_grid_pts_dim, cfg.grid_factor)
    mesh = np.meshgrid(*axes, indexing="ij")
    candidates = np.column_stack([m.ravel() for m in mesh])
    chunks = np.array_split(np.arange(n_candidates), max(1, min(n_candidates, 4 * get_threads())))

    surfaces = []
    for t, point in enumerate(x0):
        x_aug = np.vstack([ds.x, point[None, :]])

        def evaluate(chunk: np.ndarray) -> np.ndarray:
            out = np.empty(len(chunk))
            for pos, c in enumerate(chunk):
                y_aug = np.vstack([ds.y, candidates[c][None, :]])
                scores = _augmented_scores(x_aug, y_aug, model, cfg.score, cfg.s_type)
                out[pos] = np.count_nonzero(scores >= scores[-1]) / (n + 1)
            return out

        pvals = np.concatenate(ordered_map(evaluate, chunks))
        logger.method_step("full", "test point", f"{t}: {int(np.sum(pvals > cfg.alpha))} "
                           f"of {n_candidates} candidates accepted")
        surfaces.append(PValueSurface(candidates=candidates, pvals=pvals, x0=point,
                                      axes=axes, n=n))

    fit = model.fit(ds.x, ds.y)
    return FullResult(alpha=cfg.alpha, pred=model.apply(fit, x0), surfaces=surfaces,
                      info={"n_candidates": n_candidates, "score": cfg.score.value,
                            "s_type": cfg.s_type.value})


def full_region_size(surface: PValueSurface, alpha: float) -> float:
    """Accepted candidate count times the grid cell volume."""
    return float(np.count_nonzero(surface.in_region(alpha)) * surface.cell_volume())


# === Split conformal ===

class SplitCore(NamedTuple):
    pred: np.ndarray
    regions: List[PredictionRegion]
    d: float
    k: int
    l: int  # noqa: E741
    tau: Optional[float]
    train: List[int]


def split_radius(scores: np.ndarray, alpha: float, randomized: bool = False,
                 seed_rand: Optional[int] = None):
    """
    Radius d as the k-th smallest calibration score.

    Classical k = ceil((l+1)(1-alpha)); smoothed k = ceil(l + tau - (l+1)alpha)
    with tau ~ U[0, 1] drawn once per call and k clamped to at least 1.
    Returns (d, k, tau); d is +inf when k exceeds l.
    """
    l = len(scores)  # noqa: E741
    if l == 0:
        raise EmptyCalibration("calibration set is empty")
    tau = None
    if randomized:
        tau = float(np.random.default_rng(seed_rand).uniform())
        k = max(1, ceil_index(l + tau - (l + 1) * alpha))
    else:
        k = ceil_index((l + 1) * (1 - alpha))
    return order_statistic(scores, k), k, tau


def _split_core(ds: TabularDataset, x0: np.ndarray, model: ModelSpec, alpha: float,
                rho: float, seed: Optional[int], explicit: Optional[Sequence[int]],
                score: ScoreKind, s_type: ModulationKind, randomized: bool,
                seed_rand: Optional[int], mad_model: Optional[ModelSpec],
                method: Method = Method.SPLIT) -> SplitCore:
    idx = make_split(ds.n, rho, seed, explicit)
    train, calib = ds.take(idx.train), ds.take(idx.calib)

    fit = model.fit(train.x, train.y)
    resid_train = train.y - model.apply(fit, train.x)
    s = _modulation_vector(s_type, resid_train, alpha)

    scale_calib = np.ones_like(calib.y)
    scale_test = np.ones((x0.shape[0], ds.q))
    if mad_model is not None:
        mad_fit = mad_model.fit(train.x, np.abs(resid_train))
        floor = modulation_floor()
        scale_calib = np.maximum(mad_model.apply(mad_fit, calib.x), floor)
        scale_test = np.maximum(mad_model.apply(mad_fit, x0), floor)

    cov = cov_inv = None
    if score == ScoreKind.MAHALANOBIS:
        cov, cov_inv = residual_covariance(resid_train)

    resid_calib = calib.y - model.apply(fit, calib.x)
    scores = score_multi_batch(score, resid_calib, s * scale_calib, cov_inv)
    d, k, tau = split_radius(scores, alpha, randomized, seed_rand)
    if math.isinf(d):
        logger.degenerate(method.value, f"k = {k} exceeds l = {idx.l}: region is unbounded")

    pred = model.apply(fit, x0)
    regions = []
    for t in range(x0.shape[0]):
        s0 = s * scale_test[t]
        ellipsoid = None
        if score == ScoreKind.L2:
            ellipsoid = EllipsoidShape(center=pred[t], metric=np.diag(1.0 / s0 ** 2), level=d ** 2)
            half = d * s0
        elif score == ScoreKind.MAHALANOBIS:
            ellipsoid = EllipsoidShape(center=pred[t], metric=cov_inv, level=d)
            half = np.sqrt(d * np.diag(cov))
        else:
            half = d * s0
        regions.append(PredictionRegion(lo=pred[t] - half, up=pred[t] + half, alpha=alpha,
                                        method=method, score=score, ellipsoid=ellipsoid))
    logger.method_step(method.value, "split", f"m={idx.m} l={idx.l} k={k} d={d:.6g}")
    return SplitCore(pred=pred, regions=regions, d=d, k=k, l=idx.l, tau=tau,
                     train=[int(i) for i in idx.train])


def split(ds: TabularDataset, x0, model: ModelSpec, alpha: float = 0.1, rho: float = 0.5,
          seed: Optional[int] = None, explicit: Optional[Sequence[int]] = None,
          score: ScoreKind = ScoreKind.L2, s_type: ModulationKind = ModulationKind.ST_DEV,
          randomized: bool = False, seed_rand: Optional[int] = None,
          mad_model: Optional[ModelSpec] = None) -> MultiResult:
    """
    Split conformal prediction regions.

    Trains once on I1, scores I2 and returns mu(x0) +/- d. The max score
    gives the box mu_j +/- d*s_j; l2 and mahalanobis give an ellipsoid,
    reported through its circumscribing box.

    Args:
        ds: training data
        x0: (n0, p) test features
        model: regression method
        alpha: miscoverage level
        rho: training fraction for the random split
        seed: split seed
        explicit: training indices overriding the random split
        score: nonconformity score
        s_type: modulation fitted on I1 residuals
        randomized: smoothed variant with a uniform tie-breaker
        seed_rand: seed of the tie-breaker
        mad_model: optional scale model trained on |I1 residuals|

    Returns:
        MultiResult with one region per test point
    """
    check_alpha(alpha)
    x0 = _test_matrix(ds, x0)
    core = _split_core(ds, x0, model, alpha, rho, seed, explicit, ScoreKind(score),
                       ModulationKind(s_type), randomized, seed_rand, mad_model)
    info = {"d": core.d, "k": core.k, "l": core.l, "train": core.train}
    if core.tau is not None:
        info["tau"] = core.tau
    return MultiResult(method=Method.SPLIT, alpha=alpha, pred=core.pred,
                       regions=core.regions, info=info)


# === Jackknife+ and jackknife ===

class LooFits(NamedTuple):
    residuals: np.ndarray      # (n, q) signed y_i - mu_{-i}(x_i)
    pred_test: np.ndarray      # (n, n0, q) mu_{-i}(x0)


def _loo(ds: TabularDataset, x0: np.ndarray, model: ModelSpec, method: str) -> LooFits:
    if ds.n < 2:
        raise TooFewRows(f"leave-one-out needs at least 2 observations, got {ds.n}")
    everyone = np.arange(ds.n)

    def fit_without(i: int):
        rest = ds.take(np.delete(everyone, i))
        fit = model.fit(rest.x, rest.y)
        return model.apply(fit, ds.x[i:i + 1])[0], model.apply(fit, x0)

    outs = ordered_map(fit_without, range(ds.n))
    logger.method_step(method, "loo", f"{ds.n} leave-one-out fits")
    residuals = ds.y - np.vstack([o[0] for o in outs])
    return LooFits(residuals=residuals, pred_test=np.stack([o[1] for o in outs]))


def _box_region(points: np.ndarray, keep: int, s: np.ndarray, center: np.ndarray,
                alpha: float, method: Method) -> PredictionRegion:
    idx = extended_quantile_indices(points, keep, s, center)
    lo, up = bounding_box(points[idx])
    return PredictionRegion(lo=lo, up=up, alpha=alpha, method=method)


def _interval(lo: float, up: float, alpha: float, method: Method) -> PredictionRegion:
    if lo > up:
        mid = 0.5 * (lo + up)
        return PredictionRegion(lo=[mid], up=[mid], alpha=alpha, method=method, empty=True)
    return PredictionRegion(lo=[lo], up=[up], alpha=alpha, method=method)


def jackplus(ds: TabularDataset, x0, model: ModelSpec, alpha: float = 0.1,
             s_type: ModulationKind = ModulationKind.ST_DEV) -> MultiResult:
    """
    Jackknife+ prediction regions.

    Univariate: [q_alpha(mu_{-i}(x0) - R_i), q_{1-alpha}(mu_{-i}(x0) + R_i)].
    Multivariate: the ceil((1-alpha)2n) most conformal of the 2n points
    mu_{-i}(x0) -/+ R_i, centered at their componentwise median and modulated
    by the signed LOO residuals, then their bounding box.
    """
    check_alpha(alpha)
    x0 = _test_matrix(ds, x0)
    loo = _loo(ds, x0, model, Method.JACKPLUS.value)
    abs_res = np.abs(loo.residuals)
    n = ds.n

    regions = []
    if ds.q == 1:
        for t in range(x0.shape[0]):
            lower, _ = jk_quantiles(loo.pred_test[:, t, 0] - abs_res[:, 0], alpha)
            _, upper = jk_quantiles(loo.pred_test[:, t, 0] + abs_res[:, 0], alpha)
            regions.append(_interval(lower, upper, alpha, Method.JACKPLUS))
    else:
        s = _modulation_vector(ModulationKind(s_type), loo.residuals, alpha)
        keep = min(max(ceil_index((1 - alpha) * 2 * n), 1), 2 * n)
        for t in range(x0.shape[0]):
            cand = np.vstack([loo.pred_test[:, t, :] - abs_res, loo.pred_test[:, t, :] + abs_res])
            regions.append(_box_region(cand, keep, s, np.median(cand, axis=0), alpha,
                                       Method.JACKPLUS))

    fit = model.fit(ds.x, ds.y)
    return MultiResult(method=Method.JACKPLUS, alpha=alpha, pred=model.apply(fit, x0),
                       regions=regions, info={"n_fits": n})


def jackknife(ds: TabularDataset, x0, model: ModelSpec, alpha: float = 0.1,
              s_type: ModulationKind = ModulationKind.ST_DEV) -> MultiResult:
    """Classical jackknife: LOO residuals around the full-data prediction."""
    check_alpha(alpha)
    x0 = _test_matrix(ds, x0)
    loo = _loo(ds, x0, model, Method.JACKKNIFE.value)
    abs_res = np.abs(loo.residuals)
    fit = model.fit(ds.x, ds.y)
    pred = model.apply(fit, x0)
    n = ds.n

    regions = []
    if ds.q == 1:
        _, radius = jk_quantiles(abs_res[:, 0], alpha)
        for t in range(x0.shape[0]):
            regions.append(_interval(pred[t, 0] - radius, pred[t, 0] + radius, alpha,
                                     Method.JACKKNIFE))
    else:
        s = _modulation_vector(ModulationKind(s_type), loo.residuals, alpha)
        keep = min(max(ceil_index((1 - alpha) * 2 * n), 1), 2 * n)
        for t in range(x0.shape[0]):
            cand = np.vstack([pred[t] - abs_res, pred[t] + abs_res])
            regions.append(_box_region(cand, keep, s, pred[t], alpha, Method.JACKKNIFE))

    return MultiResult(method=Method.JACKKNIFE, alpha=alpha, pred=pred, regions=regions,
                       info={"n_fits": n})


# === Multi-split ===

def replicate_seeds(seed: Optional[int], count: int) -> List[Optional[int]]:
    """Independent per-replicate seeds derived from one master seed."""
    if seed is None:
        return [None] * count
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def msplit(ds: TabularDataset, x0, model: ModelSpec, alpha: float = 0.1,
           cfg: Optional[MsplitConfig] = None, seed: Optional[int] = None,
           explicit: Optional[Sequence[int]] = None, score: ScoreKind = ScoreKind.L2,
           s_type: ModulationKind = ModulationKind.ST_DEV, randomized: bool = False,
           seed_rand: Optional[int] = None,
           mad_model: Optional[ModelSpec] = None) -> MultiResult:
    """
    Multi-split conformal prediction regions.

    Runs B split replicates at the inner level alpha(1 - tau + lambda/B).
    Univariate responses keep {y : more than tau*B replicate intervals
    contain y}; multivariate responses pool the 2B bound vectors and return
    the bounding box of the ceil(2*tau*B) most conformal.
    """
    check_alpha(alpha)
    cfg = cfg or MsplitConfig(B=config.get("msplit.multi.B", 100),
                              tau=config.get("msplit.multi.tau", 0.1),
                              lam=config.get("msplit.lambda", 0))
    inner = cfg.inner_alpha(alpha)
    x0 = _test_matrix(ds, x0)
    rhos = cfg.rhos()
    seeds = replicate_seeds(seed, cfg.B)
    rand_seeds = replicate_seeds(seed_rand, cfg.B)
    score, s_type = ScoreKind(score), ModulationKind(s_type)

    def replicate(b: int) -> SplitCore:
        return _split_core(ds, x0, model, inner, rhos[b], seeds[b], explicit, score, s_type,
                           randomized, rand_seeds[b], mad_model, method=Method.MSPLIT)

    cores = ordered_map(replicate, range(cfg.B))
    keep = cfg.keep_count
    if ds.q > 1 and keep < 2:
        logger.degenerate(Method.MSPLIT.value,
                          f"ceil(2*tau*B) = {keep}: the joined box is a single bound vector")

    regions = []
    for t in range(x0.shape[0]):
        lows = [c.regions[t].lo for c in cores]
        ups = [c.regions[t].up for c in cores]
        if ds.q == 1:
            segments = membership_segments([lo[0] for lo in lows], [up[0] for up in ups], cfg.tau)
            if not segments:
                center = float(np.median([c.pred[t, 0] for c in cores]))
                regions.append(PredictionRegion(lo=[center], up=[center], alpha=alpha,
                                                method=Method.MSPLIT, segments=[], empty=True))
            else:
                regions.append(PredictionRegion(lo=[segments[0][0]], up=[segments[-1][1]],
                                                alpha=alpha, method=Method.MSPLIT,
                                                segments=segments))
        else:
            pool = interleave_bounds([as_components(lo[None, :]) for lo in lows],
                                     [as_components(up[None, :]) for up in ups])
            center = np.median(np.stack([c.pred[t] for c in cores]), axis=0)
            lo, up = most_conformal_box(pool, keep, Method.MSPLIT.value,
                                        center=as_components(center[None, :]))
            regions.append(PredictionRegion(lo=np.concatenate(lo), up=np.concatenate(up),
                                            alpha=alpha, method=Method.MSPLIT))

    pred = np.median(np.stack([c.pred for c in cores]), axis=0)
    return MultiResult(method=Method.MSPLIT, alpha=alpha, pred=pred, regions=regions,
                       info={"B": cfg.B, "tau": cfg.tau, "lambda": cfg.lam,
                             "inner_alpha": inner, "keep": keep,
                             "replicate_seeds": seeds})
