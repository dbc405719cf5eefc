"""
confband Scores
Nonconformity scores, modulation functions, the max-conformity measure,
extended quantiles, jackknife+ quantiles and bounding boxes
"""
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from confband.config import config
from confband.core.errors import (
    BadAlpha, BadLevel, EmptySet, GridMismatch, MissingCovariance,
    NonPositiveModulation, TooFewResiduals, check_alpha,
)
from confband.types import Modulation, ModulationKind, ScoreKind

Curves = List[np.ndarray]
Points = Union[np.ndarray, Curves]

# Guards index arithmetic against float noise, e.g. (9 + 1) * 0.9 = 9.000000000000002
_INDEX_EPS = 1e-9


def ceil_index(value: float) -> int:
    return int(math.ceil(value - _INDEX_EPS))


def floor_index(value: float) -> int:
    return int(math.floor(value + _INDEX_EPS))


def modulation_floor() -> float:
    return float(config.get("numeric.modulation_floor", 1e-12))


def order_statistic(values: Sequence[float], k: int) -> float:
    """k-th smallest value (1-based); -inf below the range, +inf above it."""
    ordered = np.sort(np.asarray(values, dtype=float))
    if k < 1:
        return -math.inf
    if k > len(ordered):
        return math.inf
    return float(ordered[k - 1])


def as_components(points: Points) -> Curves:
    """
    Normalize a point set to q component arrays of shape (N, T_j).

    A (N, q) matrix of vectors becomes q single-point curves; a list of
    curve arrays passes through.
    """
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        return [arr[:, j:j + 1] for j in range(arr.shape[1])]
    return [np.atleast_2d(np.asarray(c, dtype=float)) for c in points]


def _center_components(center, q: int) -> Curves:
    if np.isscalar(center) or (isinstance(center, np.ndarray) and center.ndim == 0):
        # a scalar center applies to every component
        return [np.full(1, float(center)) for _ in range(q)]
    if isinstance(center, np.ndarray):
        vec = np.asarray(center, dtype=float)
        if vec.ndim == 1 and q > 1 and vec.shape[0] == q:
            return [vec[j:j + 1] for j in range(q)]
        if q == 1:
            return [vec.ravel()]
    return [np.asarray(c, dtype=float).ravel() for c in center]


def _check_positive(s: np.ndarray):
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise NonPositiveModulation("modulation must be finite and strictly positive")


# === Nonconformity scores ===

def score_multi_batch(kind: ScoreKind, residuals: np.ndarray, s: np.ndarray,
                      cov_inv: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Scores for N residual vectors at once.

    Args:
        kind: score kind
        residuals: (N, q) residuals
        s: modulation, (q,) or one row per residual (N, q)
        cov_inv: inverse residual covariance, required for mahalanobis

    Returns:
        (N,) nonnegative scores
    """
    r = np.atleast_2d(np.asarray(residuals, dtype=float))
    kind = ScoreKind(kind)
    if kind == ScoreKind.MAHALANOBIS:
        if cov_inv is None:
            raise MissingCovariance("mahalanobis score needs an inverse covariance")
        cov_inv = np.atleast_2d(np.asarray(cov_inv, dtype=float))
        # unmodulated quadratic form
        return np.maximum(np.einsum("ij,jk,ik->i", r, cov_inv, r), 0.0)

    s = np.broadcast_to(np.asarray(s, dtype=float), r.shape)
    _check_positive(s)
    scaled = np.abs(r) / s
    if kind == ScoreKind.L2:
        return np.sqrt(np.sum(scaled ** 2, axis=1))
    # max and sup-modulated coincide on single-point components
    return np.max(scaled, axis=1)


def score_multi(kind: ScoreKind, residual: Sequence[float], s: Sequence[float],
                cov_inv: Optional[np.ndarray] = None) -> float:
    """Score of a single residual vector."""
    r = np.atleast_1d(np.asarray(residual, dtype=float))
    return float(score_multi_batch(kind, r[None, :], s, cov_inv)[0])


def score_fun_batch(residuals: Curves, s: Curves) -> np.ndarray:
    """
    Sup-modulated scores for N multivariate curves.

    residuals[j] has shape (N, T_j) and s[j] shape (T_j,) or (N, T_j).
    The score is max_j max_t |r_j(t)| / s_j(t).
    """
    if len(residuals) != len(s):
        raise GridMismatch(f"{len(residuals)} residual components but {len(s)} modulation curves")
    per_component = []
    for j, (r, sj) in enumerate(zip(residuals, s)):
        r = np.atleast_2d(np.asarray(r, dtype=float))
        sj = np.asarray(sj, dtype=float)
        if sj.shape[-1] != r.shape[1]:
            raise GridMismatch(
                f"component {j}: residual grid length {r.shape[1]} vs modulation {sj.shape[-1]}")
        _check_positive(sj)
        per_component.append(np.max(np.abs(r) / sj, axis=1))
    return np.max(np.vstack(per_component), axis=0)


def score_fun(residual: Union[np.ndarray, Curves], s: Union[np.ndarray, Curves]) -> float:
    """Sup-modulated score of one (possibly multi-component) residual curve."""
    if isinstance(residual, np.ndarray) and residual.ndim == 1:
        residual, s = [residual], [np.asarray(s, dtype=float)]
    return float(score_fun_batch([np.asarray(r)[None, :] for r in residual], list(s))[0])


def residual_covariance(residuals: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample covariance of (m, q) residuals and its inverse.

    A covariance that is not positive definite is regularized as
    S + eps*I with eps = ridge * trace(S) / q.
    """
    r = np.atleast_2d(np.asarray(residuals, dtype=float))
    if r.shape[0] < 2:
        raise TooFewResiduals(f"covariance needs at least 2 residuals, got {r.shape[0]}")
    q = r.shape[1]
    cov = np.cov(r, rowvar=False, ddof=1).reshape(q, q)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        ridge = float(config.get("numeric.covariance_ridge", 1e-8))
        trace = float(np.trace(cov))
        eps = ridge * trace / q if trace > 0 else ridge
        cov = cov + eps * np.eye(q)
    return cov, np.linalg.inv(cov)


# === Modulation ===

def _integral(values: np.ndarray, grid: Optional[np.ndarray]) -> float:
    if values.shape[0] == 1:
        return float(values[0])
    if grid is None:
        return float(np.trapezoid(values))
    return float(np.trapezoid(values, np.asarray(grid, dtype=float)))


def fit_modulation(kind: ModulationKind, residuals: Points, alpha: Optional[float] = None,
                   grids: Optional[Sequence[Optional[np.ndarray]]] = None) -> Modulation:
    """
    Fit a modulation from training residuals.

    Args:
        kind: identity, st-dev or alpha-max
        residuals: (m, q) residual vectors or q arrays of residual curves (m, T_j)
        alpha: level used by alpha-max to discard the most extreme residuals
        grids: evaluation grids for the trapezoidal normalizer (functional only)

    Returns:
        Modulation with one positive curve per component (single points for vectors)
    """
    comps = as_components(residuals)
    kind = ModulationKind(kind)
    m = comps[0].shape[0]
    floor = modulation_floor()

    if kind == ModulationKind.IDENTITY:
        return Modulation(kind=kind, s=[np.ones(c.shape[1]) for c in comps])

    if kind == ModulationKind.ST_DEV:
        if m < 2:
            raise TooFewResiduals(f"st-dev modulation needs at least 2 residuals, got {m}")
        return Modulation(kind=kind,
                          s=[np.maximum(np.std(c, axis=0, ddof=1), floor) for c in comps])

    if alpha is None:
        raise BadAlpha("alpha-max modulation needs alpha")
    check_alpha(alpha)
    if m < 1:
        raise TooFewResiduals("alpha-max modulation needs at least one residual")

    sups = np.max(np.column_stack([np.max(np.abs(c), axis=1) for c in comps]), axis=1)
    k = ceil_index((m + 1) * (1 - alpha))
    # past the last order statistic every observation is kept
    gamma = np.sort(sups)[min(k, m) - 1]
    kept = sups <= gamma
    envelope = [np.max(np.abs(c[kept]), axis=0) for c in comps]

    grids = grids if grids is not None else [None] * len(comps)
    normalizer = sum(_integral(e, g) for e, g in zip(envelope, grids))
    if normalizer <= 0:
        return Modulation(kind=kind, s=[np.full(e.shape, floor) for e in envelope])
    return Modulation(kind=kind, s=[np.maximum(e / normalizer, floor) for e in envelope])


def modulation_curves(s: Union[Modulation, Curves, np.ndarray], q: int) -> Curves:
    if isinstance(s, Modulation):
        return list(s.s)
    if isinstance(s, np.ndarray) and s.ndim == 1 and q > 1:
        return [s[j:j + 1] for j in range(q)]
    if isinstance(s, np.ndarray) and q == 1:
        return [s.ravel()]
    return [np.asarray(c, dtype=float) for c in s]


# === Conformity and extended quantiles ===

def conformity_max(residual: Union[np.ndarray, Curves], s: Union[Modulation, Curves]) -> float:
    """Inverse sup-modulated score; +inf for a perfectly conformal residual."""
    if isinstance(residual, np.ndarray):
        comps = [np.atleast_1d(residual)[j:j + 1] for j in range(np.atleast_1d(residual).shape[0])]
    else:
        comps = [np.asarray(c, dtype=float) for c in residual]
    curves = modulation_curves(s, len(comps))
    score = float(score_fun_batch([c[None, :] for c in comps], curves)[0])
    return math.inf if score == 0 else 1.0 / score


def extended_quantile_indices(points: Points, k: int, s: Union[Modulation, Curves],
                              center) -> np.ndarray:
    """
    Indices of the k most conformal points, in input order.

    Points are ranked by max-conformity of (point - center) under s; ties keep
    the earlier point. Non-finite points have conformity 0 and rank last.
    """
    comps = as_components(points)
    n_points = comps[0].shape[0]
    if not (1 <= k <= n_points):
        raise BadLevel(f"level count must lie in [1, {n_points}], got {k}")
    centers = _center_components(center, len(comps))
    residuals = [c - ctr for c, ctr in zip(comps, centers)]
    scores = score_fun_batch(residuals, modulation_curves(s, len(comps)))
    # ascending score is descending conformity; stable sort keeps first occurrences
    order = np.argsort(scores, kind="stable")[:k]
    return np.sort(order)


def extended_quantile(points: Points, k: int, s: Union[Modulation, Curves], center) -> Points:
    """The k most conformal points, same layout as the input."""
    idx = extended_quantile_indices(points, k, s, center)
    if isinstance(points, np.ndarray):
        return np.asarray(points)[idx]
    return [np.asarray(c)[idx] for c in points]


def jk_quantiles(values: Sequence[float], alpha: float) -> Tuple[float, float]:
    """
    Jackknife+ order statistics of n values.

    lower is the floor(alpha(n+1))-th smallest (-inf when 0), upper the
    ceil((1-alpha)(n+1))-th smallest (+inf past n).
    """
    check_alpha(alpha)
    values = np.asarray(values, dtype=float).ravel()
    n = values.shape[0]
    if n == 0:
        raise EmptySet("jackknife+ quantiles of an empty set")
    lower = order_statistic(values, floor_index(alpha * (n + 1)))
    upper = order_statistic(values, ceil_index((1 - alpha) * (n + 1)))
    return lower, upper


def bounding_box(points: Points):
    """
    Axis-aligned minimum bounding box.

    Returns (lo, up) vectors for an (N, q) matrix, or lists of pointwise
    lower/upper curves for a list of (N, T_j) arrays.
    """
    if isinstance(points, np.ndarray):
        arr = np.atleast_2d(np.asarray(points, dtype=float))
        if arr.shape[0] == 0:
            raise EmptySet("bounding box of an empty set")
        return arr.min(axis=0), arr.max(axis=0)
    comps = [np.atleast_2d(np.asarray(c, dtype=float)) for c in points]
    if not comps or comps[0].shape[0] == 0:
        raise EmptySet("bounding box of an empty set")
    return [c.min(axis=0) for c in comps], [c.max(axis=0) for c in comps]
