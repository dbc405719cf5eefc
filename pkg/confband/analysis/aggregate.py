"""
confband Aggregation
Combining replicate regions: membership sweep and conformity-ranked pooling
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from confband.analysis.scores import (
    Curves, bounding_box, fit_modulation, floor_index, modulation_curves, score_fun_batch,
)
from confband.core.errors import BadLevel
from confband.core.logger import logger
from confband.types import Modulation, ModulationKind


def membership_segments(lo: Sequence[float], up: Sequence[float],
                        tau: float) -> List[Tuple[float, float]]:
    """
    The set {y : fraction of intervals containing y > tau} as disjoint segments.

    Intervals are closed, so a point on an endpoint is covered. The sweep
    sorts endpoint events with openings before closings at equal positions.
    """
    lo = np.asarray(lo, dtype=float)
    up = np.asarray(up, dtype=float)
    need = floor_index(tau * len(lo)) + 1

    events = sorted([(a, 0) for a in lo] + [(b, 1) for b in up])
    segments: List[Tuple[float, float]] = []
    count = 0
    start: Optional[float] = None
    for pos, kind in events:
        if kind == 0:
            count += 1
            if count == need:
                start = pos
        else:
            if count == need and start is not None:
                segments.append((float(start), float(pos)))
                start = None
            count -= 1
    return segments


def interleave_bounds(lows: Sequence[Curves], ups: Sequence[Curves]) -> Curves:
    """Pool B lower/upper bound sets as 2B rows per component: lo_1, up_1, lo_2, ..."""
    q = len(lows[0])
    pooled = []
    for j in range(q):
        rows = []
        for lo, up in zip(lows, ups):
            rows.append(np.ravel(lo[j]))
            rows.append(np.ravel(up[j]))
        pooled.append(np.vstack(rows))
    return pooled


def pooled_center(pool: Curves) -> Curves:
    """Pointwise median of the finite pooled values (0 where none are finite)."""
    centers = []
    for comp in pool:
        finite = np.where(np.isfinite(comp), comp, np.nan)
        with np.errstate(all="ignore"):
            has_any = np.isfinite(comp).any(axis=0)
            med = np.zeros(comp.shape[1])
            if has_any.any():
                med[has_any] = np.nanmedian(finite[:, has_any], axis=0)
        centers.append(med)
    return centers


def pooled_modulation(pool: Curves) -> Modulation:
    """St-dev modulation over the fully finite pooled rows; identity when fewer than 2."""
    finite_rows = np.all(np.column_stack([np.isfinite(c).all(axis=1) for c in pool]), axis=1)
    if finite_rows.sum() < 2:
        return fit_modulation(ModulationKind.IDENTITY, [c[:1] for c in pool])
    return fit_modulation(ModulationKind.ST_DEV, [c[finite_rows] for c in pool])


def paired_scores(pool: Curves, s: Modulation, center: Curves) -> np.ndarray:
    """
    Sup-modulated scores of interleaved lo/up rows around center.

    A replicate's lower and upper bound that score equal up to rounding get
    the larger of the two scores, so neither side of a symmetric pair wins
    the tie.
    """
    residuals = [c - np.asarray(ctr, dtype=float).ravel()[None, :] for c, ctr in zip(pool, center)]
    with np.errstate(invalid="ignore"):
        scores = score_fun_batch(residuals, modulation_curves(s, len(pool)))
    scores = np.where(np.isnan(scores), np.inf, scores)
    lo_s, up_s = scores[0::2], scores[1::2]
    tied = np.isclose(lo_s, up_s, rtol=1e-9, atol=1e-12) | (lo_s == up_s)
    top = np.maximum(lo_s, up_s)
    scores[0::2] = np.where(tied, top, lo_s)
    scores[1::2] = np.where(tied, top, up_s)
    return scores


def most_conformal_box(pool: Curves, keep: int, method: str,
                       center: Optional[Curves] = None,
                       s: Optional[Modulation] = None) -> Tuple[Curves, Curves]:
    """
    Bounding box of the `keep` most conformal pooled rows.

    Rows are ranked by paired_scores around center (the pooled median when
    not given) under s (the pooled st-dev when not given); ties keep the
    earlier row and rows with non-finite entries rank last.
    """
    n_rows = pool[0].shape[0]
    if not (1 <= keep <= n_rows):
        raise BadLevel(f"level count must lie in [1, {n_rows}], got {keep}")
    center = pooled_center(pool) if center is None else center
    s = pooled_modulation(pool) if s is None else s
    scores = paired_scores(pool, s, center)
    idx = np.sort(np.argsort(scores, kind="stable")[:keep])
    logger.method_step(method, "aggregate", f"kept {len(idx)} of {n_rows} bounds")
    return bounding_box([c[idx] for c in pool])
