"""
confband Core Data Operations
Dataset validation, train/calibration splitting and region sizes
"""
import math
from typing import Optional, Sequence, Union

import numpy as np

from confband.core.errors import BadExplicit, BadRho, TooFewRows
from confband.types import (
    FunctionalBand, FunctionalDataset, PredictionRegion, SplitIndices, TabularDataset,
)


def validate_tabular(x, y) -> TabularDataset:
    """
    Validate a feature/response pair.

    Args:
        x: n x p features (a vector is read as a single feature)
        y: n x q responses (a vector is read as a single component)

    Returns:
        TabularDataset with its dimensions recorded
    """
    return TabularDataset(x=x, y=y)


def validate_functional(y, grids) -> FunctionalDataset:
    """Validate nested n x q curves against per-component grids."""
    return FunctionalDataset.from_nested(y, grids)


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def make_split(
    n: int,
    rho: float = 0.5,
    seed: Optional[int] = None,
    explicit: Optional[Sequence[int]] = None,
) -> SplitIndices:
    """
    Partition {0..n-1} into training and calibration indices.

    An explicit training set wins over the random split. Otherwise
    |I1| = round(rho * n), clamped so both parts are nonempty, and the
    partition is a pure function of (n, rho, seed).
    """
    if n < 2:
        raise TooFewRows(f"cannot split {n} observations")
    if not (0.0 < rho < 1.0):
        raise BadRho(f"rho must lie in (0, 1), got {rho}")

    if explicit is not None:
        train = np.unique(np.asarray(list(explicit), dtype=int))
        if len(train) != len(list(explicit)):
            raise BadExplicit("explicit training indices contain duplicates")
        if len(train) == 0 or len(train) >= n:
            raise BadExplicit(
                f"explicit training set must be a nonempty proper subset of {n} indices")
        if train[0] < 0 or train[-1] >= n:
            raise BadExplicit(f"explicit training indices must lie in [0, {n - 1}]")
        calib = np.setdiff1d(np.arange(n), train)
        return SplitIndices(train=train, calib=calib)

    m = min(max(_round_half_up(rho * n), 1), n - 1)
    # PCG64 streams are identical across platforms for a given seed
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(train=perm[:m], calib=perm[m:])


def region_size(region: Union[PredictionRegion, FunctionalBand]) -> float:
    """
    Size of a prediction region.

    Multivariate boxes report the product of side lengths; l2/mahalanobis
    split regions report their ellipsoid volume and univariate multi-split
    unions the total segment length. Functional bands report the mean band
    width averaged over components.
    """
    if isinstance(region, FunctionalBand):
        widths = [float(np.mean(up - lo)) for lo, up in zip(region.lo, region.up)]
        return float(np.mean(widths))

    if region.empty:
        return 0.0
    if region.segments is not None:
        return float(sum(b - a for a, b in region.segments))
    if region.ellipsoid is not None:
        return region.ellipsoid.volume()
    widths = region.up - region.lo
    if np.any(widths == 0):
        return 0.0
    return float(np.prod(widths))
