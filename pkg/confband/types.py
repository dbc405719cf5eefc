"""
confband Data Types
Pydantic models for datasets, regions, configurations and reports
"""
import math
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from confband.core.errors import (
    BadAlpha, BadConfig, BadInnerAlpha, BadLambda, BadRho, BadTau,
    DimensionMismatch, GridMismatch, NonFinite, TooFewRows,
)


def _frozen_array(value: Any, dtype=float) -> np.ndarray:
    arr = np.array(value, dtype=dtype)
    arr.setflags(write=False)
    return arr


class _ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# === Enums ===

class Mode(str, Enum):
    MULTI = "multi"
    FD = "fd"


class Method(str, Enum):
    FULL = "full"
    SPLIT = "split"
    MSPLIT = "msplit"
    JACKPLUS = "jackplus"
    JACKKNIFE = "jackknife"


class ScoreKind(str, Enum):
    L2 = "l2"
    MAHALANOBIS = "mahalanobis"
    MAX = "max"
    SUP = "sup-modulated"


class ModulationKind(str, Enum):
    IDENTITY = "identity"
    ST_DEV = "st-dev"
    ALPHA_MAX = "alpha-max"


# === Datasets ===

class TabularDataset(_ArrayModel):
    """n x p features paired with n x q responses."""
    x: np.ndarray
    y: np.ndarray

    @field_validator("x", "y", mode="before")
    @classmethod
    def _as_matrix(cls, v):
        arr = np.array(v, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise DimensionMismatch(f"expected a matrix, got an array with {arr.ndim} dimensions")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise DimensionMismatch(
                f"x has {self.x.shape[0]} rows but y has {self.y.shape[0]}")
        if self.x.shape[0] < 2:
            raise TooFewRows(f"need at least 2 observations, got {self.x.shape[0]}")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise NonFinite("dataset contains NaN or infinite entries")
        return self

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]

    def take(self, idx: Sequence[int]) -> "TabularDataset":
        idx = np.asarray(idx, dtype=int)
        # subsets may hold a single row (LOO folds, small splits)
        return TabularDataset.model_construct(
            x=_frozen_array(self.x[idx]), y=_frozen_array(self.y[idx]))


class FunctionalCovariates(_ArrayModel):
    """
    p covariates for n observations.

    Each covariate is either scalar per observation, shape (n,), with grid
    None, or a curve per observation, shape (n, T), evaluated on its grid.
    """
    n: int
    values: List[np.ndarray] = Field(default_factory=list)
    grids: List[Optional[np.ndarray]] = Field(default_factory=list)

    @field_validator("values", mode="before")
    @classmethod
    def _arrays(cls, v):
        return [_frozen_array(a) for a in v]

    @field_validator("grids", mode="before")
    @classmethod
    def _grids(cls, v):
        return [None if g is None else _frozen_array(g) for g in v]

    @model_validator(mode="after")
    def _check(self):
        if len(self.values) != len(self.grids):
            raise DimensionMismatch(
                f"{len(self.values)} covariates but {len(self.grids)} grid entries")
        for k, (vals, grid) in enumerate(zip(self.values, self.grids)):
            if vals.shape[0] != self.n:
                raise DimensionMismatch(
                    f"covariate {k} has {vals.shape[0]} observations, expected {self.n}")
            if grid is None and vals.ndim != 1:
                raise GridMismatch(f"scalar covariate {k} must be one value per observation")
            if grid is not None and (vals.ndim != 2 or vals.shape[1] != grid.shape[0]):
                raise GridMismatch(
                    f"covariate {k} evaluations do not match its grid of length {grid.shape[0]}")
            if not np.isfinite(vals).all():
                raise NonFinite(f"covariate {k} contains NaN or infinite entries")
        return self

    @property
    def p(self) -> int:
        return len(self.values)

    def take(self, idx: Sequence[int]) -> "FunctionalCovariates":
        idx = np.asarray(idx, dtype=int)
        return FunctionalCovariates(
            n=len(idx), values=[v[idx] for v in self.values], grids=list(self.grids))


class FunctionalDataset(_ArrayModel):
    """
    n observations of a q-component functional response.

    values[j] has shape (n, len(grids[j])): row i holds y_{i,j} on grid j.
    """
    values: List[np.ndarray]
    grids: List[np.ndarray]

    @field_validator("values", "grids", mode="before")
    @classmethod
    def _arrays(cls, v):
        return [_frozen_array(a) for a in v]

    @model_validator(mode="after")
    def _check(self):
        if len(self.values) != len(self.grids) or not self.grids:
            raise GridMismatch(
                f"{len(self.values)} response components but {len(self.grids)} grids")
        n = self.values[0].shape[0]
        for j, (vals, grid) in enumerate(zip(self.values, self.grids)):
            if grid.ndim != 1 or grid.shape[0] < 2:
                raise GridMismatch(f"grid {j} must be a vector with at least 2 points")
            if not np.all(np.diff(grid) > 0):
                raise GridMismatch(f"grid {j} is not strictly increasing")
            if vals.ndim != 2 or vals.shape[1] != grid.shape[0]:
                raise GridMismatch(
                    f"component {j} evaluations do not match grid length {grid.shape[0]}")
            if vals.shape[0] != n:
                raise DimensionMismatch(
                    f"component {j} has {vals.shape[0]} observations, expected {n}")
            if not np.isfinite(vals).all():
                raise NonFinite(f"component {j} contains NaN or infinite entries")
        if n < 2:
            raise TooFewRows(f"need at least 2 observations, got {n}")
        return self

    @classmethod
    def from_nested(cls, y: Sequence[Sequence[Sequence[float]]],
                    grids: Sequence[Sequence[float]]) -> "FunctionalDataset":
        """Build from the n x q nested layout (observation, component, evaluations)."""
        q = len(grids)
        values = []
        for j in range(q):
            rows = []
            for i, obs in enumerate(y):
                if len(obs) != q:
                    raise DimensionMismatch(f"observation {i} has {len(obs)} components, expected {q}")
                if len(obs[j]) != len(grids[j]):
                    raise GridMismatch(
                        f"observation {i} component {j} has {len(obs[j])} evaluations, "
                        f"grid has {len(grids[j])}")
                rows.append(obs[j])
            values.append(np.array(rows, dtype=float).reshape(len(y), len(grids[j])))
        return cls(values=values, grids=list(grids))

    @property
    def n(self) -> int:
        return self.values[0].shape[0]

    @property
    def q(self) -> int:
        return len(self.values)

    def curves(self, i: int) -> List[np.ndarray]:
        return [v[i] for v in self.values]

    def take(self, idx: Sequence[int]) -> "FunctionalDataset":
        idx = np.asarray(idx, dtype=int)
        return FunctionalDataset.model_construct(
            values=[_frozen_array(v[idx]) for v in self.values], grids=list(self.grids))


class SplitIndices(_ArrayModel):
    """Training (I1) and calibration (I2) index sets, 0-based."""
    train: np.ndarray
    calib: np.ndarray

    @field_validator("train", "calib", mode="before")
    @classmethod
    def _ints(cls, v):
        return _frozen_array(np.sort(np.asarray(v, dtype=int)), dtype=int)

    @property
    def m(self) -> int:
        return len(self.train)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.calib)


# === Regions ===

class EllipsoidShape(_ArrayModel):
    """The set {y : (y - center)^T metric (y - center) <= level}."""
    center: np.ndarray
    metric: np.ndarray
    level: float

    @field_validator("center", "metric", mode="before")
    @classmethod
    def _arr(cls, v):
        return _frozen_array(v)

    def contains(self, y: np.ndarray) -> bool:
        if math.isinf(self.level):
            return True
        r = np.asarray(y, dtype=float) - self.center
        return bool(r @ self.metric @ r <= self.level)

    def volume(self) -> float:
        if math.isinf(self.level):
            return math.inf
        q = self.center.shape[0]
        unit_ball = math.pi ** (q / 2) / math.gamma(q / 2 + 1)
        det = float(np.linalg.det(self.metric))
        return unit_ball * self.level ** (q / 2) / math.sqrt(det)


class PredictionRegion(_ArrayModel):
    """Per-component bounds at one test point."""
    lo: np.ndarray
    up: np.ndarray
    alpha: float
    method: Method
    score: Optional[ScoreKind] = None
    ellipsoid: Optional[EllipsoidShape] = None
    segments: Optional[List[Tuple[float, float]]] = None
    empty: bool = False

    @field_validator("lo", "up", mode="before")
    @classmethod
    def _vec(cls, v):
        return _frozen_array(np.atleast_1d(np.asarray(v, dtype=float)))

    @model_validator(mode="after")
    def _check(self):
        if self.lo.shape != self.up.shape:
            raise DimensionMismatch("lower and upper bounds differ in length")
        if np.any(self.lo > self.up):
            raise DimensionMismatch("lower bound exceeds upper bound")
        return self

    @property
    def q(self) -> int:
        return self.lo.shape[0]

    def contains(self, y: Sequence[float]) -> bool:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.empty:
            return False
        if self.segments is not None:
            return any(a <= y[0] <= b for a, b in self.segments)
        if self.ellipsoid is not None:
            return self.ellipsoid.contains(y)
        return bool(np.all((self.lo <= y) & (y <= self.up)))


class FunctionalBand(_ArrayModel):
    """Pointwise bounds for a q-component functional response at one test point."""
    t: List[np.ndarray]
    lo: List[np.ndarray]
    up: List[np.ndarray]
    alpha: float
    method: Method
    pred: Optional[List[np.ndarray]] = None

    @field_validator("t", "lo", "up", mode="before")
    @classmethod
    def _curves(cls, v):
        return [_frozen_array(a) for a in v]

    @field_validator("pred", mode="before")
    @classmethod
    def _pred(cls, v):
        return None if v is None else [_frozen_array(a) for a in v]

    @model_validator(mode="after")
    def _check(self):
        if not (len(self.t) == len(self.lo) == len(self.up)):
            raise GridMismatch("band components do not match the grids")
        for j, (t, lo, up) in enumerate(zip(self.t, self.lo, self.up)):
            if lo.shape != t.shape or up.shape != t.shape:
                raise GridMismatch(f"band component {j} does not match grid length {t.shape[0]}")
            if np.any(lo > up):
                raise DimensionMismatch(f"band component {j} has lower above upper")
        return self

    @property
    def q(self) -> int:
        return len(self.t)

    def contains(self, curves: Sequence[Sequence[float]]) -> bool:
        return all(
            bool(np.all((lo <= np.asarray(c)) & (np.asarray(c) <= up)))
            for lo, up, c in zip(self.lo, self.up, curves)
        )


class PValueSurface(_ArrayModel):
    """Full conformal candidates with their rank-based p-values."""
    candidates: np.ndarray
    pvals: np.ndarray
    x0: np.ndarray
    axes: List[np.ndarray]
    n: int

    @field_validator("candidates", "pvals", "x0", mode="before")
    @classmethod
    def _arr(cls, v):
        return _frozen_array(v)

    @field_validator("axes", mode="before")
    @classmethod
    def _axes(cls, v):
        return [_frozen_array(a) for a in v]

    @model_validator(mode="after")
    def _check(self):
        ranks = self.pvals * (self.n + 1)
        if np.any(np.abs(ranks - np.round(ranks)) > 1e-9) or np.any(np.round(ranks) < 1) \
                or np.any(np.round(ranks) > self.n + 1):
            raise DimensionMismatch(f"p-values must be multiples of 1/{self.n + 1} in (0, 1]")
        return self

    def in_region(self, alpha: float) -> np.ndarray:
        return self.pvals > alpha

    def cell_volume(self) -> float:
        steps = [float(a[1] - a[0]) if len(a) > 1 else 0.0 for a in self.axes]
        return float(np.prod(steps))


class Modulation(_ArrayModel):
    """Positive per-component scaling; single-point curves for multivariate responses."""
    kind: ModulationKind
    s: List[np.ndarray]

    @field_validator("s", mode="before")
    @classmethod
    def _curves(cls, v):
        return [_frozen_array(np.atleast_1d(a)) for a in v]

    def vector(self) -> np.ndarray:
        """Multivariate view: one scalar per component."""
        return np.array([float(c[0]) for c in self.s])


# === Configurations ===

class FullConfig(BaseModel):
    alpha: float = 0.1
    score: ScoreKind = ScoreKind.L2
    s_type: ModulationKind = ModulationKind.ST_DEV
    num_grid_pts_dim: int = 100
    grid_factor: float = 1.25
    max_candidates: int = 1_000_000

    @model_validator(mode="after")
    def _check(self):
        if not (0.0 < self.alpha < 1.0):
            raise BadAlpha(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.num_grid_pts_dim < 2:
            raise BadConfig(f"num_grid_pts_dim must be >= 2, got {self.num_grid_pts_dim}")
        if self.grid_factor < 1:
            raise BadConfig(f"grid_factor must be >= 1, got {self.grid_factor}")
        if self.s_type == ModulationKind.ALPHA_MAX:
            raise BadConfig("alpha-max modulation is not available for full conformal")
        if self.score == ScoreKind.SUP:
            raise BadConfig("the sup-modulated score is reserved for functional responses")
        return self


class MsplitConfig(BaseModel):
    B: int = 100
    tau: float = 0.1
    lam: float = Field(default=0.0, alias="lambda")
    rho: Optional[List[float]] = None

    model_config = ConfigDict(populate_by_name=True)

    @model_validator(mode="after")
    def _check(self):
        if self.B < 1:
            raise BadInnerAlpha(f"B must be a positive replicate count, got {self.B}")
        if not (0.0 < self.tau < 1.0):
            raise BadTau(f"tau must lie in (0, 1), got {self.tau}")
        if self.lam < 0:
            raise BadLambda(f"lambda must be nonnegative, got {self.lam}")
        if not (1 <= self.keep_count <= 2 * self.B):
            raise BadTau(f"ceil(2*tau*B) = {self.keep_count} is outside [1, {2 * self.B}]")
        if self.rho is not None:
            if len(self.rho) != self.B:
                raise BadRho(f"rho has {len(self.rho)} entries, expected B = {self.B}")
            for r in self.rho:
                if not (0.0 < r < 1.0):
                    raise BadRho(f"rho entries must lie in (0, 1), got {r}")
        return self

    @property
    def keep_count(self) -> int:
        return math.ceil(2 * self.tau * self.B - 1e-9)

    def rhos(self) -> List[float]:
        return list(self.rho) if self.rho is not None else [0.5] * self.B

    def inner_alpha(self, alpha: float) -> float:
        inner = alpha * (1 - self.tau + self.lam / self.B)
        if not (0.0 < inner < 1.0):
            raise BadInnerAlpha(
                f"inner miscoverage alpha*(1 - tau + lambda/B) = {inner:.4g} is outside (0, 1)")
        return inner


class RunConfig(BaseModel):
    """Effective settings of one CLI invocation; echoed into result documents."""
    mode: Mode
    method: Method
    input: str
    output: Optional[str] = None
    plot: Optional[str] = None
    model: str = "mean"
    ridge_lambda: float = 1.0
    alpha: float = 0.1
    score: ScoreKind = ScoreKind.L2
    s_type: ModulationKind = ModulationKind.ST_DEV
    response_cols: Optional[List[str]] = None
    seed: Optional[int] = None
    split: Optional[List[int]] = None
    rho: Optional[List[float]] = None
    randomized: bool = False
    seed_rand: Optional[int] = None
    B: Optional[int] = None
    tau: Optional[float] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    num_grid_pts_dim: Optional[int] = None
    grid_factor: Optional[float] = None
    threads: Optional[int] = None
    verbose: bool = False

    model_config = ConfigDict(populate_by_name=True)

    @model_validator(mode="after")
    def _check(self):
        if not (0.0 < self.alpha < 1.0):
            raise BadAlpha(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.method != Method.MSPLIT and any(
                v is not None for v in (self.B, self.tau, self.lam)):
            raise BadConfig("--B/--tau/--lambda apply to msplit only")
        if self.method != Method.FULL and any(
                v is not None for v in (self.num_grid_pts_dim, self.grid_factor)):
            raise BadConfig("--grid-pts/--grid-factor apply to full only")
        if self.mode == Mode.FD:
            if self.method in (Method.FULL, Method.JACKKNIFE):
                raise BadConfig(f"method {self.method.value} is not available for functional responses")
            if self.model not in ("mean", "concurrent"):
                raise BadConfig(f"model {self.model} is not a functional model")
        elif self.model not in ("mean", "ols", "ridge"):
            raise BadConfig(f"model {self.model} is not a multivariate model")
        if self.rho is not None and self.method in (Method.SPLIT,) and len(self.rho) != 1:
            raise BadRho("split takes a single rho")
        return self


# === Results ===

class MultiResult(_ArrayModel):
    method: Method
    alpha: float
    pred: np.ndarray
    regions: List[PredictionRegion]
    info: Dict[str, Any] = Field(default_factory=dict)


class FunctionalResult(_ArrayModel):
    method: Method
    alpha: float
    bands: List[FunctionalBand]
    info: Dict[str, Any] = Field(default_factory=dict)


class FullResult(_ArrayModel):
    alpha: float
    pred: np.ndarray
    surfaces: List[PValueSurface]
    info: Dict[str, Any] = Field(default_factory=dict)

    method: Method = Method.FULL


# === Evaluation ===

class EvalRow(BaseModel):
    method: str
    coverage: float = Field(ge=0.0, le=1.0)
    avg_size: float = Field(ge=0.0)
    avg_time: float = Field(gt=0.0)
    folds: int


class EvalReport(BaseModel):
    """Leave-one-out coverage, size and runtime per method."""
    mode: Mode
    alpha: float
    rows: List[EvalRow] = Field(default_factory=list)

    def row(self, method: str) -> EvalRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)
