"""
confband Data Ingestion
Delimited tabular files and structured-text functional documents
"""
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from confband.config import config
from confband.core.data import validate_functional, validate_tabular
from confband.core.errors import (
    DimensionMismatch, GridMismatch, MissingColumn, ParseError, SchemaError,
)
from confband.core.logger import logger
from confband.types import FunctionalCovariates, FunctionalDataset, TabularDataset

_TRUE_FLAGS = {"1", "true", "yes", "y", "t"}


class TabularInput(BaseModel):
    """Training dataset plus the rows flagged as test points."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dataset: TabularDataset
    x0: np.ndarray
    y0: Optional[np.ndarray] = None
    feature_names: List[str]
    response_names: List[str]


class FunctionalInput(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dataset: FunctionalDataset
    x: Optional[FunctionalCovariates] = None
    x0: Optional[FunctionalCovariates] = None
    y0: Optional[List[List[np.ndarray]]] = None


def _numeric_block(df: pd.DataFrame, rows: np.ndarray, cols: List[str],
                   allow_blank: bool = False) -> Optional[np.ndarray]:
    """
    Numeric (len(rows), len(cols)) matrix of the given cells.

    Returns None when allow_blank is set and any cell is blank; otherwise the
    first unparseable cell raises ParseError with its 1-based data row.
    """
    shape = (len(rows), len(cols))
    cells = np.char.strip(df.iloc[rows][cols].to_numpy(dtype=str).reshape(shape))
    if allow_blank and (cells == "").any():
        return None
    values = np.empty(shape)
    for c in range(shape[1]):
        values[:, c] = pd.to_numeric(pd.Series(cells[:, c], dtype=object),
                                     errors="coerce").to_numpy(dtype=float)
    # literal nan cells parse; NonFinite is raised by dataset validation
    literal_nan = np.char.lstrip(np.char.lower(cells), "+-") == "nan"
    bad = np.isnan(values) & ~literal_nan
    if bad.any():
        r, c = np.argwhere(bad)[0]
        row, column = int(rows[r]) + 1, cols[c]
        raise ParseError(f"non-numeric cell '{cells[r, c]}' at data row {row}, column '{column}'",
                         row=row, column=column)
    return values


def ingest_tabular(path: Union[str, Path], response_cols: Optional[Sequence[str]] = None,
                   test_flag_column: Optional[str] = None) -> TabularInput:
    """
    Read a delimited numeric file with a header row.

    Args:
        path: CSV file
        response_cols: columns forming y (the last column when omitted)
        test_flag_column: truthy cells mark test rows (io.test_flag_column by default)

    Returns:
        TabularInput; test-row responses become y0 when all of them are filled
    """
    flag = test_flag_column or config.get("io.test_flag_column", "is_test")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise ParseError(f"cannot read {path}: {e}") from None

    columns = [str(c).strip() for c in df.columns]
    df.columns = columns
    response_cols = list(response_cols) if response_cols else [c for c in columns if c != flag][-1:]
    for name in response_cols:
        if name not in columns:
            raise MissingColumn(f"column '{name}' not in header {columns}", column=name)
    feature_cols = [c for c in columns if c not in response_cols and c != flag]

    is_test = np.zeros(len(df), dtype=bool)
    if flag in columns:
        is_test = df[flag].str.strip().str.lower().isin(_TRUE_FLAGS).to_numpy()

    train_rows = np.flatnonzero(~is_test)
    test_rows = np.flatnonzero(is_test)
    dataset = validate_tabular(_numeric_block(df, train_rows, feature_cols),
                               _numeric_block(df, train_rows, response_cols))
    x0 = _numeric_block(df, test_rows, feature_cols)
    y0 = _numeric_block(df, test_rows, response_cols, allow_blank=True) if len(test_rows) else None
    logger.debug(f"Read {len(train_rows)} training and {len(test_rows)} test rows from {path}")
    return TabularInput(dataset=dataset, x0=x0, y0=y0,
                        feature_names=feature_cols, response_names=response_cols)


# === Functional documents ===

class CovariateDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grids: List[Optional[List[float]]]
    train: List[List[Union[float, List[float]]]]


class PointDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: Optional[List[Union[float, List[float]]]] = None
    y: Optional[List[List[float]]] = None


class FunctionalDocument(BaseModel):
    """Interchange layout: train is n x q x T_j, covariates n x p."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: str = Field(alias="schema")
    grids: List[List[float]]
    train: List[List[List[float]]]
    covariates: Optional[CovariateDoc] = None
    test: List[PointDoc] = Field(default_factory=list)


def _covariate_block(rows: List[List[Union[float, List[float]]]],
                     grids: List[Optional[List[float]]], where: str) -> FunctionalCovariates:
    values = []
    for k, grid in enumerate(grids):
        try:
            column = [row[k] for row in rows]
        except IndexError:
            raise DimensionMismatch(f"{where}: every row needs {len(grids)} covariates") from None
        values.append(np.array(column, dtype=float))
    return FunctionalCovariates(n=len(rows), values=values, grids=list(grids))


def _check_true_curves(y0: List[List[np.ndarray]], grids: List[List[float]]):
    for i, curves in enumerate(y0):
        if len(curves) != len(grids):
            raise DimensionMismatch(f"test entry {i} has {len(curves)} components, expected {len(grids)}")
        for j, (c, g) in enumerate(zip(curves, grids)):
            if c.shape[0] != len(g):
                raise GridMismatch(
                    f"test entry {i} component {j} has {c.shape[0]} evaluations, grid has {len(g)}")


def ingest_functional(path: Union[str, Path]) -> FunctionalInput:
    """
    Read a YAML or JSON functional document.

    Schema violations raise SchemaError naming the offending node;
    evaluation/grid disagreements raise GridMismatch.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ParseError(f"cannot parse {path}: {e}") from None
    if not isinstance(raw, dict):
        raise SchemaError("document root must be a mapping", node="$")

    try:
        doc = FunctionalDocument.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        node = ".".join(str(p) for p in first["loc"]) or "$"
        raise SchemaError(f"{first['msg']} at '{node}'", node=node) from None

    expected = config.get("io.schema_version", "confband/v1")
    if doc.schema_version != expected:
        raise SchemaError(f"unsupported schema '{doc.schema_version}', expected '{expected}'",
                          node="schema")

    dataset = validate_functional(doc.train, doc.grids)
    x = None
    cov_grids: List[Optional[List[float]]] = []
    if doc.covariates is not None:
        cov_grids = doc.covariates.grids
        if len(doc.covariates.train) != dataset.n:
            raise DimensionMismatch(
                f"{len(doc.covariates.train)} covariate rows for {dataset.n} curves")
        x = _covariate_block(doc.covariates.train, cov_grids, "covariates.train")

    x0 = y0 = None
    if doc.test:
        if x is not None:
            if any(t.x is None for t in doc.test):
                raise SchemaError("every test entry needs covariates 'x'", node="test")
            x0 = _covariate_block([t.x for t in doc.test], cov_grids, "test.x")
        else:
            x0 = FunctionalCovariates(n=len(doc.test))
        if all(t.y is not None for t in doc.test):
            y0 = [[np.asarray(c, dtype=float) for c in t.y] for t in doc.test]
            _check_true_curves(y0, doc.grids)

    logger.debug(f"Read {dataset.n} curves with {dataset.q} components from {path}")
    return FunctionalInput(dataset=dataset, x=x, x0=x0, y0=y0)
