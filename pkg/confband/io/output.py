"""
confband Result Documents
Versioned JSON serialization of prediction regions, bands and p-value surfaces
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from confband.config import config
from confband.core.data import region_size
from confband.core.errors import SchemaError
from confband.methods.multi import full_region_size
from confband.types import FullResult, FunctionalResult, MultiResult, RunConfig

Result = Union[MultiResult, FunctionalResult, FullResult]

# settings that do not change results stay out of the echoed config
_RUNTIME_FIELDS = {"output", "plot", "threads", "verbose"}


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy containers and scalars to plain Python."""
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def _multi_entries(result: MultiResult, x0: np.ndarray,
                   y0: Optional[np.ndarray]) -> List[Dict[str, Any]]:
    entries = []
    for t, region in enumerate(result.regions):
        entry = {
            "index": t,
            "x0": x0[t],
            "pred": result.pred[t],
            "lo": region.lo,
            "up": region.up,
            "empty": region.empty,
            "size": region_size(region),
        }
        if region.segments is not None:
            entry["segments"] = [list(s) for s in region.segments]
        if region.ellipsoid is not None:
            entry["ellipsoid"] = {"center": region.ellipsoid.center,
                                  "metric": region.ellipsoid.metric,
                                  "level": region.ellipsoid.level}
        if y0 is not None:
            entry["y0"] = y0[t]
            entry["covered"] = region.contains(y0[t])
        entries.append(entry)
    return entries


def _full_entries(result: FullResult, y0: Optional[np.ndarray]) -> List[Dict[str, Any]]:
    entries = []
    for t, surface in enumerate(result.surfaces):
        entry = {
            "index": t,
            "x0": surface.x0,
            "pred": result.pred[t],
            "axes": surface.axes,
            "pvalues": surface.pvals,
            "accepted": int(np.count_nonzero(surface.in_region(result.alpha))),
            "size": full_region_size(surface, result.alpha),
        }
        if y0 is not None:
            entry["y0"] = y0[t]
        entries.append(entry)
    return entries


def _fd_entries(result: FunctionalResult,
                y0: Optional[Sequence[Sequence[np.ndarray]]]) -> List[Dict[str, Any]]:
    points = result.info.get("points")
    entries = []
    for t, band in enumerate(result.bands):
        entry = {
            "index": t,
            "t": band.t,
            "pred": band.pred,
            "lo": band.lo,
            "up": band.up,
            "size": region_size(band),
        }
        if points is not None:
            entry["point"] = points[t]
        if y0 is not None:
            entry["y0"] = list(y0[t])
            entry["covered"] = band.contains(y0[t])
        entries.append(entry)
    return entries


def build_document(cfg: RunConfig, result: Result, x0: Optional[np.ndarray] = None,
                   y0: Any = None, labels: Optional[Sequence[str]] = None) -> Dict[str, Any]:
    """
    Assemble the result document for one run.

    The effective configuration and seeds are echoed so the run can be
    replayed; no timestamps are recorded.
    """
    if isinstance(result, FullResult):
        results = _full_entries(result, y0)
    elif isinstance(result, MultiResult):
        results = _multi_entries(result, x0, y0)
    else:
        results = _fd_entries(result, y0)

    doc = {
        "schema": config.get("io.schema_version", "confband/v1"),
        "mode": cfg.mode.value,
        "method": result.method.value,
        "alpha": result.alpha,
        "config": cfg.model_dump(mode="json", by_alias=True, exclude=_RUNTIME_FIELDS),
        "seeds": {"seed": cfg.seed, "seed_rand": cfg.seed_rand,
                  "replicates": result.info.get("replicate_seeds")},
        "info": {k: v for k, v in result.info.items() if k != "replicate_seeds"},
        "labels": list(labels) if labels else None,
        "results": results,
    }
    return to_jsonable(doc)


def dumps(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_document(doc: Dict[str, Any], path: Optional[Union[str, Path]]) -> str:
    """Write to path, or return the text for stdout when path is None."""
    text = dumps(doc)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_document(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not a result document: {e}", node="$") from None
    expected = config.get("io.schema_version", "confband/v1")
    if not isinstance(doc, dict) or doc.get("schema") != expected:
        raise SchemaError(f"{path} is not a '{expected}' result document", node="schema")
    return doc


def load_run_config(doc: Dict[str, Any]) -> RunConfig:
    """The RunConfig echoed in a result document."""
    if "config" not in doc:
        raise SchemaError("result document has no 'config' section", node="config")
    return RunConfig.model_validate(doc["config"])
