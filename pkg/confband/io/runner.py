"""
confband Runner
One CLI invocation: ingest, dispatch, document and optional plot
"""
import time
from typing import Any, Dict

from confband.core.errors import DimensionMismatch
from confband.core.logger import logger
from confband.io.ingest import ingest_functional, ingest_tabular
from confband.io.output import build_document, write_document
from confband.io.plot import plot_document
from confband.methods.dispatch import run_fd, run_multi, with_drawn_seeds
from confband.types import Method, Mode, RunConfig


def _run_multi(cfg: RunConfig) -> Dict[str, Any]:
    inp = ingest_tabular(cfg.input, cfg.response_cols)
    ds = inp.dataset
    if inp.x0.shape[0] == 0:
        raise DimensionMismatch("no test rows flagged in the input")
    logger.run_start(cfg.mode.value, cfg.method.value, ds.n, ds.q, inp.x0.shape[0])
    result = run_multi(cfg, ds, inp.x0)
    if cfg.method != Method.FULL:
        for t, region in enumerate(result.regions[:5]):
            logger.region_summary(f"Test point {t + 1}", region.lo, region.up, inp.response_names)
    return build_document(cfg, result, inp.x0, inp.y0, labels=inp.response_names)


def _run_fd(cfg: RunConfig) -> Dict[str, Any]:
    inp = ingest_functional(cfg.input)
    ds = inp.dataset
    n_test = inp.x0.n if inp.x0 is not None else 0
    logger.run_start(cfg.mode.value, cfg.method.value, ds.n, ds.q, n_test)
    result = run_fd(cfg, ds, inp.x, inp.x0)
    y0 = inp.y0
    if "points" in result.info:
        # bands at validation points are checked against those curves
        y0 = [ds.curves(i) for i in result.info["points"]]
    return build_document(cfg, result, y0=y0)


def run(cfg: RunConfig) -> Dict[str, Any]:
    """
    Execute cfg and return its result document.

    The document is written to cfg.output when set and plotted to cfg.plot
    when set.
    """
    cfg = with_drawn_seeds(cfg)
    started = time.perf_counter()
    doc = _run_fd(cfg) if cfg.mode == Mode.FD else _run_multi(cfg)
    duration_ms = round((time.perf_counter() - started) * 1000.0, 1)
    scalars = {k: v for k, v in doc.get("info", {}).items() if isinstance(v, (int, float, str))}
    logger.metrics_summary({**scalars, "results": len(doc["results"]), "duration_ms": duration_ms})
    logger.info("run finished", mode=cfg.mode.value, method=cfg.method.value, duration_ms=duration_ms)
    if cfg.output:
        write_document(doc, cfg.output)
        logger.info(f"Wrote results to {cfg.output}")
    if cfg.plot:
        plot_document(doc, cfg.plot)
    return doc
