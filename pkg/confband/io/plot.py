"""
confband Plotting
SVG figures for result documents: p-value heatmaps, interval glyphs and band panels
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from confband.config import config  # noqa: E402
from confband.core.errors import UnsupportedResult  # noqa: E402
from confband.core.logger import logger  # noqa: E402

# stable element ids keep reruns byte-identical
matplotlib.rcParams["svg.hashsalt"] = "confband"


def _finite(values: Sequence[Any]) -> np.ndarray:
    """Bounds as floats with infinities blanked out."""
    arr = np.array([np.nan if v is None else v for v in values], dtype=float)
    arr[~np.isfinite(arr)] = np.nan
    return arr


def _labels(doc: Dict[str, Any], q: int, labels: Optional[Sequence[str]]) -> List[str]:
    labels = labels or doc.get("labels")
    if labels and len(labels) == q:
        return list(labels)
    return [f"y{j + 1}" for j in range(q)]


def _save(fig, path: Union[str, Path]):
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote plot to {path}")


def _plot_full(doc: Dict[str, Any], path, labels):
    results = doc["results"]
    q = len(results[0]["axes"])
    if q > 2:
        raise UnsupportedResult(f"p-value surfaces can be drawn for q <= 2, got q = {q}")
    alpha = doc["alpha"]
    names = _labels(doc, q, labels)

    fig, axes = plt.subplots(len(results), 1, figsize=(6, 4.5 * len(results)) if q == 2
                             else (7, 1.6 * len(results)), squeeze=False)
    for ax, entry in zip(axes[:, 0], results):
        pvals = np.asarray(entry["pvalues"], dtype=float)
        grid = [np.asarray(a, dtype=float) for a in entry["axes"]]
        if q == 2:
            surface = pvals.reshape(len(grid[0]), len(grid[1]))
            image = ax.imshow(surface.T, origin="lower", aspect="auto", vmin=0.0, vmax=1.0,
                              cmap="viridis",
                              extent=(grid[0][0], grid[0][-1], grid[1][0], grid[1][-1]))
            ax.contour(grid[0], grid[1], surface.T, levels=[alpha], colors="white",
                       linewidths=1.0)
            ax.set_xlabel(names[0])
            ax.set_ylabel(names[1])
            fig.colorbar(image, ax=ax, label="p-value")
        else:
            image = ax.imshow(pvals[None, :], aspect="auto", vmin=0.0, vmax=1.0, cmap="viridis",
                              extent=(grid[0][0], grid[0][-1], 0, 1))
            ax.set_yticks([])
            ax.set_xlabel(names[0])
            fig.colorbar(image, ax=ax, label="p-value")
        ax.set_title(f"Test point {entry['index'] + 1}")
    _save(fig, path)


def _plot_multi(doc: Dict[str, Any], path, labels, same_scale: bool, color: str):
    results = doc["results"]
    q = len(results[0]["lo"])
    names = _labels(doc, q, labels)
    fig, axes = plt.subplots(q, 1, figsize=(7, 2.6 * q), squeeze=False,
                             sharey=same_scale)
    idx = np.arange(1, len(results) + 1)
    for j, ax in enumerate(axes[:, 0]):
        lo = _finite([e["lo"][j] for e in results])
        up = _finite([e["up"][j] for e in results])
        pred = _finite([e["pred"][j] for e in results])
        ax.vlines(idx, lo, up, colors=color, linewidth=2.5, label="prediction interval")
        ax.scatter(idx, pred, color="black", s=14, zorder=3, label="prediction")
        if all("y0" in e for e in results):
            ax.scatter(idx, [e["y0"][j] for e in results], marker="x", color="tab:blue",
                       zorder=4, label="observed")
        ax.set_ylabel(names[j])
        ax.set_xticks(idx)
    axes[-1, 0].set_xlabel("test point")
    axes[0, 0].legend(loc="best", fontsize="small")
    axes[0, 0].set_title(f"{doc['method']} (alpha = {doc['alpha']})")
    _save(fig, path)


def _plot_fd(doc: Dict[str, Any], path, labels, same_scale: bool, color: str):
    results = doc["results"]
    q = len(results[0]["t"])
    names = _labels(doc, q, labels)
    fig, axes = plt.subplots(q, 1, figsize=(7, 2.8 * q), squeeze=False, sharey=same_scale)
    for j, ax in enumerate(axes[:, 0]):
        for entry in results:
            t = np.asarray(entry["t"][j], dtype=float)
            ax.fill_between(t, _finite(entry["lo"][j]), _finite(entry["up"][j]),
                            color=color, alpha=0.25, linewidth=0)
            if entry.get("pred") is not None:
                ax.plot(t, entry["pred"][j], color=color, linewidth=1.0)
            if "y0" in entry:
                ax.plot(t, entry["y0"][j], color="black", linewidth=1.0, linestyle="--")
        ax.set_ylabel(names[j])
    axes[-1, 0].set_xlabel("t")
    axes[0, 0].set_title(f"{doc['method']} bands (alpha = {doc['alpha']})")
    _save(fig, path)


def plot_document(doc: Dict[str, Any], path: Union[str, Path],
                  same_scale: Optional[bool] = None, labels: Optional[Sequence[str]] = None,
                  fill_color: Optional[str] = None):
    """
    Render a result document as SVG.

    Full conformal results become one heatmap (q = 2) or strip (q = 1) per
    test point; other multivariate results per-component interval glyphs;
    functional results one band panel per component.
    """
    if not doc.get("results"):
        raise UnsupportedResult("result document holds no test points to plot")
    same_scale = config.get("plot.same_scale", False) if same_scale is None else same_scale
    color = fill_color or config.get("plot.fill_color", "#d62728")

    if doc.get("method") == "full":
        _plot_full(doc, path, labels)
    elif doc.get("mode") == "fd":
        _plot_fd(doc, path, labels, same_scale, color)
    else:
        _plot_multi(doc, path, labels, same_scale, color)
