"""
confband Logging System
Structured logging with rich console output and JSON log files
"""
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

# stdout is reserved for result documents
console = Console(stderr=True)


class StructuredFormatter(logging.Formatter):
    """JSON-structured log formatter."""

    FIELDS = ("mode", "method", "fold", "replicate", "component", "duration_ms")

    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            "timestamp": datetime.now().isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        for field in self.FIELDS:
            if hasattr(record, field):
                log_data[field] = getattr(record, field)

        return json.dumps(log_data)


class ConfbandLogger:
    """Logger with structured file output and rich console display."""

    def __init__(self, name: str = "confband", log_file: Optional[Path] = None):
        self.name = name
        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)
        self.logger.handlers.clear()
        self.logger.propagate = False

        self.rich_handler = RichHandler(
            console=console,
            show_time=True,
            show_path=False,
            rich_tracebacks=True,
            markup=True
        )
        self.rich_handler.setLevel(logging.INFO)
        self.logger.addHandler(self.rich_handler)

        if log_file:
            self.add_log_file(log_file)

    def add_log_file(self, log_file: Path):
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(StructuredFormatter())
        file_handler.setLevel(logging.DEBUG)
        self.logger.addHandler(file_handler)

    def set_verbose(self, verbose: bool):
        self.rich_handler.setLevel(logging.DEBUG if verbose else logging.INFO)

    def set_console_level(self, level: str):
        self.rich_handler.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    def _log_with_context(self, level: int, msg: str, **kwargs):
        extra = {k: v for k, v in kwargs.items() if v is not None}
        self.logger.log(level, msg, extra=extra)

    def info(self, msg: str, **kwargs):
        self._log_with_context(logging.INFO, msg, **kwargs)

    def debug(self, msg: str, **kwargs):
        self._log_with_context(logging.DEBUG, msg, **kwargs)

    def warning(self, msg: str, **kwargs):
        self._log_with_context(logging.WARNING, msg, **kwargs)

    def error(self, msg: str, **kwargs):
        self._log_with_context(logging.ERROR, msg, **kwargs)

    # === Specialized Methods ===

    def run_start(self, mode: str, method: str, n: int, q: int, n_test: int):
        console.print(Panel(
            f"[bold cyan]Mode:[/] {mode}\n"
            f"[bold cyan]Method:[/] {method}\n"
            f"[bold cyan]Training points:[/] {n}   [bold cyan]Components:[/] {q}"
            f"   [bold cyan]Test points:[/] {n_test}",
            title="[bold]Conformal prediction[/]",
            border_style="cyan"
        ))
        self.info(f"Running {mode}/{method} on n={n}, q={q}",
                  mode=mode, method=method)

    def method_step(self, method: str, step: str, details: str = "", **kwargs):
        self.debug(f"{step} {details}".strip(), method=method, **kwargs)

    def degenerate(self, method: str, msg: str):
        self.warning(f"[yellow]{msg}[/]", method=method)

    def region_summary(self, title: str, lo: Sequence[float], up: Sequence[float],
                       labels: Optional[Sequence[str]] = None):
        table = Table(title=title, border_style="cyan")
        table.add_column("Component", style="bold")
        table.add_column("Lower", justify="right")
        table.add_column("Upper", justify="right")
        for j, (a, b) in enumerate(zip(lo, up)):
            name = labels[j] if labels else f"y{j + 1}"
            table.add_row(name, f"{a:.4g}", f"{b:.4g}")
        console.print(table)

    def eval_report(self, rows: Sequence[Dict[str, Any]], alpha: float):
        """Print the leave-one-out comparison table."""
        table = Table(title=f"Leave-one-out evaluation (target coverage {1 - alpha:.0%})",
                      border_style="cyan")
        table.add_column("Method", style="bold")
        table.add_column("Coverage", justify="right")
        table.add_column("Avg size", justify="right")
        table.add_column("Avg time (s)", justify="right")

        for row in rows:
            cov = row["coverage"]
            color = "green" if cov >= 1 - alpha else "yellow" if cov >= 1 - 2 * alpha else "red"
            table.add_row(
                row["method"],
                f"[{color}]{cov:.2f}[/]",
                f"{row['avg_size']:.4g}",
                f"{row['avg_time']:.4f}",
            )

        console.print(table)
        for row in rows:
            self.info(f"{row['method']}: coverage {row['coverage']:.3f}",
                      method=row["method"], component="evaluate")

    def metrics_summary(self, metrics: Dict[str, Any]):
        table = Table(title="Run Metrics", border_style="cyan")
        table.add_column("Metric", style="bold")
        table.add_column("Value", justify="right")
        for k, v in metrics.items():
            label = k.replace("_", " ").title()
            table.add_row(label, str(v))
        console.print(table)


# Global logger instance
logger = ConfbandLogger()
