import logging
from pathlib import Path
from typing import Mapping, Union

from misc.constants import LOGGER_NAME
from misc.exceptions import DomainError

logger = logging.getLogger(f"{LOGGER_NAME}.evaluation")

Metric = Union[float, int, str]


def _format_value(value: Metric) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def render_report(metrics: Mapping[str, Metric]) -> str:
    """One "metric<TAB>value" line per entry, in insertion order."""
    lines = []
    for name, value in metrics.items():
        text = _format_value(value)
        if any(ch in name for ch in "\t\n") or any(ch in text for ch in "\t\n"):
            raise DomainError(f"Metric {name!r} contains a tab or newline")
        lines.append(f"{name}\t{text}\n")
    return "".join(lines)


def write_report(path: Union[str, Path], metrics: Mapping[str, Metric]) -> None:
    Path(path).write_text(render_report(metrics), encoding="utf-8", newline="\n")
    logger.info(f"Wrote {len(metrics)} metrics to {path}")
