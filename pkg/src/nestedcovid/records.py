"""CSV helpers shared by every exporter."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence


def format_float(value) -> str:
    """Render a number at 17 significant digits (lossless for float64)."""
    if value is None:
        return ""
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    if value == 0.0:
        return "0"
    return f"{value:.17g}"


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) for v in row])
