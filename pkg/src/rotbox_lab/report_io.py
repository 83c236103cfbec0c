"""Deterministic report serialization.

All floats are rounded to 9 significant digits before writing, so a
rerun with the same configuration and seed produces byte-identical
files.
"""

from __future__ import annotations

import json
from pathlib import Path


def round9(value):
    """Recursively round floats to 9 significant digits."""
    if isinstance(value, float):
        return float(f"{value:.9g}")
    if isinstance(value, dict):
        return {k: round9(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round9(v) for v in value]
    return value


def fmt9(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def dump_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(round9(obj), indent=2) + "\n")


def dump_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt9(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def fixed_width_table(header: list[str], rows: list[list], min_width: int = 8) -> str:
    cells = [[fmt9(v) for v in row] for row in rows]
    widths = [max(min_width, len(h), *(len(r[i]) for r in cells) if cells else (0,))
              for i, h in enumerate(header)]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    out.append("  ".join("-" * w for w in widths))
    for r in cells:
        out.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(out)
