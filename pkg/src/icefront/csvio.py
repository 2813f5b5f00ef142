"""Deterministic CSV writing shared by the solvers and the runner.

Comma-delimited, UTF-8, LF line endings, header row first; floats printed
with 17 significant digits so a round trip through text is exact and two
runs with identical inputs produce byte-identical files.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from pathlib import Path

__all__ = ["fmt", "write_rows"]


def fmt(value) -> str:
    """Render one CSV cell; floats get the round-trip %.17g format."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    if value is None:
        return ""
    return str(value)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(cell) for cell in row) + "\n")
