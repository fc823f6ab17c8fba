"""SVG drawings of the shape whose distinct products give delta(n).

Row i (1 <= i < largest small divisor) holds the cells j with
i <= j < bound_i, as in the marking loop.  Cells whose product is marked
are dark; cells covered by the arithmetic count of the wheel (or by a
skipped row) are light.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Tuple
from xml.sax.saxutils import escape, unescape

import numpy as np

from .errors import CapacityError, DomainError
from .incremental import WHEELS, _wheel_thresholds, delta_value
from .numtheory import divisor_pairs, spf_table

SHAPE_LIMIT = 10_000
CELL = 24
LIGHT = "#d3d3d3"
DARK = "#808080"


@dataclass(frozen=True)
class ShapeCells:
    n: int
    w: int
    # per row i: (i, first column, end column, dark flags per column)
    rows: Tuple[Tuple[int, int, int, Tuple[bool, ...]], ...]

    @property
    def region_cells(self) -> int:
        return sum(end - start for _, start, end, _ in self.rows)

    @property
    def dark_cells(self) -> int:
        return sum(sum(flags) for *_, flags in self.rows)


def shape_cells(n: int, w: int = 0) -> ShapeCells:
    if n < 1:
        raise DomainError("n must be positive")
    if n > SHAPE_LIMIT:
        raise CapacityError(f"shapes are rendered for n <= {SHAPE_LIMIT}")
    if w not in WHEELS:
        raise ValueError(f"wheel modulus must be one of {WHEELS}")
    D = divisor_pairs(n, spf_table(n))
    smalls = D.smalls
    l = len(smalls)
    C = np.zeros(max(w, 1), dtype=np.int64)
    if w and l > 1:
        _wheel_thresholds(n, smalls, l, w, C)
    rows = []
    k = 0
    for i in range(1, int(smalls[-1])):
        if i == smalls[k]:
            k += 1
        b = n // int(smalls[k])
        if b <= i:
            continue
        skipped = w > 0 and i <= w and w % i == 0
        flags = []
        for j in range(i, b):
            p = i * j
            flags.append(bool(not skipped and (w == 0 or p > C[p % w])))
        rows.append((i, i, b, tuple(flags)))
    return ShapeCells(n, w, tuple(rows))


def _runs(flags) -> List[Tuple[int, int, bool]]:
    out = []
    start = 0
    for t in range(1, len(flags) + 1):
        if t == len(flags) or flags[t] != flags[start]:
            out.append((start, t, flags[start]))
            start = t
    return out


def render_shape(n: int, w: int = 0, labels: bool | None = None) -> str:
    """SVG document; counts are embedded in a <metadata> JSON block."""
    cells = shape_cells(n, w)
    d = delta_value(n, w)
    ncols = max((end for _, _, end, _ in cells.rows), default=1)
    nrows = max((i for i, *_ in cells.rows), default=0) + 1
    if labels is None:
        labels = ncols <= 64
    width, height = (ncols + 1) * CELL, (nrows + 1) * CELL
    meta = {"n": n, "wheel": w, "delta": int(d.delta), "region_cells": cells.region_cells,
            "dark_cells": cells.dark_cells, "light_cells": cells.region_cells - cells.dark_cells}
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>shape for delta({n}), wheel {w}</title>",
        f"<metadata>{escape(json.dumps(meta))}</metadata>",
        '<rect width="100%" height="100%" fill="white"/>',
    ]

    # row i is drawn at height index i, column j at index j; origin bottom-left
    def xy(col, row):
        return col * CELL, (nrows - row) * CELL

    for i, start, end, flags in cells.rows:
        for a, b, dark in _runs(flags):
            x, y = xy(start + a, i)
            out.append(f'<rect class="{"dark" if dark else "light"}" x="{x}" y="{y}" '
                       f'width="{(b - a) * CELL}" height="{CELL}" fill="{DARK if dark else LIGHT}"/>')
    # grid
    for c in range(ncols + 2):
        x = c * CELL
        out.append(f'<line x1="{x}" y1="0" x2="{x}" y2="{height}" stroke="black" stroke-width="{2 if c == 1 else 0.5}"/>')
    for r in range(nrows + 2):
        y = r * CELL
        out.append(f'<line x1="0" y1="{y}" x2="{width}" y2="{y}" stroke="black" stroke-width="{2 if r == nrows else 0.5}"/>')
    if labels:
        fs = CELL * 0.4
        for r in range(1, nrows):
            for c in range(1, ncols):
                x, y = xy(c, r)
                out.append(f'<text x="{x + CELL / 2}" y="{y + CELL * 0.65}" font-size="{fs:.1f}" '
                           f'text-anchor="middle">{r * c}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def shape_metadata(svg: str) -> dict:
    start = svg.index("<metadata>") + len("<metadata>")
    end = svg.index("</metadata>")
    return json.loads(unescape(svg[start:end]))
