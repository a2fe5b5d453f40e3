"""Pattern rendering: text grids and matplotlib figures.

Gray cells are dependencies, white cells are zeros, hatched cells are
unknown; false-negative marks are drawn as red X's.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .pattern import DEP, UNKNOWN, ZERO, SparsityPattern

GRID_DEP = "#"
GRID_ZERO = "."
GRID_UNKNOWN = "?"
GRID_MARK = "X"

_GRID_CHARS = {DEP: GRID_DEP, ZERO: GRID_ZERO, UNKNOWN: GRID_UNKNOWN}
_CHARS_GRID = {v: k for k, v in _GRID_CHARS.items()}


def render_grid(p: SparsityPattern, marks=()) -> str:
    """One text line per output row; `marks` cells are drawn as X."""
    marks = set(marks)
    lines = []
    for i in range(p.n_outputs):
        chars = []
        for j in range(p.n_inputs):
            if (i, j) in marks:
                chars.append(GRID_MARK)
            else:
                chars.append(_GRID_CHARS[int(p.cells[i, j])])
        lines.append("".join(chars))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_grid(text: str, mark_as: int = ZERO) -> SparsityPattern:
    """Inverse of render_grid; X marks read back per `mark_as`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    rows = []
    for ln in lines:
        row = []
        for ch in ln:
            if ch == GRID_MARK:
                row.append(mark_as)
            else:
                row.append(_CHARS_GRID[ch])
        rows.append(row)
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("inconsistent grid row lengths")
    return SparsityPattern.from_rows(rows)


def render_figure(p: SparsityPattern, path, marks=(), title: str | None = None):
    """Write a cell-grid figure (format from the file extension)."""
    marks = set(marks)
    m, n = p.n_outputs, p.n_inputs
    fig, ax = plt.subplots(figsize=(max(2.0, n * 0.22), max(2.0, m * 0.22)))
    for i in range(m):
        for j in range(n):
            cell = int(p.cells[i, j])
            if cell == DEP:
                face, hatch = "0.55", None
            elif cell == ZERO:
                face, hatch = "white", None
            else:
                face, hatch = "white", "///"
            ax.add_patch(
                Rectangle(
                    (j, m - 1 - i), 1, 1,
                    facecolor=face, hatch=hatch,
                    edgecolor="0.8", linewidth=0.4,
                )
            )
    for (i, j) in marks:
        ax.plot(
            j + 0.5, m - 1 - i + 0.5,
            marker="x", color="red", markersize=6, markeredgewidth=1.6,
        )
    ax.set_xlim(0, max(n, 1))
    ax.set_ylim(0, max(m, 1))
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    ax.set_xlabel(f"{n} inputs")
    ax.set_ylabel(f"{m} outputs")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
