"""Trinary sparsity patterns and derived structures.

A pattern is an m-by-n matrix of cells, one row per output and one column
per input. Cells are ZERO (no dependency), DEP (dependency), or UNKNOWN
(not yet resolved by a partial trace).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Cell codes, ordered so that cellwise max implements the union dominance
# DEP > UNKNOWN > ZERO.
ZERO = 0
UNKNOWN = 1
DEP = 2

_CELL_CHARS = {ZERO: "0", DEP: "1", UNKNOWN: "?"}
_CHAR_CELLS = {v: k for k, v in _CELL_CHARS.items()}

PATTERN_MAGIC = "nanprop-pattern v1"


class PatternFormatError(ValueError):
    """Raised when pattern text does not conform to the file format."""


@dataclass(frozen=True)
class SparsityPattern:
    """Immutable m×n trinary matrix over {ZERO, DEP, UNKNOWN}."""

    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.uint8)
        if cells.ndim != 2:
            raise ValueError("pattern cells must be a 2-D matrix")
        if cells.size and not np.isin(cells, (ZERO, UNKNOWN, DEP)).all():
            raise ValueError("pattern cells must be ZERO, UNKNOWN or DEP")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @property
    def n_outputs(self) -> int:
        return self.cells.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.cells.shape[1]

    @classmethod
    def full(cls, n_outputs: int, n_inputs: int, fill: int = UNKNOWN) -> "SparsityPattern":
        return cls(np.full((n_outputs, n_inputs), fill, dtype=np.uint8))

    @classmethod
    def from_rows(cls, rows) -> "SparsityPattern":
        """Build from an iterable of row iterables of cell codes."""
        rows = [list(r) for r in rows]
        if not rows:
            return cls(np.zeros((0, 0), dtype=np.uint8))
        return cls(np.array(rows, dtype=np.uint8))

    def binary(self, unknown_as: int = DEP) -> np.ndarray:
        """Boolean effective-nonzero view, with UNKNOWN mapped per `unknown_as`."""
        if unknown_as == DEP:
            return self.cells != ZERO
        elif unknown_as == ZERO:
            return self.cells == DEP
        raise ValueError("unknown_as must be DEP or ZERO")

    def has_unknown(self) -> bool:
        return bool((self.cells == UNKNOWN).any())

    def contains(self, other: "SparsityPattern") -> bool:
        """True if every DEP cell of `other` is DEP here (cellwise superset)."""
        _check_dims(self, other)
        return bool(((other.cells != DEP) | (self.cells == DEP)).all())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return self.cells.shape == other.cells.shape and bool(
            (self.cells == other.cells).all()
        )

    def __hash__(self):
        return hash((self.cells.shape, self.cells.tobytes()))


@dataclass
class DiffReport:
    """Cellwise disagreement between a reference and a candidate pattern."""

    false_negative_cells: list[tuple[int, int]] = field(default_factory=list)
    extra_dep_cells: list[tuple[int, int]] = field(default_factory=list)

    @property
    def false_negative_count(self) -> int:
        return len(self.false_negative_cells)

    def is_empty(self) -> bool:
        return not self.false_negative_cells and not self.extra_dep_cells


@dataclass(frozen=True)
class ColumnAdjacency:
    """Symmetric boolean column-conflict matrix, false on the diagonal."""

    adjacent: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacent, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if not (adj == adj.T).all():
            raise ValueError("adjacency must be symmetric")
        if adj.size and np.diagonal(adj).any():
            raise ValueError("adjacency diagonal must be false")
        adj.flags.writeable = False
        object.__setattr__(self, "adjacent", adj)

    @property
    def n(self) -> int:
        return self.adjacent.shape[0]

    def degree(self, j: int) -> int:
        return int(self.adjacent[j].sum())


def _check_dims(a: SparsityPattern, b: SparsityPattern):
    if a.cells.shape != b.cells.shape:
        raise ValueError(
            f"pattern dimension mismatch: {a.cells.shape} vs {b.cells.shape}"
        )


def gramian_adjacency(p: SparsityPattern, unknown_as: int = DEP) -> ColumnAdjacency:
    """Column intersection adjacency: columns j, k conflict iff they share an
    effective-nonzero row. Computed as the off-diagonal support of B^T B."""
    b = p.binary(unknown_as=unknown_as).astype(np.int64)
    gram = b.T @ b
    adj = gram > 0
    np.fill_diagonal(adj, False)
    return ColumnAdjacency(adj)


def union(a: SparsityPattern, b: SparsityPattern) -> SparsityPattern:
    """Cellwise merge with dominance DEP > UNKNOWN > ZERO."""
    _check_dims(a, b)
    return SparsityPattern(np.maximum(a.cells, b.cells))


def compare(reference: SparsityPattern, candidate: SparsityPattern) -> DiffReport:
    """Report candidate cells that miss a reference dependency (false
    negatives) and candidate dependencies the reference lacks."""
    _check_dims(reference, candidate)
    fn = np.argwhere((reference.cells == DEP) & (candidate.cells == ZERO))
    extra = np.argwhere((candidate.cells == DEP) & (reference.cells == ZERO))
    return DiffReport(
        false_negative_cells=[(int(i), int(j)) for i, j in fn],
        extra_dep_cells=[(int(i), int(j)) for i, j in extra],
    )


def serialize(p: SparsityPattern) -> str:
    lines = [f"{PATTERN_MAGIC} {p.n_outputs} {p.n_inputs}"]
    for row in p.cells:
        lines.append("".join(_CELL_CHARS[int(c)] for c in row))
    return "\n".join(lines) + "\n"


def parse(text: str) -> SparsityPattern:
    lines = [ln for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise PatternFormatError("empty pattern text")
    header = lines[0].split()
    if len(header) != 4 or " ".join(header[:2]) != PATTERN_MAGIC:
        raise PatternFormatError(f"bad pattern header: {lines[0]!r}")
    try:
        m, n = int(header[2]), int(header[3])
    except ValueError:
        raise PatternFormatError(f"bad pattern dimensions in header: {lines[0]!r}")
    if m < 0 or n < 0:
        raise PatternFormatError("negative pattern dimensions")
    body = lines[1:]
    if len(body) != m:
        raise PatternFormatError(f"expected {m} rows, found {len(body)}")
    cells = np.empty((m, n), dtype=np.uint8)
    for i, row in enumerate(body):
        if len(row) != n:
            raise PatternFormatError(f"row {i} has length {len(row)}, expected {n}")
        try:
            cells[i] = [_CHAR_CELLS[ch] for ch in row]
        except KeyError as e:
            raise PatternFormatError(f"bad cell character {e} in row {i}")
    return SparsityPattern(cells)


def load(path) -> SparsityPattern:
    with open(path) as f:
        return parse(f.read())


def save(p: SparsityPattern, path):
    with open(path, "w") as f:
        f.write(serialize(p))
