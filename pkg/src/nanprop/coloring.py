"""Column coloring and compressed-Jacobian evaluation.

Columns that never share a nonzero row can be perturbed in the same seed
vector, so one finite-difference evaluation per color recovers every
structural Jacobian entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blackbox import BlackBoxSpec, Evaluator
from .payload import float_to_bits, bits_to_float
from .pattern import DEP, ColumnAdjacency, SparsityPattern, gramian_adjacency
from .tracer import TraceError, _check_baseline, _resolve_x0, fd_step
from . import tracer

JAC_MAGIC = "nanprop-jac v1"


class DecompressionAmbiguity(TraceError):
    """Two same-colored DEP columns share a row: decompression would
    silently mix their contributions."""


@dataclass(frozen=True)
class Coloring:
    color_of: np.ndarray

    def __post_init__(self):
        colors = np.asarray(self.color_of, dtype=np.int64)
        colors.flags.writeable = False
        object.__setattr__(self, "color_of", colors)

    @property
    def n(self) -> int:
        return self.color_of.shape[0]

    @property
    def n_colors(self) -> int:
        return int(self.color_of.max()) + 1 if self.n else 0

    def columns_of_color(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.color_of == c)

    def is_valid_for(self, adj: ColumnAdjacency) -> bool:
        for j in range(self.n):
            for k in np.flatnonzero(adj.adjacent[j]):
                if k > j and self.color_of[j] == self.color_of[k]:
                    return False
        return True


@dataclass
class CompressedJacobian:
    pattern: SparsityPattern
    values: dict[tuple[int, int], float]
    coloring: Coloring
    x0: np.ndarray
    eval_count: int = 0

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.pattern.n_outputs, self.pattern.n_inputs))
        for (i, j), v in self.values.items():
            out[i, j] = v
        return out


def color_columns(adj: ColumnAdjacency) -> Coloring:
    """Greedy coloring, largest degree first, smallest available color;
    ties broken by lower column index. Deterministic for a given adjacency."""
    n = adj.n
    degrees = adj.adjacent.sum(axis=1)
    order = sorted(range(n), key=lambda j: (-degrees[j], j))
    color_of = np.full(n, -1, dtype=np.int64)
    for j in order:
        taken = {int(color_of[k]) for k in np.flatnonzero(adj.adjacent[j]) if color_of[k] >= 0}
        c = 0
        while c in taken:
            c += 1
        color_of[j] = c
    return Coloring(color_of)


def speedup(n_inputs: int, n_colors: int) -> float:
    if n_colors < 1:
        raise ValueError("n_colors must be >= 1")
    return n_inputs / n_colors


def _check_unambiguous(pattern: SparsityPattern, coloring: Coloring):
    dep = pattern.binary(unknown_as=DEP)
    for c in range(coloring.n_colors):
        cols = coloring.columns_of_color(c)
        counts = dep[:, cols].sum(axis=1)
        rows = np.flatnonzero(counts > 1)
        if rows.size:
            raise DecompressionAmbiguity(
                f"color {c} has {int(counts[rows[0]])} effective-nonzero columns "
                f"in row {int(rows[0])}"
            )


def compressed_jacobian(
    bb: BlackBoxSpec,
    x0=None,
    pattern: SparsityPattern | None = None,
    coloring: Coloring | None = None,
    scheme: str = "forward",
) -> CompressedJacobian:
    """Evaluate the Jacobian with one seed per color. UNKNOWN pattern cells
    are promoted to DEP before grouping, never dropped."""
    if pattern is None:
        raise ValueError("a sparsity pattern is required")
    x0 = _resolve_x0(bb, x0)
    if coloring is None:
        coloring = color_columns(gramian_adjacency(pattern, unknown_as=DEP))
    _check_unambiguous(pattern, coloring)
    if scheme not in ("forward", "central"):
        raise ValueError(f"unknown FD scheme {scheme!r}")

    h = fd_step(x0)
    dep = pattern.binary(unknown_as=DEP)
    values: dict[tuple[int, int], float] = {}
    with Evaluator(bb) as ev:
        f0 = _check_baseline(ev(x0))
        eval_count = 1
        for c in range(coloring.n_colors):
            cols = coloring.columns_of_color(c)
            if not dep[:, cols].any():
                continue  # no structural entries to recover from this seed
            seed = np.zeros_like(x0)
            seed[cols] = h[cols]
            if scheme == "forward":
                rp = ev(x0 + seed)
                eval_count += 1
                if not rp.ok:
                    raise TraceError(f"seed evaluation failed: {rp.failure}")
                delta = rp.outputs - f0
                denom = 1.0
            else:
                rp, rm = ev(x0 + seed), ev(x0 - seed)
                eval_count += 2
                for r in (rp, rm):
                    if not r.ok:
                        raise TraceError(f"seed evaluation failed: {r.failure}")
                delta = rp.outputs - rm.outputs
                denom = 2.0
            for j in cols:
                rows = np.flatnonzero(dep[:, j])
                for i in rows:
                    values[(int(i), int(j))] = float(delta[i] / (denom * h[j]))
    return CompressedJacobian(
        pattern=pattern,
        values=values,
        coloring=coloring,
        x0=x0,
        eval_count=eval_count,
    )


def dense_jacobian(bb: BlackBoxSpec, x0=None, scheme: str = "forward") -> np.ndarray:
    """Full finite-difference Jacobian, n+1 (forward) or 2n (central) evals."""
    jac, _, _ = tracer.fd_jacobian(bb, x0, scheme=scheme)
    return jac


def serialize_jacobian(cj: CompressedJacobian) -> str:
    """Bit-exact text persistence: one `row col hex64` line per DEP cell."""
    m, n = cj.pattern.n_outputs, cj.pattern.n_inputs
    lines = [f"{JAC_MAGIC} {m} {n} {cj.coloring.n_colors}"]
    for (i, j) in sorted(cj.values):
        lines.append(f"{i} {j} {format(float_to_bits(cj.values[(i, j)]), '016x')}")
    return "\n".join(lines) + "\n"


def parse_jacobian(text: str) -> tuple[int, int, int, dict[tuple[int, int], float]]:
    """Returns (m, n, n_colors, values)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty jacobian text")
    head = lines[0].split()
    if len(head) != 5 or " ".join(head[:2]) != JAC_MAGIC:
        raise ValueError(f"bad jacobian header {lines[0]!r}")
    m, n, n_colors = int(head[2]), int(head[3]), int(head[4])
    values = {}
    for ln in lines[1:]:
        i, j, hx = ln.split()
        values[(int(i), int(j))] = bits_to_float(int(hx, 16))
    return m, n, n_colors, values
