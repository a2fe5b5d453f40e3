"""Greedy re-tracing session for black boxes with flag inputs.

A session holds the running union of every per-flag-tuple trace. When an
input vector shows a flag combination never seen before, the trace is
re-run at that point and folded in; otherwise nothing is evaluated and the
current pattern/coloring stand. Piecewise branching on continuous inputs
stays out of reach of this heuristic; session reports record that residual
risk.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pattern as pat
from . import tracer
from .blackbox import BlackBoxSpec, InProcess, Subprocess
from .coloring import Coloring, color_columns
from .pattern import SparsityPattern, gramian_adjacency, union
from .tracer import Method, NanIncompatible, TraceReport

RESIDUAL_RISK_NOTE = (
    "flag tuples only cover discrete branching; piecewise branching on "
    "continuous inputs is not detected"
)

MANIFEST_NAME = "manifest.json"


class FlagValueError(ValueError):
    """A flag input carried a non-integral or non-finite value."""


@dataclass
class HistoryEntry:
    flag_tuple: tuple[float, ...]
    report: TraceReport


@dataclass
class ObserveResult:
    retraced: bool
    accumulated: SparsityPattern
    coloring: Coloring
    report: TraceReport | None = None


def _trace_with(method: str, bb: BlackBoxSpec, x0, **knobs) -> TraceReport:
    if method == "onehot":
        return tracer.trace_onehot(bb, x0, **knobs)
    if method == "chunked":
        return tracer.trace_chunked(bb, x0, **knobs)
    if method == "payload":
        return tracer.trace_payload(bb, x0, **knobs)
    if method == "fd":
        return tracer.fd_sparsity(bb, x0, **knobs)
    raise ValueError(f"unknown trace method {method!r}")


def spec_digest(spec: BlackBoxSpec) -> str:
    """Stable hash of the black-box description, for manifest matching."""
    desc = {
        "n_inputs": spec.n_inputs,
        "n_outputs": spec.n_outputs,
        "inputs": [(s.name, s.kind.value, s.initial) for s in spec.inputs],
    }
    if isinstance(spec.invocation, InProcess):
        desc["invocation"] = ["fixture", spec.invocation.fixture]
    else:
        inv: Subprocess = spec.invocation
        desc["invocation"] = ["subprocess", list(inv.argv), inv.framing, inv.persistent]
    blob = json.dumps(desc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


class TraceSession:
    """Single-owner mutable session; callers serialize access."""

    def __init__(
        self,
        spec: BlackBoxSpec,
        method: str = "onehot",
        method_knobs: dict | None = None,
        fallback_to_fd: bool = True,
    ):
        self.spec = spec
        self.method = method
        self.method_knobs = dict(method_knobs or {})
        self.fallback_to_fd = fallback_to_fd
        self.accumulated: SparsityPattern | None = None
        self.coloring: Coloring | None = None
        self.seen_flag_tuples: set[tuple[float, ...]] = set()
        self.history: list[HistoryEntry] = []
        self.warnings: list[str] = []
        self._flag_indices = spec.flag_indices()

    # -- flag handling ------------------------------------------------------

    def flag_tuple(self, x) -> tuple[float, ...]:
        x = np.asarray(x, dtype=np.float64)
        values = []
        for j in self._flag_indices:
            v = float(x[j])
            if not math.isfinite(v) or v != int(v):
                raise FlagValueError(
                    f"flag input {self.spec.inputs[j].name!r} has "
                    f"non-integral value {v!r}"
                )
            values.append(v)
        return tuple(values)

    # -- tracing ------------------------------------------------------------

    def _run_trace(self, x0) -> TraceReport:
        try:
            return _trace_with(self.method, self.spec, x0, **self.method_knobs)
        except NanIncompatible as e:
            if not self.fallback_to_fd or self.method == "fd":
                raise
            self.warnings.append(
                f"NanIncompatibleFallback: {e}; falling back to fd_sparsity"
            )
            return tracer.fd_sparsity(self.spec, x0)

    def _fold(self, flag_tuple, report: TraceReport):
        if self.accumulated is None:
            self.accumulated = report.pattern
        else:
            self.accumulated = union(self.accumulated, report.pattern)
        self.coloring = color_columns(
            gramian_adjacency(self.accumulated, unknown_as=pat.DEP)
        )
        self.seen_flag_tuples.add(flag_tuple)
        self.history.append(HistoryEntry(flag_tuple, report))

    def init(self, x0=None) -> TraceReport:
        x0 = self.spec.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
        report = self._run_trace(x0)
        self._fold(self.flag_tuple(x0), report)
        return report

    def observe(self, x) -> ObserveResult:
        """Retrace iff x carries an unseen flag tuple. A failed retrace
        leaves the session unchanged (the exception propagates)."""
        if self.accumulated is None:
            raise RuntimeError("session not initialized; call init() first")
        ft = self.flag_tuple(x)
        if ft in self.seen_flag_tuples:
            return ObserveResult(False, self.accumulated, self.coloring)
        report = self._run_trace(np.asarray(x, dtype=np.float64))
        self._fold(ft, report)
        return ObserveResult(True, self.accumulated, self.coloring, report)

    @property
    def total_eval_count(self) -> int:
        return sum(h.report.eval_count for h in self.history)

    # -- persistence --------------------------------------------------------

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for idx, h in enumerate(self.history):
            fname = f"pattern_{idx:03d}.txt"
            pat.save(h.report.pattern, directory / fname)
            entries.append(
                {
                    "flag_tuple": list(h.flag_tuple),
                    "pattern_file": fname,
                    "eval_count": h.report.eval_count,
                    "method": str(h.report.method),
                }
            )
        manifest = {
            "spec_hash": spec_digest(self.spec),
            "method": self.method,
            "method_knobs": self.method_knobs,
            "retrace_baseline": "observed point, not re-centered at x0",
            "residual_risk": RESIDUAL_RISK_NOTE,
            "warnings": self.warnings,
            "traces": entries,
        }
        with open(directory / MANIFEST_NAME, "w") as f:
            json.dump(manifest, f, indent=2)

    def resume(self, directory):
        """Reload previously recorded flag tuples and patterns; traces are
        not re-run for tuples in the manifest."""
        directory = Path(directory)
        with open(directory / MANIFEST_NAME) as f:
            manifest = json.load(f)
        if manifest["spec_hash"] != spec_digest(self.spec):
            raise ValueError("manifest belongs to a different black box")
        self.warnings = list(manifest.get("warnings", []))
        for entry in manifest["traces"]:
            p = pat.load(directory / entry["pattern_file"])
            report = TraceReport(
                pattern=p,
                eval_count=entry["eval_count"],
                method=Method("resumed"),
            )
            self._fold(tuple(entry["flag_tuple"]), report)


def session_init(
    spec: BlackBoxSpec,
    x0=None,
    method: str = "onehot",
    method_knobs: dict | None = None,
) -> TraceSession:
    session = TraceSession(spec, method=method, method_knobs=method_knobs)
    session.init(x0)
    return session


def observe(session: TraceSession, x) -> ObserveResult:
    return session.observe(x)
