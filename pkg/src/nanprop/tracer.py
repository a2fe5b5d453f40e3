"""Sparsity tracing: NaN contamination (one-hot, chunked, payload-encoded)
and the finite-difference baseline heuristic."""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import payload
from .blackbox import (
    BlackBoxSpec,
    Evaluator,
    EvalResult,
    Failure,
    FailureKind,
    InputKind,
    Subprocess,
)
from .pattern import DEP, UNKNOWN, ZERO, SparsityPattern

SQRT_EPS = math.sqrt(np.finfo(np.float64).eps)


class TraceError(Exception):
    """Base class for trace failures."""


class NanIncompatible(TraceError):
    """The black box raised or halted on a NaN-contaminated input."""


class BaselineInvalid(TraceError):
    """The uncontaminated representative point fails or yields NaN."""


class PayloadCapacityExceeded(TraceError):
    """More inputs than distinct encodable NaN payloads."""


@dataclass(frozen=True)
class Method:
    kind: str  # "onehot" | "chunked" | "payload" | "fd"
    chunk: int | None = None
    scheme: str | None = None
    tol: float | None = None

    def __str__(self):
        if self.kind == "chunked":
            return f"chunked(g={self.chunk})"
        if self.kind == "fd":
            return f"fd({self.scheme}, tol={self.tol})"
        return self.kind


@dataclass
class DensityBelief:
    """Beta-distribution belief over per-cell dependency probability."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("Beta parameters must be positive")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def update(self, n_dep: int, n_zero: int):
        self.alpha += n_dep
        self.beta += n_zero


@dataclass
class TraceReport:
    pattern: SparsityPattern
    eval_count: int
    method: Method
    warnings: list[str] = field(default_factory=list)
    belief: DensityBelief | None = None


def fd_step(x0: np.ndarray) -> np.ndarray:
    """Per-column step h_j = sqrt(machine eps) * max(1, |x0_j|)."""
    return SQRT_EPS * np.maximum(1.0, np.abs(x0))


def _resolve_x0(bb: BlackBoxSpec, x0) -> np.ndarray:
    x0 = bb.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
    if x0.shape != (bb.n_inputs,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({bb.n_inputs},)")
    return x0


def _check_baseline(result: EvalResult) -> np.ndarray:
    if not result.ok:
        raise BaselineInvalid(f"baseline evaluation failed: {result.failure}")
    if np.isnan(result.outputs).any():
        raise BaselineInvalid("baseline outputs contain NaN")
    return result.outputs


def _contaminated_failure(failure: Failure):
    if failure.kind in (FailureKind.RAISED_ERROR, FailureKind.TIMEOUT):
        raise NanIncompatible(f"black box halted on NaN input: {failure}")
    raise TraceError(f"evaluation failed: {failure}")


def _probe_map(evaluator, inputs, workers: int):
    """Evaluate a list of input vectors, optionally racing per-call
    subprocess probes across threads; results keep input order."""
    parallel_ok = (
        workers > 1
        and isinstance(evaluator.spec.invocation, Subprocess)
        and not evaluator.spec.invocation.persistent
    )
    if parallel_ok:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(evaluator, inputs))
    return [evaluator(x) for x in inputs]


def trace_onehot(
    bb: BlackBoxSpec,
    x0=None,
    baseline: bool = True,
    workers: int = 1,
) -> TraceReport:
    """One NaN-contaminated evaluation per input column; a NaN output marks
    a dependency. eval_count = n_inputs, +1 when the baseline is taken."""
    x0 = _resolve_x0(bb, x0)
    n, m = bb.n_inputs, bb.n_outputs
    warnings: list[str] = []
    with Evaluator(bb) as ev:
        eval_count = 0
        baseline_outputs = None
        if baseline:
            baseline_outputs = _check_baseline(ev(x0))
            eval_count += 1

        probes = []
        for j in range(n):
            x = x0.copy()
            x[j] = math.nan
            probes.append(x)
        results = _probe_map(ev, probes, workers)
        eval_count += n

        cells = np.full((m, n), ZERO, dtype=np.uint8)
        for j, result in enumerate(results):
            if not result.ok:
                _contaminated_failure(result.failure)
            nan_rows = np.isnan(result.outputs)
            cells[nan_rows, j] = DEP
            if (
                baseline_outputs is not None
                and not nan_rows.any()
                and bb.inputs[j].kind is InputKind.CONTINUOUS
                and result.outputs.tobytes() == baseline_outputs.tobytes()
            ):
                warnings.append(
                    f"SuspectedOverwrite(col={j}): contaminated outputs are "
                    "bitwise identical to the baseline"
                )
    return TraceReport(
        pattern=SparsityPattern(cells),
        eval_count=eval_count,
        method=Method("onehot"),
        warnings=warnings,
    )


def trace_chunked(
    bb: BlackBoxSpec,
    x0=None,
    g: int = 2,
    baseline: bool = False,
) -> TraceReport:
    """Contaminate consecutive blocks of g inputs per evaluation. All
    columns of a NaN-producing block are marked DEP (conservative), so the
    result is a cellwise superset of the one-hot pattern at eval_count
    ceil(n/g)."""
    x0 = _resolve_x0(bb, x0)
    n, m = bb.n_inputs, bb.n_outputs
    if not 1 <= g <= n:
        raise ValueError(f"chunk size {g} outside [1, {n}]")
    with Evaluator(bb) as ev:
        eval_count = 0
        if baseline:
            _check_baseline(ev(x0))
            eval_count += 1
        cells = np.full((m, n), ZERO, dtype=np.uint8)
        for start in range(0, n, g):
            block = range(start, min(start + g, n))
            x = x0.copy()
            x[list(block)] = math.nan
            result = ev(x)
            eval_count += 1
            if not result.ok:
                _contaminated_failure(result.failure)
            nan_rows = np.isnan(result.outputs)
            for j in block:
                cells[nan_rows, j] = DEP
    return TraceReport(
        pattern=SparsityPattern(cells),
        eval_count=eval_count,
        method=Method("chunked", chunk=g),
    )


def trace_payload(
    bb: BlackBoxSpec,
    x0=None,
    use_density_prior: bool = False,
    prior_alpha: float = 1.0,
    prior_beta: float = 1.0,
) -> TraceReport:
    """Payload-encoded trace: tag every column of a group with its own
    quiet-NaN payload, read back which payloads surface, and recursively
    halve groups whose cells stay unknown (shadowed).

    Worst case 2n-1 evaluations; one evaluation suffices for an all-zero
    pattern.
    """
    x0 = _resolve_x0(bb, x0)
    n, m = bb.n_inputs, bb.n_outputs
    if n > payload.PAYLOAD_CAPACITY:
        raise PayloadCapacityExceeded(
            f"{n} inputs exceed payload capacity 2^{payload.PAYLOAD_BITS}"
        )
    belief = DensityBelief(prior_alpha, prior_beta)
    cells = np.full((m, n), UNKNOWN, dtype=np.uint8)

    if use_density_prior and n >= 2:
        g0 = min(max(math.ceil(1.0 / belief.mean), 2), n)
        groups = [list(range(s, min(s + g0, n))) for s in range(0, n, g0)]
    else:
        groups = [list(range(n))]

    queue = deque(groups)
    eval_count = 0
    with Evaluator(bb) as ev:
        while queue:
            group = queue.popleft()
            sub = cells[:, group]
            if not (sub == UNKNOWN).any():
                continue
            x = x0.copy()
            for j in group:
                x[j] = payload.encode(j)
            result = ev(x)
            eval_count += 1
            if not result.ok:
                _contaminated_failure(result.failure)

            n_dep = n_zero = 0
            group_set = set(group)
            if len(group) == 1:
                j = group[0]
                for i in range(m):
                    if cells[i, j] != UNKNOWN:
                        continue
                    if math.isnan(result.outputs[i]):
                        cells[i, j] = DEP
                        n_dep += 1
                    else:
                        cells[i, j] = ZERO
                        n_zero += 1
            else:
                for i in range(m):
                    decoded = payload.decode(float(result.outputs[i]))
                    if decoded.kind is payload.DecodeKind.NOT_NAN:
                        for j in group:
                            if cells[i, j] == UNKNOWN:
                                cells[i, j] = ZERO
                                n_zero += 1
                    elif (
                        decoded.kind is payload.DecodeKind.RECOGNIZED
                        and decoded.index in group_set
                    ):
                        # Shadowing: the hit column is certain, the rest of
                        # the group stays unknown for this row.
                        if cells[i, decoded.index] == UNKNOWN:
                            n_dep += 1
                        cells[i, decoded.index] = DEP
                    else:
                        # Foreign or out-of-group payload: propagation
                        # mangled the tag, condemn the whole group.
                        for j in group:
                            if cells[i, j] == UNKNOWN:
                                cells[i, j] = DEP
                                n_dep += 1
            belief.update(n_dep, n_zero)

            if (cells[:, group] == UNKNOWN).any():
                half = len(group) // 2
                for part in (group[:half], group[half:]):
                    if part and (cells[:, part] == UNKNOWN).any():
                        queue.append(part)

    assert not (cells == UNKNOWN).any(), "payload trace left unresolved cells"
    return TraceReport(
        pattern=SparsityPattern(cells),
        eval_count=eval_count,
        method=Method("payload"),
        belief=belief,
    )


def fd_jacobian(
    bb: BlackBoxSpec,
    x0=None,
    scheme: str = "forward",
    workers: int = 1,
) -> tuple[np.ndarray, int, list[str]]:
    """Dense finite-difference Jacobian estimate.

    Returns (jacobian, eval_count, warnings). Forward differences take
    n+1 evaluations (baseline included), central take 2n.
    """
    x0 = _resolve_x0(bb, x0)
    n, m = bb.n_inputs, bb.n_outputs
    if scheme not in ("forward", "central"):
        raise ValueError(f"unknown FD scheme {scheme!r}")
    h = fd_step(x0)
    warnings: list[str] = []
    jac = np.empty((m, n))
    with Evaluator(bb) as ev:
        if scheme == "forward":
            f0 = _check_baseline(ev(x0))
            eval_count = 1
            probes = []
            for j in range(n):
                xp = x0.copy()
                xp[j] += h[j]
                probes.append(xp)
            results = _probe_map(ev, probes, workers)
            eval_count += n
            for j, result in enumerate(results):
                if not result.ok:
                    raise TraceError(
                        f"evaluation failed at perturbed column {j}: {result.failure}"
                    )
                jac[:, j] = (result.outputs - f0) / h[j]
        else:
            probes = []
            for j in range(n):
                xp, xm_ = x0.copy(), x0.copy()
                xp[j] += h[j]
                xm_[j] -= h[j]
                probes += [xp, xm_]
            results = _probe_map(ev, probes, workers)
            eval_count = 2 * n
            for j in range(n):
                rp, rm = results[2 * j], results[2 * j + 1]
                for r in (rp, rm):
                    if not r.ok:
                        raise TraceError(
                            f"evaluation failed at perturbed column {j}: {r.failure}"
                        )
                jac[:, j] = (rp.outputs - rm.outputs) / (2.0 * h[j])
    bad = np.argwhere(~np.isfinite(jac))
    for i, j in bad:
        warnings.append(f"NonFiniteJacobianEntry(row={int(i)}, col={int(j)})")
    return jac, eval_count, warnings


def fd_sparsity(
    bb: BlackBoxSpec,
    x0=None,
    scheme: str = "forward",
    tol: float = 0.0,
    tol_relative: bool = False,
    workers: int = 1,
) -> TraceReport:
    """The conventional heuristic: estimate the dense Jacobian by finite
    differences and call any entry with |J| <= tol a structural zero.

    Default tol=0.0 reproduces the exact-zero criterion, including its
    coincidental-zero false negatives. Non-finite quotients are reported
    DEP with a warning.
    """
    jac, eval_count, warnings = fd_jacobian(bb, x0, scheme=scheme, workers=workers)
    threshold = tol
    finite = np.isfinite(jac)
    if tol_relative and finite.any():
        threshold = tol * max(1.0, float(np.abs(jac[finite]).max()))
    dep = np.abs(jac) > threshold
    dep |= ~finite  # conservative: a broken quotient is not evidence of zero
    cells = np.where(dep, DEP, ZERO).astype(np.uint8)
    return TraceReport(
        pattern=SparsityPattern(cells),
        eval_count=eval_count,
        method=Method("fd", scheme=scheme, tol=tol),
        warnings=warnings,
    )
