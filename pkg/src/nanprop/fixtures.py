"""In-process synthetic black-box fixtures.

Each fixture is a plain-Python function over float lists, so the NaN
behavior under test is the raw language arithmetic, not a vectorized
library's. Fixtures carry their mathematical ground-truth pattern (where
one exists) and an analytic Jacobian where practical, to serve as oracles.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .blackbox import FixtureDomainError, InputKind, InputSpec
from .pattern import DEP, ZERO, SparsityPattern


@dataclass(frozen=True)
class Fixture:
    name: str
    n_inputs: int
    n_outputs: int
    fn: callable
    inputs: tuple[InputSpec, ...]
    ground_truth: SparsityPattern | None = None
    jacobian: "callable | None" = None
    branch_free: bool = True
    planted_zero_cells: tuple[tuple[int, int], ...] = ()
    mode_patterns: dict = field(default_factory=dict)


_REGISTRY: dict[str, Fixture] = {}


def register(fx: Fixture) -> Fixture:
    if fx.name in _REGISTRY:
        raise ValueError(f"fixture {fx.name!r} already registered")
    _REGISTRY[fx.name] = fx
    return fx


def get(name: str) -> Fixture:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown fixture {name!r}; known: {', '.join(sorted(_REGISTRY))}"
        )


def list_fixtures() -> list[Fixture]:
    return [_REGISTRY[k] for k in sorted(_REGISTRY)]


@contextmanager
def registered(fx: Fixture):
    """Temporarily expose a generated fixture through the registry."""
    register(fx)
    try:
        yield fx
    finally:
        del _REGISTRY[fx.name]


def _continuous(names_values) -> tuple[InputSpec, ...]:
    return tuple(InputSpec(n, InputKind.CONTINUOUS, v) for n, v in names_values)


# ---------------------------------------------------------------------------
# Elementary fixtures

register(
    Fixture(
        name="sum_pair",
        n_inputs=2,
        n_outputs=1,
        fn=lambda x: [x[0] + x[1]],
        inputs=_continuous([("x1", 1.0), ("x2", 2.0)]),
        ground_truth=SparsityPattern.from_rows([[DEP, DEP]]),
        jacobian=lambda x: np.array([[1.0, 1.0]]),
    )
)

register(
    Fixture(
        name="square_at_zero",
        n_inputs=1,
        n_outputs=1,
        fn=lambda x: [x[0] * x[0]],
        inputs=_continuous([("x", 0.0)]),
        ground_truth=SparsityPattern.from_rows([[DEP]]),
        jacobian=lambda x: np.array([[2.0 * x[0]]]),
    )
)

register(
    Fixture(
        name="self_cancel",
        n_inputs=1,
        n_outputs=1,
        fn=lambda x: [x[0] - x[0]],
        inputs=_continuous([("x", 1.0)]),
        ground_truth=SparsityPattern.from_rows([[ZERO]]),
        jacobian=lambda x: np.array([[0.0]]),
    )
)

register(
    Fixture(
        name="trig_identity",
        n_inputs=1,
        n_outputs=1,
        fn=lambda x: [math.sin(x[0]) ** 2 + math.cos(x[0]) ** 2],
        inputs=_continuous([("x", 0.7)]),
        ground_truth=SparsityPattern.from_rows([[ZERO]]),
        jacobian=lambda x: np.array([[0.0]]),
    )
)


# matvec uses explicit sparse accumulation: a dense dot product would turn
# structural zeros into 0*NaN = NaN and destroy the pattern under test.
MATVEC_A = ((1.0, 0.0), (1.0, 1.0))


def _matvec_fn(x):
    out = []
    for row in MATVEC_A:
        acc = 0.0
        for a, v in zip(row, x):
            if a != 0.0:
                acc = acc + a * v
        out.append(acc)
    return out


register(
    Fixture(
        name="matvec",
        n_inputs=2,
        n_outputs=2,
        fn=_matvec_fn,
        inputs=_continuous([("x1", 1.0), ("x2", 1.0)]),
        ground_truth=SparsityPattern.from_rows([[DEP, ZERO], [DEP, DEP]]),
        jacobian=lambda x: np.array(MATVEC_A),
    )
)


def _nan_rejecting_fn(x):
    if any(math.isnan(v) for v in x):
        raise FixtureDomainError("NaN input rejected")
    return [x[0] * x[0] + x[1], x[0] * x[1]]


register(
    Fixture(
        name="nan_rejecting",
        n_inputs=2,
        n_outputs=2,
        fn=_nan_rejecting_fn,
        inputs=_continuous([("x1", 1.5), ("x2", 2.5)]),
        ground_truth=SparsityPattern.from_rows([[DEP, DEP], [DEP, DEP]]),
        jacobian=lambda x: np.array([[2.0 * x[0], 1.0], [x[1], x[0]]]),
        branch_free=False,
    )
)


_OVERWRITE_DEFAULTS = (1.0, 2.0)


def _nan_overwriting_fn(x):
    # Sanitizes NaN inputs back to its built-in defaults before computing:
    # the magic-number anti-pattern that silently hides dependencies.
    xs = [d if math.isnan(v) else v for v, d in zip(x, _OVERWRITE_DEFAULTS)]
    return [xs[0] + xs[1], xs[0] * xs[1]]


register(
    Fixture(
        name="nan_overwriting",
        n_inputs=2,
        n_outputs=2,
        fn=_nan_overwriting_fn,
        inputs=_continuous(
            [("x1", _OVERWRITE_DEFAULTS[0]), ("x2", _OVERWRITE_DEFAULTS[1])]
        ),
        ground_truth=SparsityPattern.from_rows([[DEP, DEP], [DEP, DEP]]),
        branch_free=False,
    )
)


register(
    Fixture(
        name="constant64",
        n_inputs=64,
        n_outputs=4,
        fn=lambda x: [1.0, 2.0, 3.0, 4.0],
        inputs=_continuous([(f"x{j}", 1.0) for j in range(64)]),
        ground_truth=SparsityPattern.full(4, 64, ZERO),
        jacobian=lambda x: np.zeros((4, 64)),
    )
)


def _single_dep64_gt():
    cells = np.full((1, 64), ZERO, dtype=np.uint8)
    cells[0, 37] = DEP
    return SparsityPattern(cells)


register(
    Fixture(
        name="single_dep64",
        n_inputs=64,
        n_outputs=1,
        fn=lambda x: [2.0 * x[37]],
        inputs=_continuous([(f"x{j}", 1.0) for j in range(64)]),
        ground_truth=_single_dep64_gt(),
        jacobian=lambda x: np.array([[2.0 if j == 37 else 0.0 for j in range(64)]]),
    )
)


# ---------------------------------------------------------------------------
# two_mode_wing: a flag input switches between cantilever and strut-braced
# dependency structures; the strut couples rows/columns 3..5.

TWO_MODE_FLAG_INDEX = 6


def _two_mode_wing_fn(x):
    # NaN flag compares false against everything, so a contaminated flag
    # lands in the strut branch without contaminating outputs.
    cantilever = x[TWO_MODE_FLAG_INDEX] <= 1.0
    f0 = x[0] * x[0] + 2.0 * x[1]
    f1 = 3.0 * x[1]
    f2 = math.sin(x[2])
    if cantilever:
        f3 = x[3] * x[3]
        f4 = 2.0 * x[4]
        f5 = x[5] + 1.0
    else:
        f3 = x[3] + x[4] * x[5]
        f4 = x[3] * x[4]
        f5 = x[4] + x[5] * x[5]
    return [f0, f1, f2, f3, f4, f5]


def _two_mode_patterns():
    common = [
        [DEP, DEP, ZERO, ZERO, ZERO, ZERO, ZERO],
        [ZERO, DEP, ZERO, ZERO, ZERO, ZERO, ZERO],
        [ZERO, ZERO, DEP, ZERO, ZERO, ZERO, ZERO],
    ]
    cantilever = SparsityPattern.from_rows(
        common
        + [
            [ZERO, ZERO, ZERO, DEP, ZERO, ZERO, ZERO],
            [ZERO, ZERO, ZERO, ZERO, DEP, ZERO, ZERO],
            [ZERO, ZERO, ZERO, ZERO, ZERO, DEP, ZERO],
        ]
    )
    strut = SparsityPattern.from_rows(
        common
        + [
            [ZERO, ZERO, ZERO, DEP, DEP, DEP, ZERO],
            [ZERO, ZERO, ZERO, DEP, DEP, ZERO, ZERO],
            [ZERO, ZERO, ZERO, ZERO, DEP, DEP, ZERO],
        ]
    )
    return {"cantilever": cantilever, "strut": strut}


def two_mode_ground_truth(flag_value: float) -> SparsityPattern:
    patterns = get("two_mode_wing").mode_patterns
    return patterns["cantilever" if flag_value <= 1.0 else "strut"]


register(
    Fixture(
        name="two_mode_wing",
        n_inputs=7,
        n_outputs=6,
        fn=_two_mode_wing_fn,
        inputs=_continuous([(f"x{j}", 1.0 + 0.1 * j) for j in range(6)])
        + (InputSpec("mode", InputKind.FLAG, 1.0),),
        branch_free=False,
        mode_patterns=_two_mode_patterns(),
    )
)


# ---------------------------------------------------------------------------
# surrogate38: 38 inputs -> 37 outputs, branch-free, with quadratic terms
# centered exactly on the default initial point so that a central finite
# difference there reads an exact zero while the dependency is real.

SURROGATE38_N = 38
SURROGATE38_M = 37
_S38_X0 = [1.0 + 0.01 * j for j in range(SURROGATE38_N)]
_PLANT_GAIN = 1.0e6

# (row, col) cells whose only dependence is a plant quadratic.
SURROGATE38_PLANTED = ((0, 37), (5, 37), (11, 37), (3, 12))


def _surrogate38_terms():
    """Term list: ('lin', i, j, c) | ('prod', i, j, k, c) | ('plant', i, j)."""
    terms = []
    for i in range(21):
        terms.append(("lin", i, 0, 1.0 + 0.05 * i))
    for i in range(SURROGATE38_M):
        a = 1 + (i * 3) % 36
        b = 1 + (i * 7 + 11) % 36
        terms.append(("lin", i, a, 0.8 + 0.02 * i))
        terms.append(("prod", i, a, b, 0.5 + 0.01 * i))
    for i, j in SURROGATE38_PLANTED:
        terms.append(("plant", i, j))
    return terms


_S38_TERMS = _surrogate38_terms()


def _surrogate38_fn(x):
    out = [0.0] * SURROGATE38_M
    for term in _S38_TERMS:
        if term[0] == "lin":
            _, i, j, c = term
            out[i] = out[i] + c * x[j]
        elif term[0] == "prod":
            _, i, j, k, c = term
            out[i] = out[i] + c * x[j] * x[k]
        else:
            _, i, j = term
            d = x[j] - _S38_X0[j]
            out[i] = out[i] + _PLANT_GAIN * d * d
    return out


def _surrogate38_gt():
    cells = np.full((SURROGATE38_M, SURROGATE38_N), ZERO, dtype=np.uint8)
    for term in _S38_TERMS:
        if term[0] == "lin":
            cells[term[1], term[2]] = DEP
        elif term[0] == "prod":
            cells[term[1], term[2]] = DEP
            cells[term[1], term[3]] = DEP
        else:
            cells[term[1], term[2]] = DEP
    return SparsityPattern(cells)


def _surrogate38_jacobian(x):
    jac = np.zeros((SURROGATE38_M, SURROGATE38_N))
    for term in _S38_TERMS:
        if term[0] == "lin":
            _, i, j, c = term
            jac[i, j] += c
        elif term[0] == "prod":
            _, i, j, k, c = term
            jac[i, j] += c * x[k]
            jac[i, k] += c * x[j]
        else:
            _, i, j = term
            jac[i, j] += 2.0 * _PLANT_GAIN * (x[j] - _S38_X0[j])
    return jac


register(
    Fixture(
        name="surrogate38",
        n_inputs=SURROGATE38_N,
        n_outputs=SURROGATE38_M,
        fn=_surrogate38_fn,
        inputs=_continuous([(f"x{j}", _S38_X0[j]) for j in range(SURROGATE38_N)]),
        ground_truth=_surrogate38_gt(),
        jacobian=_surrogate38_jacobian,
        planted_zero_cells=SURROGATE38_PLANTED,
    )
)


# ---------------------------------------------------------------------------
# Generated fixtures (not registered): random expression-graph functions
# with a declared dependency structure, for property suites.

def planted_pattern(seed: int, n_outputs: int, n_inputs: int, density: float) -> SparsityPattern:
    rng = np.random.default_rng(seed)
    cells = np.where(rng.random((n_outputs, n_inputs)) < density, DEP, ZERO)
    return SparsityPattern(cells.astype(np.uint8))


def make_planted_fixture(
    name: str, gt: SparsityPattern, seed: int = 0
) -> Fixture:
    """Branch-free fixture f_i = sum_j c_ij * x_j over the DEP cells of `gt`.

    Linear so the analytic Jacobian is the coefficient matrix itself, and
    every dependency is visible to finite differences at any point.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(0.5, 1.5, size=gt.cells.shape)
    coeffs[gt.cells != DEP] = 0.0
    dep_lists = [
        [(j, float(coeffs[i, j])) for j in range(gt.n_inputs) if gt.cells[i, j] == DEP]
        for i in range(gt.n_outputs)
    ]

    def fn(x):
        out = []
        for deps in dep_lists:
            acc = 0.0
            for j, c in deps:
                acc = acc + c * x[j]
            out.append(acc)
        return out

    x0 = rng.uniform(0.5, 1.5, size=gt.n_inputs)
    return Fixture(
        name=name,
        n_inputs=gt.n_inputs,
        n_outputs=gt.n_outputs,
        fn=fn,
        inputs=_continuous([(f"x{j}", float(x0[j])) for j in range(gt.n_inputs)]),
        ground_truth=gt,
        jacobian=lambda x, _c=coeffs: _c.copy(),
    )


def make_expression_fixture(seed: int, n_inputs: int, n_outputs: int, density: float) -> Fixture:
    """Random expression-graph fixture with mixed NaN-propagating term types."""
    rng = np.random.default_rng(seed)
    gt_cells = np.full((n_outputs, n_inputs), ZERO, dtype=np.uint8)
    terms = []  # (row, col, kind, coef)
    for i in range(n_outputs):
        for j in range(n_inputs):
            if rng.random() < density:
                gt_cells[i, j] = DEP
                kind = rng.choice(["lin", "sin", "sq", "exp"])
                terms.append((i, j, str(kind), float(rng.uniform(0.5, 2.0))))

    def fn(x):
        out = [0.0] * n_outputs
        for i, j, kind, c in terms:
            v = x[j]
            if kind == "lin":
                t = c * v
            elif kind == "sin":
                t = c * math.sin(v)
            elif kind == "sq":
                t = c * v * v
            else:
                t = c * math.exp(0.1 * v)
            out[i] = out[i] + t
        return out

    x0 = rng.uniform(0.5, 1.5, size=n_inputs)
    return Fixture(
        name=f"expr{seed}",
        n_inputs=n_inputs,
        n_outputs=n_outputs,
        fn=fn,
        inputs=_continuous([(f"x{j}", float(x0[j])) for j in range(n_inputs)]),
        ground_truth=SparsityPattern(gt_cells),
    )
