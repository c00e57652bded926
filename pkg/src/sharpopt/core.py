"""Shared data model: vectors, problem descriptions, solver configuration,
and iteration traces used by every solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .geometry import SetSpec

# Dense double-precision coordinate vector; all library math is Euclidean.
Vector = np.ndarray

# An oracle maps a point to (value, subgradient).  Oracles must be pure:
# the library never mutates a problem and may evaluate concurrently.
Oracle = Callable[[np.ndarray], "tuple[float, np.ndarray]"]

#: Default comparison tolerances.  Inequalities that are exact in exact
#: arithmetic are asserted up to these slacks.
ABS_TOL = 1e-9
REL_TOL = 1e-7


class DimensionMismatchError(ValueError):
    """Operands live in spaces of different dimension."""


class MissingConstantError(ValueError):
    """A solver needs a regularity constant the problem does not declare."""


class InconsistentValueError(ValueError):
    """An observed objective value contradicts the declared optimal value."""


class IterationLimitError(RuntimeError):
    """Iteration budget exhausted before the stopping rule fired.

    The partial result (with its trace) is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


def as_vector(x, dim: int | None = None) -> Vector:
    """Validate and convert ``x`` to a finite 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite coordinates")
    if dim is not None and arr.size != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {arr.size}")
    return arr


def frozen_vector(x, dim: int | None = None) -> Vector:
    """Like :func:`as_vector` but returns a read-only copy (safe to share)."""
    arr = np.array(as_vector(x, dim))
    arr.setflags(write=False)
    return arr


def dot(a: Vector, b: Vector) -> float:
    """Euclidean inner product.  Raises on dimension mismatch."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dot: shapes {a.shape} and {b.shape}")
    return float(np.dot(a, b))


def norm2(a: Vector) -> float:
    """Euclidean norm sqrt(<a, a>)."""
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


def approx_leq(a: float, b: float, abs_tol: float = ABS_TOL,
               rel_tol: float = REL_TOL) -> bool:
    """``a <= b`` up to the default absolute/relative slack."""
    return a <= b + abs_tol + rel_tol * max(abs(a), abs(b))


@dataclass(frozen=True)
class SharpnessSpec:
    """Growth and generalized-convexity data attached to a problem.

    ``sharp_modulus`` is the constant in the linear lower bound
    f(x) - f* >= sharp_modulus * dist(x, solution set); ``growth_order`` /
    ``growth_modulus`` describe the weaker bound with dist(x, X*)**order.
    ``weak_quasiconvexity`` is the beta in
    f* >= f(x) + (1/beta) <g(x), x* - x>; convex problems have beta = 1.
    """

    sharp_modulus: float | None = None
    weak_quasiconvexity: float = 1.0
    growth_order: float = 1.0
    growth_modulus: float | None = None
    solution_set: "Sequence[Vector] | SetSpec | None" = None

    def __post_init__(self):
        if self.sharp_modulus is not None and self.sharp_modulus <= 0:
            raise ValueError("sharp_modulus must be positive")
        if not 0 < self.weak_quasiconvexity <= 1:
            raise ValueError("weak_quasiconvexity must lie in (0, 1]")
        if self.growth_order < 1:
            raise ValueError("growth_order must be >= 1")
        if self.growth_modulus is not None and self.growth_modulus <= 0:
            raise ValueError("growth_modulus must be positive")


@dataclass(frozen=True)
class ProblemSpec:
    """An objective oracle, a feasible set, and declared regularity constants.

    Every constant is optional: absence is a type-level fact, never a
    sentinel number.  Solvers that need a constant raise
    :class:`MissingConstantError` when it is ``None``.

    gradient_holder_constant bounds ||g(x) - g(y)|| <= C ||x - y||**exponent
    (subgradients when exponent = 0); function_holder_constant bounds
    |f(x) - f(y)| <= C ||x - y||**exponent.  homogeneity_floor is a
    gamma with f(x) >= gamma ||x|| on the feasible set.
    """

    objective: Oracle
    feasible_set: "SetSpec"
    holder_exponent: float | None = None
    gradient_holder_constant: float | None = None
    function_holder_constant: float | None = None
    lipschitz_constant: float | None = None
    homogeneity_floor: float | None = None
    optimal_value: float | None = None

    def __post_init__(self):
        if self.holder_exponent is not None and not 0 <= self.holder_exponent <= 1:
            raise ValueError("holder_exponent must lie in [0, 1]")
        for name in ("gradient_holder_constant", "function_holder_constant",
                     "lipschitz_constant", "homogeneity_floor"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive when declared")

    @property
    def dimension(self) -> int:
        return self.feasible_set.dimension

    def eval(self, x: Vector) -> tuple[float, Vector]:
        value, grad = self.objective(np.asarray(x, dtype=float))
        return float(value), np.asarray(grad, dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by all solvers; unused fields are ignored per method."""

    relative_accuracy: float | None = None    # gamma
    epsilon: float | None = None              # derived when None
    radius_estimate: float | None = None      # derived when None
    initial_constant: float = 1.0             # first local smoothness guess
    max_iterations: int = 1000
    max_backtracks_per_step: int = 60
    inexactness: float = 0.0                  # slack in the inexact sharp bound
    target_value: float | None = None         # surrogate optimal value f_bar
    seed: int = 0

    def __post_init__(self):
        if self.relative_accuracy is not None and self.relative_accuracy <= 0:
            raise ValueError("relative_accuracy must be positive")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.radius_estimate is not None and self.radius_estimate <= 0:
            raise ValueError("radius_estimate must be positive")
        if self.initial_constant <= 0:
            raise ValueError("initial_constant must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.max_backtracks_per_step < 1:
            raise ValueError("max_backtracks_per_step must be >= 1")
        if self.inexactness < 0:
            raise ValueError("inexactness must be nonnegative")


@dataclass(frozen=True)
class TraceRecord:
    """One row per iteration.  Fields outside a solver's column set are None.

    ``bound`` is the solver's primary theoretical guarantee evaluated at
    this iterate; ``certificate_residual`` is bound minus the observed
    quantity and must stay above -tolerance whenever both are known.
    """

    iteration: int
    objective: float
    grad_norm: float | None
    oracle_calls: int
    elapsed: float
    step: float | None = None               # subgradient step length
    local_constant: float | None = None     # accepted smoothness candidate
    coupling: float | None = None           # per-step coupling coefficient
    accumulator: float | None = None        # running coefficient sum
    step_slack: float | None = None         # accepted model slack
    backtracks: int | None = None
    distance_sq: float | None = None        # squared distance to solutions
    bound: float | None = None
    factor: float | None = None             # per-step contraction factor
    product_bound: float | None = None
    geometric_bound: float | None = None
    inexact_bound: float | None = None
    certificate_residual: float | None = None


def validate_trace(records: Sequence[TraceRecord]) -> None:
    """Check trace bookkeeping: indices strictly increasing from 0 and
    oracle-call counts nondecreasing."""
    if not records:
        return
    if records[0].iteration != 0:
        raise ValueError("trace must start at iteration 0")
    for prev, cur in zip(records, records[1:]):
        if cur.iteration <= prev.iteration:
            raise ValueError("trace iterations must strictly increase")
        if cur.oracle_calls < prev.oracle_calls:
            raise ValueError("oracle-call count must be nondecreasing")


@dataclass
class SolveResult:
    """Final iterate, status, resolved constants, and the full trace."""

    x: Vector
    trace: list[TraceRecord] = field(default_factory=list)
    status: str = "completed"
    constants: dict = field(default_factory=dict)
    iterates: list | None = None    # kept only when a run is asked to record them

    @property
    def iterations(self) -> int:
        return self.trace[-1].iteration if self.trace else 0

    @property
    def objective(self) -> float:
        return self.trace[-1].objective

    @property
    def oracle_calls(self) -> int:
        return self.trace[-1].oracle_calls if self.trace else 0


def solution_distance(solution_set, x: Vector) -> float:
    """Distance from ``x`` to a solution set given as a finite list of
    points or as a feasible-set description with a projection."""
    if solution_set is None:
        raise ValueError("no solution set declared")
    if hasattr(solution_set, "project"):
        return float(np.linalg.norm(x - solution_set.project(x)))
    pts = [np.asarray(p, dtype=float) for p in solution_set]
    if not pts:
        raise ValueError("empty solution set")
    return min(float(np.linalg.norm(x - p)) for p in pts)
