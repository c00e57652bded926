"""Subgradient methods with linear-rate certificates for problems with a
sharp minimum: the Polyak-step method for weakly quasiconvex objectives
and a normalized-step method for quasiconvex Holder objectives, including
an inexact variant that tolerates a surrogate optimal value.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    ABS_TOL,
    InconsistentValueError,
    MissingConstantError,
    ProblemSpec,
    REL_TOL,
    SharpnessSpec,
    SolveResult,
    SolverConfig,
    TraceRecord,
    Vector,
    solution_distance,
)
from .geometry import localize, min_norm_point

#: Exit tolerances: stop once the gap or the distance to the solution set
#: is this small (exact-convergence cases must terminate).
EXIT_GAP_TOL = 1e-12
EXIT_DIST_TOL = 1e-12


def polyak_step(x: Vector, problem: ProblemSpec, weak_quasiconvexity: float,
                optimal_value: float) -> tuple[Vector, float]:
    """One projected step with the optimal-value step size
    h = beta (f(x) - f*) / ||g(x)||^2.

    A zero subgradient means the point is optimal: returned unchanged with
    h = 0.  Raises when f(x) < f* beyond tolerance (inconsistent f*).
    """
    x = np.asarray(x, dtype=float)
    value, grad = problem.eval(x)
    return _polyak_update(x, value, grad, problem.feasible_set,
                          weak_quasiconvexity, optimal_value)


def _polyak_update(x, value, grad, feasible_set, beta, optimal_value):
    if value < optimal_value - (ABS_TOL + REL_TOL * abs(optimal_value)):
        raise InconsistentValueError(
            f"observed value {value} below declared optimum {optimal_value}")
    sq = float(np.dot(grad, grad))
    if sq == 0.0:
        return x, 0.0
    h = beta * max(value - optimal_value, 0.0) / sq
    return feasible_set.project(x - h * grad), h


def normalized_step(x: Vector, problem: ProblemSpec, scale_constant: float,
                    target: float) -> tuple[Vector, float]:
    """One projected step with the gradient-normalized step size
    h = (f(x) - target) / (scale ||g(x)||), clamped at 0 when the target
    has been overshot (inexact mode)."""
    if scale_constant <= 0:
        raise ValueError("scale constant must be positive")
    x = np.asarray(x, dtype=float)
    value, grad = problem.eval(x)
    return _normalized_update(x, value, grad, problem.feasible_set,
                              scale_constant, target)


def _normalized_update(x, value, grad, feasible_set, scale, target):
    nrm = float(np.linalg.norm(grad))
    if nrm == 0.0 or value <= target:
        return x, 0.0
    h = (value - target) / (scale * nrm)
    return feasible_set.project(x - h * grad), h


def alignment(x: Vector, solution: Vector, subgradient: Vector) -> float:
    """Normalized alignment <g/||g||, x - x*> between the subgradient
    direction and the offset from a solution; 0 at the solution itself."""
    x = np.asarray(x, dtype=float)
    solution = np.asarray(solution, dtype=float)
    if np.array_equal(x, solution):
        return 0.0
    g = np.asarray(subgradient, dtype=float)
    nrm = float(np.linalg.norm(g))
    if nrm == 0.0:
        raise ValueError("zero subgradient away from the solution")
    return float(np.dot(g / nrm, x - solution))


def alignment_constant_bound(function_holder: float, exponent: float) -> float:
    """Constructive scale constant max(C, C^(2/(1+nu)) / 2) valid in the
    value-vs-alignment bound when only the function Holder data is known."""
    if function_holder <= 0:
        raise ValueError("Holder constant must be positive")
    if not 0.0 <= exponent <= 1.0:
        raise ValueError("exponent must lie in [0, 1]")
    return max(function_holder,
               function_holder ** (2.0 / (1.0 + exponent)) / 2.0)


def localization_radius(function_holder: float, sharp_modulus: float,
                        exponent: float) -> float:
    """Radius (C/alpha)^(1/(1-nu)) within which every feasible point stays
    of the solution set when the objective is both nu-Holder and sharp."""
    if not 0.0 <= exponent < 1.0:
        raise ValueError("localization needs exponent < 1")
    if function_holder <= 0 or sharp_modulus <= 0:
        raise ValueError("constants must be positive")
    return (function_holder / sharp_modulus) ** (1.0 / (1.0 - exponent))


def iterations_for_relative(lipschitz: float, sharp_modulus: float,
                            gamma: float, floor: float) -> int:
    """Iterations after which the optimal-value/normalized step methods
    reach relative accuracy gamma on a convex homogeneous sharp problem:
    ceil(2 (ln 2M - ln gamma gamma0) / (ln M^2 - ln(M^2 - alpha^2)) - 1).
    """
    if min(lipschitz, sharp_modulus, gamma, floor) <= 0:
        raise ValueError("all constants must be positive")
    if lipschitz < sharp_modulus:
        raise ValueError("degenerate contraction: Lipschitz constant below "
                         "the sharpness modulus")
    if lipschitz == sharp_modulus:
        # contraction factor is exactly 0: a single step lands on a solution
        return 1
    if 2.0 * lipschitz <= gamma * floor:
        return 0
    num = 2.0 * (math.log(2.0 * lipschitz) - math.log(gamma * floor))
    den = math.log(lipschitz ** 2) - math.log(lipschitz ** 2 - sharp_modulus ** 2)
    return max(0, math.ceil(num / den - 1.0))


@dataclass
class _RateBounds:
    """Running theoretical bounds carried along a subgradient run."""

    initial_dist_sq: float | None
    sharp_modulus: float | None
    beta: float
    scale: float | None          # Lipschitz / alignment constant in use
    inexactness: float | None    # slack of the inexact sharp bound
    product: float = 1.0

    def geometric_base(self):
        if self.sharp_modulus is None or self.scale is None:
            return None
        return 1.0 - (self.sharp_modulus * self.beta / self.scale) ** 2

    def inexact_base(self):
        if self.sharp_modulus is None or self.scale is None:
            return None
        return 1.0 - 0.5 * (self.sharp_modulus / self.scale) ** 2

    def factor(self, grad_norm, method_bound):
        """Per-step contraction factor of the method in use: adaptive in the
        subgradient norm for optimal-value steps, constant for normalized
        steps."""
        if self.sharp_modulus is None:
            return None
        if method_bound == "geometric":
            return self.geometric_base()
        if method_bound == "inexact":
            return self.inexact_base()
        if grad_norm is None or grad_norm == 0.0:
            return None
        return 1.0 - (self.sharp_modulus * self.beta / grad_norm) ** 2

    def bounds_at(self, k, method_bound):
        """(product, geometric, inexact) bounds on dist^2 at iterate k; only
        the bounds the running method actually guarantees are filled."""
        if self.initial_dist_sq is None:
            return None, None, None
        prod = geo = inexact = None
        if method_bound == "product" and self.sharp_modulus is not None:
            prod = self.product * self.initial_dist_sq
            base = self.geometric_base()
            if base is not None:
                geo = (base ** k) * self.initial_dist_sq
        elif method_bound == "geometric":
            base = self.geometric_base()
            if base is not None:
                geo = (base ** k) * self.initial_dist_sq
        elif method_bound == "inexact" and self.inexactness is not None:
            ibase = self.inexact_base()
            if ibase is not None:
                inexact = (ibase ** k) * self.initial_dist_sq \
                    + 2.0 * (self.inexactness / self.sharp_modulus) ** 2
        return prod, geo, inexact


def _run(problem, sharpness, config, update, scale, inexactness, start,
         method_bound, beta, keep_iterates=False):
    """Shared driver: iterate ``update`` recording per-step factors and the
    running theoretical bounds."""
    config = config or SolverConfig()
    sharpness = sharpness or SharpnessSpec()
    calls = 0

    def oracle(z):
        nonlocal calls
        calls += 1
        return problem.eval(z)

    x = np.asarray(start, dtype=float) if start is not None \
        else min_norm_point(problem.feasible_set)
    f_star = problem.optimal_value
    sols = sharpness.solution_set
    dist0_sq = solution_distance(sols, x) ** 2 if sols is not None else None
    rates = _RateBounds(
        initial_dist_sq=dist0_sq,
        sharp_modulus=sharpness.sharp_modulus,
        beta=beta,
        scale=scale,
        inexactness=inexactness,
    )
    started = time.perf_counter()
    trace = []
    result = SolveResult(x=x, trace=trace, constants={
        "sharp_modulus": sharpness.sharp_modulus,
        "weak_quasiconvexity": beta,
        "scale_constant": scale,
    })
    if keep_iterates:
        result.iterates = [x.copy()]

    k = 0
    while True:
        value, grad = oracle(x)
        grad_norm = float(np.linalg.norm(grad))
        dist_sq = solution_distance(sols, x) ** 2 if sols is not None else None
        prod, geo, inexact = rates.bounds_at(k, method_bound)
        bound = {"product": prod, "geometric": geo, "inexact": inexact}[method_bound]
        residual = None if (bound is None or dist_sq is None) else bound - dist_sq

        stop = None
        if f_star is not None and value - f_star <= EXIT_GAP_TOL * max(1.0, abs(f_star)):
            stop = "tolerance"
        elif dist_sq is not None and math.sqrt(dist_sq) <= EXIT_DIST_TOL:
            stop = "tolerance"
        elif k >= config.max_iterations:
            stop = "iteration-limit"

        x_next, h = (x, 0.0) if stop else update(x, value, grad)
        if stop is None and h == 0.0:
            if grad_norm == 0.0:
                # a zero subgradient certifies optimality
                stop = "stationary"
            elif inexactness is not None:
                # inexact mode stalled inside the noise floor
                stop = "noise-floor"

        trace.append(TraceRecord(
            iteration=k,
            objective=value,
            grad_norm=grad_norm,
            oracle_calls=calls,
            elapsed=time.perf_counter() - started,
            step=h,
            distance_sq=dist_sq,
            factor=rates.factor(grad_norm, method_bound),
            product_bound=prod,
            geometric_bound=geo,
            inexact_bound=inexact,
            bound=bound,
            certificate_residual=residual,
        ))
        if stop:
            result.status = stop
            result.x = x
            return result
        fac = rates.factor(grad_norm, "product")
        if fac is not None:
            rates.product *= max(fac, 0.0)
        x = x_next
        result.x = x
        if keep_iterates:
            result.iterates.append(x.copy())
        k += 1


def solve_polyak(problem: ProblemSpec, sharpness: SharpnessSpec | None = None,
                 config: SolverConfig | None = None, *,
                 start: Vector | None = None,
                 keep_iterates: bool = False) -> SolveResult:
    """Optimal-value step subgradient method.  Per step, the squared
    distance to the solution set contracts by
    1 - (alpha beta / ||g||)^2 on sharp weakly beta-quasiconvex problems."""
    f_star = problem.optimal_value
    if f_star is None:
        raise MissingConstantError("the optimal-value step needs a declared optimum")
    sharpness = sharpness or SharpnessSpec()
    beta = sharpness.weak_quasiconvexity

    def update(x, value, grad):
        return _polyak_update(x, value, grad, problem.feasible_set, beta, f_star)

    return _run(problem, sharpness, config, update,
                scale=problem.lipschitz_constant, inexactness=None,
                start=start, method_bound="product", beta=beta,
                keep_iterates=keep_iterates)


def solve_normalized(problem: ProblemSpec, sharpness: SharpnessSpec | None = None,
                     config: SolverConfig | None = None, *,
                     scale_constant: float | None = None,
                     start: Vector | None = None,
                     localize_feasible: bool = True,
                     keep_iterates: bool = False) -> SolveResult:
    """Normalized-step subgradient method with geometric rate
    (1 - (alpha/M)^2)^k on quasiconvex sharp problems.

    The scale constant M is resolved as: explicit argument, else the
    declared Lipschitz constant, else the constructive bound from the
    function-Holder data.  With ``target_value`` set in the config the
    method runs in inexact mode (requires 2 M^2 > alpha^2) and converges
    to a noise floor of 2 (slack/alpha)^2 in squared distance.
    """
    config = config or SolverConfig()
    sharpness = sharpness or SharpnessSpec()
    scale = scale_constant
    if scale is None:
        scale = problem.lipschitz_constant
    if scale is None and problem.function_holder_constant is not None \
            and problem.holder_exponent is not None:
        scale = alignment_constant_bound(problem.function_holder_constant,
                                         problem.holder_exponent)
    if scale is None:
        raise MissingConstantError(
            "normalized steps need a scale constant (explicit, Lipschitz, "
            "or function-Holder data)")
    if scale <= 0:
        raise ValueError("scale constant must be positive")

    inexact = config.target_value is not None
    if inexact:
        target = config.target_value
        if problem.optimal_value is not None \
                and target < problem.optimal_value - ABS_TOL:
            raise ValueError("surrogate target below the declared optimum")
        alpha = sharpness.sharp_modulus
        if alpha is not None and 2.0 * scale ** 2 <= alpha ** 2:
            raise ValueError("inexact mode needs 2 M^2 > alpha^2")
        inexactness = config.inexactness
    else:
        if problem.optimal_value is None:
            raise MissingConstantError(
                "normalized steps need the optimal value (or a surrogate target)")
        target = problem.optimal_value
        inexactness = None

    feasible = problem.feasible_set
    if (localize_feasible and problem.holder_exponent is not None
            and problem.holder_exponent < 1.0
            and problem.function_holder_constant is not None
            and sharpness.sharp_modulus is not None):
        anchor = np.asarray(start, dtype=float) if start is not None \
            else min_norm_point(feasible)
        radius = localization_radius(problem.function_holder_constant,
                                     sharpness.sharp_modulus,
                                     problem.holder_exponent)
        feasible = localize(feasible, anchor, radius)

    def update(x, value, grad):
        return _normalized_update(x, value, grad, feasible, scale, target)

    method_bound = "inexact" if inexact else "geometric"
    result = _run(problem, sharpness, config, update,
                  scale=scale, inexactness=inexactness,
                  start=start, method_bound=method_bound, beta=1.0,
                  keep_iterates=keep_iterates)
    result.constants["target_value"] = target
    if inexact:
        result.constants["inexactness"] = inexactness
    return result


def product_certificate(trace, sharp_modulus: float, weak_quasiconvexity: float,
                        tol: float = 1e-9) -> tuple[float, bool]:
    """Evaluate the adaptive product bound
    prod_i (1 - (alpha beta / ||g_i||)^2) dist0^2 along a trace and check
    the observed squared distances against it.

    Returns (final bound, holds).  Raises when some factor is negative,
    which contradicts sharpness (the declared modulus is too large).
    """
    rows = [r for r in trace if r.distance_sq is not None]
    if not rows:
        raise ValueError("trace carries no distance data")
    bound = rows[0].distance_sq
    holds = True
    for prev, cur in zip(rows, rows[1:]):
        if prev.grad_norm is None or prev.grad_norm == 0.0:
            factor = 0.0
        else:
            factor = 1.0 - (sharp_modulus * weak_quasiconvexity / prev.grad_norm) ** 2
        if factor < 0.0:
            raise ValueError(
                "negative contraction factor: subgradient norm below "
                "alpha * beta contradicts the declared constants")
        bound *= factor
        if cur.distance_sq > bound + tol:
            holds = False
    return bound, holds
