"""Built-in test problems with analytic oracles, sharpening transforms,
and sampling-based oracle validation.

Each built-in declares every regularity constant that is analytically
known for it (optimal value, Lipschitz/Holder constants, homogeneity
floor, sharpness modulus, solution set) so that runs can be checked
against the corresponding theoretical guarantees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    MissingConstantError,
    ProblemSpec,
    SharpnessSpec,
    Vector,
    solution_distance,
)
from .geometry import Ball, Box, SetSpec, WholeSpace, min_norm_point

#: Points closer than this to a kink are not offered as smooth points.
SMOOTH_MARGIN = 1e-3


@dataclass(frozen=True)
class BuiltinProblem:
    """A problem spec bundled with its sharpness data and a predicate
    marking points where the objective is differentiable."""

    name: str
    spec: ProblemSpec
    sharpness: SharpnessSpec | None = None
    smooth_predicate: Callable[[Vector], bool] | None = None

    def eval(self, x: Vector) -> tuple[float, Vector]:
        return self.spec.eval(x)

    def smooth_at(self, x: Vector) -> bool:
        if self.smooth_predicate is None:
            return True
        return bool(self.smooth_predicate(np.asarray(x, dtype=float)))


def norm_shifted_ball(dimension: int = 1000,
                      direction: Vector | None = None) -> BuiltinProblem:
    """Euclidean norm minimized over a unit ball centered at 2p, ||p|| = 1.

    The minimum is the near point p of the ball with value 1; the norm is
    1-Lipschitz and its gradient is 1-Lipschitz on the ball (which stays
    at distance >= 1 from the origin).
    """
    if direction is None:
        direction = np.ones(dimension)
    p = np.asarray(direction, dtype=float)
    p = p / np.linalg.norm(p)

    def oracle(x):
        nrm = float(np.linalg.norm(x))
        if nrm == 0.0:
            return 0.0, np.zeros_like(x)
        return nrm, x / nrm

    spec = ProblemSpec(
        objective=oracle,
        feasible_set=Ball(center=2.0 * p, radius=1.0),
        holder_exponent=1.0,
        gradient_holder_constant=1.0,
        function_holder_constant=1.0,
        lipschitz_constant=1.0,
        homogeneity_floor=1.0,
        optimal_value=1.0,
    )
    sharp = SharpnessSpec(solution_set=[p.copy()])
    return BuiltinProblem("norm-shifted-ball", spec, sharp,
                          smooth_predicate=lambda x: np.linalg.norm(x) > SMOOTH_MARGIN)


def linear_residual(matrix, solution, feasible: SetSpec | None = None) -> BuiltinProblem:
    """Residual norm ||A x - b|| with b = A x*, so the optimum is x* with
    value 0.  Sharp with modulus sigma_min(A); Lipschitz with sigma_max(A)."""
    A = np.asarray(matrix, dtype=float)
    x_star = np.asarray(solution, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[1] != x_star.size:
        raise ValueError("solution dimension does not match the matrix")
    b = A @ x_star
    singular = np.linalg.svd(A, compute_uv=False)
    sigma_max = float(singular[0])
    sigma_min = float(singular[-1])
    if sigma_min <= 0:
        raise ValueError("matrix must be nonsingular")

    def oracle(x):
        r = A @ x - b
        nrm = float(np.linalg.norm(r))
        if nrm == 0.0:
            return 0.0, np.zeros_like(x)
        return nrm, (A.T @ r) / nrm

    spec = ProblemSpec(
        objective=oracle,
        feasible_set=feasible or WholeSpace(x_star.size),
        holder_exponent=1.0,
        function_holder_constant=sigma_max,
        lipschitz_constant=sigma_max,
        optimal_value=0.0,
    )
    sharp = SharpnessSpec(sharp_modulus=sigma_min, growth_modulus=sigma_min,
                          solution_set=[x_star.copy()])

    def smooth(x, _A=A, _b=b):
        return float(np.linalg.norm(_A @ x - _b)) > SMOOTH_MARGIN

    return BuiltinProblem("linear-residual", spec, sharp, smooth_predicate=smooth)


def generate_linear_residual(dimension: int, condition: float = 1.0,
                             seed: int = 0,
                             feasible: SetSpec | None = None) -> BuiltinProblem:
    """Seeded residual-norm instance with prescribed condition number.

    Singular values are spread linearly over [1, condition] and the
    diagonal is composed with a random rotation; seed 0 keeps the rotation
    at the identity so small instances have exactly the diagonal matrix.
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if condition < 1:
        raise ValueError("condition must be >= 1")
    rng = np.random.default_rng(seed)
    singular = np.linspace(1.0, float(condition), dimension)
    if seed == 0:
        rotation = np.eye(dimension)
    else:
        rotation, _ = np.linalg.qr(rng.standard_normal((dimension, dimension)))
    matrix = rotation @ np.diag(singular)
    solution = rng.standard_normal(dimension)
    return linear_residual(matrix, solution, feasible)


def distance_to_set(target: SetSpec, feasible: SetSpec | None = None) -> BuiltinProblem:
    """Distance to a closed convex target set; the target is the solution
    set, the optimal value is 0, and the sharpness modulus is exactly 1."""

    def oracle(x):
        p = target.project(x)
        d = float(np.linalg.norm(x - p))
        if d == 0.0:
            return 0.0, np.zeros_like(x)
        return d, (x - p) / d

    spec = ProblemSpec(
        objective=oracle,
        feasible_set=feasible or WholeSpace(target.dimension),
        holder_exponent=1.0,
        function_holder_constant=1.0,
        lipschitz_constant=1.0,
        optimal_value=0.0,
    )
    sharp = SharpnessSpec(sharp_modulus=1.0, growth_modulus=1.0, solution_set=target)

    def smooth(x):
        return float(np.linalg.norm(x - target.project(x))) > SMOOTH_MARGIN

    return BuiltinProblem("distance-to-set", spec, sharp, smooth_predicate=smooth)


def weakly_quasiconvex_scalar(dimension: int = 1) -> BuiltinProblem:
    """Nonconvex scalar model |t|(1 - exp(-|t|)) on the first coordinate.

    It is weakly 1-quasiconvex with minimizer 0; the derivative magnitude
    peaks at 1 + exp(-2), which is its Lipschitz constant.
    """

    def oracle(x):
        t = float(x[0])
        a = abs(t)
        value = a * (1.0 - math.exp(-a))
        grad = np.zeros_like(x)
        if t != 0.0:
            grad[0] = math.copysign(1.0 - math.exp(-a) + a * math.exp(-a), t)
        return value, grad

    lip = 1.0 + math.exp(-2.0)
    spec = ProblemSpec(
        objective=oracle,
        feasible_set=WholeSpace(dimension),
        holder_exponent=1.0,
        function_holder_constant=lip,
        lipschitz_constant=lip,
        optimal_value=0.0,
    )
    sharp = SharpnessSpec(weak_quasiconvexity=1.0,
                          solution_set=[np.zeros(dimension)])
    return BuiltinProblem("weakly-quasiconvex-scalar", spec, sharp,
                          smooth_predicate=lambda x: abs(x[0]) > SMOOTH_MARGIN)


def power_norm(exponent: float, center: Vector,
               feasible: SetSpec | None = None) -> BuiltinProblem:
    """||x - c||**p for p >= 1: growth of order p with modulus exactly 1."""
    if exponent < 1:
        raise ValueError("exponent must be >= 1")
    c = np.asarray(center, dtype=float)
    p = float(exponent)

    def oracle(x):
        d = x - c
        nrm = float(np.linalg.norm(d))
        if nrm == 0.0:
            return 0.0, np.zeros_like(x)
        return nrm ** p, p * nrm ** (p - 2.0) * d

    spec = ProblemSpec(
        objective=oracle,
        feasible_set=feasible or WholeSpace(c.size),
        holder_exponent=1.0 if p == 1.0 else None,
        function_holder_constant=1.0 if p == 1.0 else None,
        lipschitz_constant=1.0 if p == 1.0 else None,
        optimal_value=0.0,
    )
    sharp = SharpnessSpec(
        sharp_modulus=1.0 if p == 1.0 else None,
        growth_order=p,
        growth_modulus=1.0,
        solution_set=[c.copy()],
    )

    def smooth(x):
        return p >= 2.0 or float(np.linalg.norm(x - c)) > SMOOTH_MARGIN

    return BuiltinProblem("power-norm", spec, sharp, smooth_predicate=smooth)


def scaled_abs_sum(weights, feasible: SetSpec | None = None) -> BuiltinProblem:
    """Weighted absolute-coordinate sum  f(x) = sum_i w_i |x_i|, w_i > 0.

    Convex, positively homogeneous of degree 1, with homogeneity floor and
    sharpness modulus min(w) and Lipschitz constant ||w||.  The feasible
    set must be a box or the whole space so the minimizer (the coordinate
    clamp of the origin) is analytic.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w <= 0):
        raise ValueError("weights must be a vector of positive reals")
    feasible = feasible or WholeSpace(w.size)
    if isinstance(feasible, Box):
        x_star = np.clip(np.zeros(w.size), feasible.lower, feasible.upper)
    elif isinstance(feasible, WholeSpace):
        x_star = np.zeros(w.size)
    else:
        raise ValueError("scaled_abs_sum supports box or whole-space feasible sets")
    if feasible.dimension != w.size:
        raise ValueError("feasible set dimension does not match the weights")
    f_star = float(np.dot(w, np.abs(x_star)))

    def oracle(x):
        return float(np.dot(w, np.abs(x))), w * np.sign(x)

    spec = ProblemSpec(
        objective=oracle,
        feasible_set=feasible,
        holder_exponent=1.0,
        function_holder_constant=float(np.linalg.norm(w)),
        lipschitz_constant=float(np.linalg.norm(w)),
        homogeneity_floor=float(np.min(w)),
        optimal_value=f_star,
    )
    sharp = SharpnessSpec(sharp_modulus=float(np.min(w)),
                          growth_modulus=float(np.min(w)),
                          solution_set=[x_star])
    return BuiltinProblem("scaled-abs-sum", spec, sharp,
                          smooth_predicate=lambda x: np.min(np.abs(x)) > SMOOTH_MARGIN)


# --- sharpening transforms ---

def sharpen_power(problem: BuiltinProblem, order: float) -> BuiltinProblem:
    """Raise the optimality gap to the power 1/order.

    A problem growing like mu * dist**order turns into one with a sharp
    (order-1) minimum of modulus mu**(1/order) and optimal value 0.
    Quasiconvexity is preserved, and a Holder exponent nu becomes
    nu/order.  Requires a declared optimal value and matching growth data.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1.0:
        return problem
    f_star = problem.spec.optimal_value
    if f_star is None:
        raise MissingConstantError("sharpening requires a declared optimal value")
    sharp = problem.sharpness
    if sharp is None or sharp.growth_modulus is None:
        raise MissingConstantError("sharpening requires a declared growth modulus")
    if not math.isclose(sharp.growth_order, order, rel_tol=1e-12):
        raise ValueError(
            f"growth order {sharp.growth_order} does not match transform order {order}")

    inner = problem.spec.objective
    inv = 1.0 / order

    def oracle(x):
        value, grad = inner(x)
        gap = value - f_star
        if gap <= 0.0:
            return 0.0, np.zeros_like(np.asarray(grad))
        return gap ** inv, (inv * gap ** (inv - 1.0)) * grad

    # Holder data of the wrapped objective: |a^(1/p) - b^(1/p)| <= |a-b|^(1/p)
    # turns (nu, C) into (nu/p, C^(1/p)); plain Lipschitz counts as nu = 1.
    base_exp = None
    base_const = None
    if (problem.spec.holder_exponent is not None
            and problem.spec.function_holder_constant is not None):
        base_exp = problem.spec.holder_exponent
        base_const = problem.spec.function_holder_constant
    elif problem.spec.lipschitz_constant is not None:
        base_exp = 1.0
        base_const = problem.spec.lipschitz_constant

    spec = ProblemSpec(
        objective=oracle,
        feasible_set=problem.spec.feasible_set,
        holder_exponent=None if base_exp is None else base_exp / order,
        function_holder_constant=None if base_const is None else base_const ** inv,
        optimal_value=0.0,
    )
    new_sharp = SharpnessSpec(
        sharp_modulus=sharp.growth_modulus ** inv,
        weak_quasiconvexity=sharp.weak_quasiconvexity,
        growth_order=1.0,
        growth_modulus=sharp.growth_modulus ** inv,
        solution_set=sharp.solution_set,
    )

    def smooth(x):
        if not problem.smooth_at(x):
            return False
        value, _ = inner(np.asarray(x, dtype=float))
        return value - f_star > SMOOTH_MARGIN

    return BuiltinProblem(f"{problem.name}-sharpened-{order:g}", spec, new_sharp,
                          smooth_predicate=smooth)


def sharpen_sqrt(problem: BuiltinProblem) -> BuiltinProblem:
    """Square-root gap transform for problems with quadratic growth."""
    return sharpen_power(problem, 2.0)


# --- oracle validation ---

def finite_diff_check(problem: BuiltinProblem, x: Vector, h: float = 1e-6) -> float:
    """Max coordinatewise error between the oracle gradient and a central
    difference of the oracle value at a smooth point."""
    x = np.asarray(x, dtype=float)
    _, grad = problem.eval(x)
    worst = 0.0
    for i in range(x.size):
        shift = np.zeros_like(x)
        shift[i] = h
        fp, _ = problem.eval(x + shift)
        fm, _ = problem.eval(x - shift)
        worst = max(worst, abs((fp - fm) / (2.0 * h) - grad[i]))
    return worst


def sample_feasible(spec: SetSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """Feasible sample cloud: Gaussians around a natural anchor, projected."""
    if isinstance(spec, Ball):
        anchor, spread = spec.center, spec.radius
    elif isinstance(spec, Box):
        anchor = 0.5 * (spec.lower + spec.upper)
        spread = 0.5 * float(np.max(spec.upper - spec.lower)) + 1e-3
    else:
        anchor = min_norm_point(spec)
        spread = 1.0 + float(np.linalg.norm(anchor))
    raw = anchor + spread * rng.standard_normal((count, spec.dimension))
    return np.stack([spec.project(row) for row in raw])


@dataclass(frozen=True)
class CertificateResult:
    name: str
    passed: bool
    worst: float          # most negative margin observed (>= -tol passes)
    detail: str = ""


def _sampled_margin(name, margins, tol=1e-9, detail=""):
    worst = float(np.min(margins)) if len(margins) else 0.0
    return CertificateResult(name, bool(worst >= -tol), worst, detail)


def check_lower_bound(problem: BuiltinProblem, count: int = 1000,
                      seed: int = 0) -> CertificateResult:
    """f(x) >= declared optimal value on sampled feasible points."""
    f_star = problem.spec.optimal_value
    if f_star is None:
        return CertificateResult("lower-bound", True, 0.0, "no optimal value declared")
    rng = np.random.default_rng(seed)
    pts = sample_feasible(problem.spec.feasible_set, rng, count)
    margins = [problem.eval(x)[0] - f_star for x in pts]
    return _sampled_margin("lower-bound", margins)


def check_homogeneity_floor(problem: BuiltinProblem, count: int = 1000,
                            seed: int = 0) -> CertificateResult:
    """f(x) >= floor * ||x|| on sampled feasible points."""
    floor = problem.spec.homogeneity_floor
    if floor is None:
        return CertificateResult("homogeneity-floor", True, 0.0, "no floor declared")
    rng = np.random.default_rng(seed)
    pts = sample_feasible(problem.spec.feasible_set, rng, count)
    margins = [problem.eval(x)[0] - floor * float(np.linalg.norm(x)) for x in pts]
    return _sampled_margin("homogeneity-floor", margins)


def check_sharpness(problem: BuiltinProblem, count: int = 1000, seed: int = 0,
                    modulus: float | None = None) -> CertificateResult:
    """f(x) - f* >= modulus * dist(x, solutions) on sampled feasible points.

    A deliberately over-declared modulus is falsified by this check.
    """
    sharp = problem.sharpness
    f_star = problem.spec.optimal_value
    modulus = modulus if modulus is not None else (sharp.sharp_modulus if sharp else None)
    if modulus is None or f_star is None or sharp is None or sharp.solution_set is None:
        return CertificateResult("sharpness", True, 0.0, "not applicable")
    rng = np.random.default_rng(seed)
    pts = sample_feasible(problem.spec.feasible_set, rng, count)
    margins = [problem.eval(x)[0] - f_star
               - modulus * solution_distance(sharp.solution_set, x)
               for x in pts]
    return _sampled_margin("sharpness", margins, detail=f"modulus={modulus:g}")


def check_weak_quasiconvexity(problem: BuiltinProblem, count: int = 1000,
                              seed: int = 0) -> CertificateResult:
    """f* >= f(x) + (1/beta) <g(x), x* - x> against the nearest solution."""
    sharp = problem.sharpness
    f_star = problem.spec.optimal_value
    if sharp is None or sharp.solution_set is None or f_star is None:
        return CertificateResult("weak-quasiconvexity", True, 0.0, "not applicable")
    beta = sharp.weak_quasiconvexity
    sols = sharp.solution_set
    if hasattr(sols, "project"):
        nearest = sols.project
    else:
        pts_list = [np.asarray(p, dtype=float) for p in sols]

        def nearest(x):
            return min(pts_list, key=lambda p: np.linalg.norm(x - p))

    rng = np.random.default_rng(seed)
    pts = sample_feasible(problem.spec.feasible_set, rng, count)
    margins = []
    for x in pts:
        value, grad = problem.eval(x)
        star = nearest(x)
        margins.append(f_star - value - float(np.dot(grad, star - x)) / beta)
    return _sampled_margin("weak-quasiconvexity", margins)


def check_quasiconvexity(problem: BuiltinProblem, count: int = 1000,
                         seed: int = 0) -> CertificateResult:
    """f(lam x + (1-lam) y) <= max(f(x), f(y)) on sampled feasible segments."""
    rng = np.random.default_rng(seed)
    pts = sample_feasible(problem.spec.feasible_set, rng, 2 * count)
    lams = rng.uniform(0.0, 1.0, count)
    margins = []
    for x, y, lam in zip(pts[:count], pts[count:], lams):
        mid = lam * x + (1.0 - lam) * y
        fx = problem.eval(x)[0]
        fy = problem.eval(y)[0]
        margins.append(max(fx, fy) - problem.eval(mid)[0])
    return _sampled_margin("quasiconvexity", margins)


def projection_certificates(spec: SetSpec, count: int = 1000, seed: int = 0,
                            tol: float = 1e-9) -> list[CertificateResult]:
    """Idempotence, nonexpansiveness, the variational inequality at the
    projection, and minimality of the minimal-norm point, on random pairs."""
    rng = np.random.default_rng(seed)
    anchor = min_norm_point(spec)
    spread = 2.0 + float(np.linalg.norm(anchor))
    raw = anchor + spread * rng.standard_normal((2 * count, spec.dimension))
    xs, ys = raw[:count], raw[count:]
    feas = np.stack([spec.project(z) for z in ys])
    x0 = min_norm_point(spec)

    idem, nonexp, vi, minim = [], [], [], []
    for x, y, z in zip(xs, ys, feas):
        px = spec.project(x)
        py = spec.project(y)
        idem.append(-float(np.linalg.norm(spec.project(px) - px)))
        nonexp.append(float(np.linalg.norm(x - y)) - float(np.linalg.norm(px - py)))
        vi.append(-float(np.dot(x - px, z - px)))
        minim.append(float(np.linalg.norm(z)) - float(np.linalg.norm(x0)))
    return [
        _sampled_margin("projection-idempotent", idem, tol),
        _sampled_margin("projection-nonexpansive", nonexp, tol),
        _sampled_margin("projection-variational", vi, tol),
        _sampled_margin("min-norm-point", minim, tol),
    ]


def check_finite_differences(problem: BuiltinProblem, count: int = 100,
                             seed: int = 0, h: float = 1e-6,
                             bound: float = 1e-5) -> CertificateResult:
    """Central-difference agreement at sampled smooth feasible points."""
    rng = np.random.default_rng(seed)
    collected = 0
    worst = 0.0
    attempts = 0
    while collected < count and attempts < 50 * count:
        batch = sample_feasible(problem.spec.feasible_set, rng, count)
        attempts += count
        for x in batch:
            if not problem.smooth_at(x):
                continue
            worst = max(worst, float(finite_diff_check(problem, x, h)))
            collected += 1
            if collected >= count:
                break
    passed = bool(collected >= count and worst <= bound)
    detail = f"max error {worst:.3e} over {collected} points"
    return CertificateResult("finite-differences", passed, bound - worst, detail)
