"""Adaptive similar-triangles method with backtracked local smoothness
constants, its a-posteriori error bound, and the accumulator stopping rule
that turns the bound into a relative-accuracy guarantee for convex
positively homogeneous objectives.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    IterationLimitError,
    MissingConstantError,
    ProblemSpec,
    SolveResult,
    SolverConfig,
    TraceRecord,
    Vector,
    solution_distance,
)
from .geometry import min_norm_point


class BacktrackLimitError(RuntimeError):
    """Doubling the local constant never satisfied the descent model.

    Signals violated smoothness assumptions or a too-small slack floor.
    The state at failure is attached as ``state``.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


def coupling_root(accumulator: float, local_constant: float) -> float:
    """Largest root a of  accumulator + a = local_constant * a**2."""
    if local_constant <= 0:
        raise ValueError("local constant must be positive")
    if accumulator < 0:
        raise ValueError("accumulator must be nonnegative")
    return (1.0 + math.sqrt(1.0 + 4.0 * local_constant * accumulator)) \
        / (2.0 * local_constant)


def descent_test(f_candidate: float, f_anchor: float, grad_anchor: Vector,
                 candidate: Vector, anchor: Vector,
                 local_constant: float, slack: float) -> bool:
    """Quadratic upper-model check
    f(x) <= f(y) + <g(y), x - y> + (L/2) ||x - y||^2 + slack."""
    diff = np.asarray(candidate, dtype=float) - np.asarray(anchor, dtype=float)
    model = (f_anchor + float(np.dot(grad_anchor, diff))
             + 0.5 * local_constant * float(np.dot(diff, diff)) + slack)
    return f_candidate <= model


def slack_schedule(radius: float, epsilon: float, coupling: float,
                   accumulator: float) -> float:
    """Largest per-step model slack that still preserves the
    relative-accuracy guarantee at the stopping rule."""
    return radius * epsilon * coupling / (4.0 * accumulator)


def gap_bound(radius: float, accumulator: float,
              weighted_slack_sum: float) -> float:
    """A-posteriori optimality-gap bound
    radius^2 / A + 2 * sum_k slack_k A_k / A."""
    if accumulator <= 0:
        raise ValueError("accumulator must be positive")
    return radius * radius / accumulator + 2.0 * weighted_slack_sum / accumulator


def stop_criterion(accumulator: float, radius: float, epsilon: float) -> bool:
    """Terminate once the accumulator reaches radius / epsilon."""
    return accumulator >= radius / epsilon


def complexity_estimate(radius: float, epsilon: float, exponent: float,
                        gradient_holder: float) -> int:
    """Worst-case iteration count for the stopping rule to fire, given a
    Holder-smooth gradient with the stated exponent and constant."""
    if not 0.0 <= exponent <= 1.0:
        raise ValueError("exponent must lie in [0, 1]")
    if min(radius, epsilon, gradient_holder) <= 0:
        raise ValueError("radius, epsilon and constant must be positive")
    power = (1.0 + exponent) / (1.0 + 3.0 * exponent)
    inner = (radius * 2.0 ** ((2.0 + 4.0 * exponent) / (1.0 + exponent))
             * gradient_holder ** (2.0 / (1.0 + exponent)))
    value = epsilon ** (-2.0 / (1.0 + 3.0 * exponent)) * inner ** power
    return max(1, math.ceil(value))


def smoothed_constant(gradient_holder: float, exponent: float,
                      slack: float) -> float:
    """Effective quadratic-model constant induced by a Holder gradient when
    a model slack is allowed.  Diagnostic only; the adaptive loop never
    uses it."""
    if slack <= 0:
        raise ValueError("slack must be positive")
    if not 0.0 <= exponent <= 1.0:
        raise ValueError("exponent must lie in [0, 1]")
    if gradient_holder <= 0:
        raise ValueError("constant must be positive")
    ratio = (1.0 - exponent) / (1.0 + exponent)
    return gradient_holder * (gradient_holder / (2.0 * slack) * ratio) ** ratio


@dataclass
class TriangleState:
    """Coupled iterate triple and accumulator of the similar-triangles loop."""

    iteration: int
    x: Vector
    u: Vector
    accumulator: float
    candidate_constant: float       # next local-constant guess (halved on accept)
    weighted_slack_sum: float = 0.0


def _advance(state: TriangleState, oracle, feasible_set, slack_fn,
             max_backtracks: int):
    """One accepted step: backtrack the local constant until the quadratic
    model holds, doubling on rejection and halving the next guess."""
    local = state.candidate_constant
    for backtracks in range(max_backtracks + 1):
        alpha = coupling_root(state.accumulator, local)
        acc_next = state.accumulator + alpha
        y = (alpha * state.u + state.accumulator * state.x) / acc_next
        f_y, g_y = oracle(y)
        u_next = feasible_set.project(state.u - alpha * g_y)
        x_next = (alpha * u_next + state.accumulator * state.x) / acc_next
        f_x, _ = oracle(x_next)
        slack = slack_fn(alpha, acc_next, f_y)
        if descent_test(f_x, f_y, g_y, x_next, y, local, slack):
            state.iteration += 1
            state.x = x_next
            state.u = u_next
            state.accumulator = acc_next
            state.candidate_constant = local / 2.0
            state.weighted_slack_sum += slack * acc_next
            return {
                "objective": f_x,
                "grad_norm": float(np.linalg.norm(g_y)),
                "local_constant": local,
                "coupling": alpha,
                "slack": slack,
                "backtracks": backtracks,
            }
        local *= 2.0
    raise BacktrackLimitError(
        f"descent model rejected after {max_backtracks} doublings "
        f"(constant reached {local:g})", state=state)


def run_adaptive(problem: ProblemSpec, config: SolverConfig | None = None, *,
                 radius: float | None = None,
                 epsilon: float | None = None,
                 iterations: int | None = None,
                 slack: "str | Callable[[float, float, float], float]" = "none",
                 start: Vector | None = None,
                 solution_set=None) -> SolveResult:
    """Drive the similar-triangles loop.

    With ``iterations`` given, runs exactly that many accepted steps.
    Otherwise runs until the accumulator stopping rule fires (needs
    ``radius`` and ``epsilon``), raising :class:`IterationLimitError` if
    the budget in ``config`` runs out first.

    ``slack`` selects the per-step model slack: ``"none"`` (zero),
    ``"machine"`` (a few ulps of the anchor value, absorbing oracle
    rounding at large dimension), ``"stopping-rule"`` (the largest
    schedule compatible with the relative-accuracy guarantee), or a
    callable ``(coupling, accumulator, anchor_value) -> slack``.
    """
    config = config or SolverConfig()
    calls = 0

    def oracle(z):
        nonlocal calls
        calls += 1
        return problem.eval(z)

    x0 = np.asarray(start, dtype=float) if start is not None \
        else min_norm_point(problem.feasible_set)
    f0, g0 = oracle(x0)

    if radius is None:
        if problem.homogeneity_floor is not None:
            radius = 2.0 * f0 / problem.homogeneity_floor
        elif iterations is None or slack == "stopping-rule":
            raise MissingConstantError(
                "radius is required (declare a homogeneity floor or pass one)")

    eps_unit = float(np.finfo(float).eps)
    if slack == "none":
        slack_fn = lambda alpha, acc, f_y: 0.0
    elif slack == "machine":
        slack_fn = lambda alpha, acc, f_y: 32.0 * eps_unit * max(1.0, abs(f_y))
    elif slack == "stopping-rule":
        if radius is None or epsilon is None:
            raise MissingConstantError("the slack schedule needs radius and epsilon")
        slack_fn = lambda alpha, acc, f_y: slack_schedule(radius, epsilon, alpha, acc)
    elif callable(slack):
        slack_fn = slack
    else:
        raise ValueError(f"unknown slack mode {slack!r}")

    if iterations is None and (radius is None or epsilon is None):
        raise MissingConstantError("stopping rule needs radius and epsilon")

    state = TriangleState(
        iteration=0, x=x0, u=x0.copy(), accumulator=0.0,
        candidate_constant=config.initial_constant / 2.0)
    f_star = problem.optimal_value
    started = time.perf_counter()

    def record(objective, grad_norm, info=None):
        bound = residual = None
        if radius is not None and state.accumulator > 0:
            bound = gap_bound(radius, state.accumulator, state.weighted_slack_sum)
            if f_star is not None:
                residual = bound - (objective - f_star)
        dist_sq = None
        if solution_set is not None:
            dist_sq = solution_distance(solution_set, state.x) ** 2
        return TraceRecord(
            iteration=state.iteration,
            objective=objective,
            grad_norm=grad_norm,
            oracle_calls=calls,
            elapsed=time.perf_counter() - started,
            local_constant=info["local_constant"] if info else None,
            coupling=info["coupling"] if info else None,
            accumulator=state.accumulator if info else None,
            step_slack=info["slack"] if info else None,
            backtracks=info["backtracks"] if info else None,
            distance_sq=dist_sq,
            bound=bound,
            certificate_residual=residual,
        )

    trace = [record(f0, float(np.linalg.norm(g0)))]
    constants = {"radius": radius, "epsilon": epsilon,
                 "initial_constant": config.initial_constant}
    result = SolveResult(x=state.x, trace=trace, constants=constants)

    budget = iterations if iterations is not None else config.max_iterations
    while True:
        if iterations is not None and state.iteration >= iterations:
            result.status = "completed"
            break
        if iterations is None and stop_criterion(state.accumulator, radius, epsilon):
            result.status = "stop-criterion"
            break
        if state.iteration >= budget:
            result.status = "iteration-limit"
            result.x = state.x
            raise IterationLimitError(
                f"stopping rule not reached within {budget} iterations",
                result=result)
        info = _advance(state, oracle, problem.feasible_set, slack_fn,
                        config.max_backtracks_per_step)
        trace.append(record(info["objective"], info["grad_norm"], info))
        result.x = state.x

    return result


def solve_relative(problem: ProblemSpec, gamma: float,
                   config: SolverConfig | None = None, *,
                   solution_set=None) -> SolveResult:
    """Minimize a convex positively homogeneous objective to relative
    accuracy ``gamma``.

    Starts at the minimal-norm feasible point, uses the maximal slack
    schedule, and stops once the accumulator reaches radius / epsilon with
    epsilon = gamma * floor / 3.  The exit gap is at most
    1.5 * epsilon * radius: with the default radius 2 f(x0) / floor that
    is gamma * f(x0), and at most gamma * f* (hence a (1 + gamma) f*
    guarantee) whenever the radius is bounded by 2 f* / floor.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    config = config or SolverConfig()
    floor = problem.homogeneity_floor
    if floor is None:
        raise MissingConstantError(
            "relative-accuracy mode needs a declared homogeneity floor")
    epsilon = config.epsilon if config.epsilon is not None else gamma * floor / 3.0
    result = run_adaptive(
        problem, config,
        radius=config.radius_estimate,
        epsilon=epsilon,
        slack="stopping-rule",
        solution_set=solution_set,
    )
    result.constants.update({"gamma": gamma, "homogeneity_floor": floor})
    return result
