"""Adaptive similar-triangles method: formula oracles, hand-run steps,
bound validity, and the stopping rule."""

import math

import numpy as np
import pytest

from sharpopt import (
    IterationLimitError,
    MissingConstantError,
    ProblemSpec,
    SolverConfig,
    complexity_estimate,
    coupling_root,
    descent_test,
    gap_bound,
    norm_shifted_ball,
    run_adaptive,
    slack_schedule,
    smoothed_constant,
    solve_relative,
    stop_criterion,
    validate_trace,
)
from sharpopt.geometry import WholeSpace
from sharpopt.triangles import TriangleState, _advance


def half_square_problem():
    """f(t) = t^2 / 2 on the line: gradient t, smoothness constant 1."""

    def oracle(x):
        return 0.5 * float(x[0] ** 2), x.copy()

    return ProblemSpec(objective=oracle, feasible_set=WholeSpace(1),
                       optimal_value=0.0)


class TestCouplingRoot:
    def test_examples(self):
        assert coupling_root(0.0, 1.0) == pytest.approx(1.0)
        assert coupling_root(0.0, 4.0) == pytest.approx(0.25)
        assert coupling_root(2.0, 1.0) == pytest.approx(2.0)

    def test_against_polynomial_roots(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            acc = float(rng.uniform(0.0, 50.0))
            local = float(rng.uniform(0.01, 50.0))
            root = coupling_root(acc, local)
            # oracle: numpy's general polynomial solver on L a^2 - a - A
            roots = np.roots([local, -1.0, -acc])
            assert root == pytest.approx(float(np.max(roots.real)), rel=1e-9)
            assert local * root ** 2 == pytest.approx(acc + root, rel=1e-9)

    def test_rejects_nonpositive_constant(self):
        with pytest.raises(ValueError):
            coupling_root(1.0, 0.0)


class TestDescentTest:
    def test_equal_points(self):
        x = np.array([1.0])
        assert descent_test(2.0, 2.0, np.array([5.0]), x, x, 3.0, 0.0)

    def test_quadratic_accepts_unit_constant(self):
        # f(t) = t^2/2, anchor 0, candidate 1: 0.5 <= 0 + 0 + 0.5
        assert descent_test(0.5, 0.0, np.array([0.0]),
                            np.array([1.0]), np.array([0.0]), 1.0, 0.0)

    def test_quadratic_rejects_half_constant(self):
        assert not descent_test(0.5, 0.0, np.array([0.0]),
                                np.array([1.0]), np.array([0.0]), 0.5, 0.0)


class TestHandRunSteps:
    def test_accepted_first_candidate(self):
        """Candidate constant 1 from x0 = 1: coupling 1, iterate to 0,
        next candidate halves."""
        problem = half_square_problem()
        state = TriangleState(iteration=0, x=np.array([1.0]), u=np.array([1.0]),
                              accumulator=0.0, candidate_constant=1.0)
        info = _advance(state, lambda z: problem.eval(z),
                        problem.feasible_set, lambda a, acc, fy: 0.0, 10)
        assert info["coupling"] == pytest.approx(1.0)
        assert info["local_constant"] == 1.0
        assert info["backtracks"] == 0
        assert state.accumulator == pytest.approx(1.0)
        assert state.x[0] == pytest.approx(0.0)
        assert state.candidate_constant == pytest.approx(0.5)

    def test_rejection_doubles_candidate(self):
        """Candidate 0.25 overshoots (coupling 4, iterate -3, model fails);
        doubling twice lands on constant 1."""
        problem = half_square_problem()
        # the first trial's arithmetic, checked by hand
        assert coupling_root(0.0, 0.25) == pytest.approx(4.0)
        assert not descent_test(4.5, 0.5, np.array([1.0]),
                                np.array([-3.0]), np.array([1.0]), 0.25, 0.0)
        state = TriangleState(iteration=0, x=np.array([1.0]), u=np.array([1.0]),
                              accumulator=0.0, candidate_constant=0.25)
        info = _advance(state, lambda z: problem.eval(z),
                        problem.feasible_set, lambda a, acc, fy: 0.0, 10)
        assert info["backtracks"] == 2
        assert info["local_constant"] == pytest.approx(1.0)
        assert state.x[0] == pytest.approx(0.0)

    def test_stationary_point_is_fixed(self):
        problem = half_square_problem()
        state = TriangleState(iteration=0, x=np.array([0.0]), u=np.array([0.0]),
                              accumulator=0.0, candidate_constant=1.0)
        _advance(state, lambda z: problem.eval(z), problem.feasible_set,
                 lambda a, acc, fy: 0.0, 10)
        assert state.x[0] == 0.0
        assert state.u[0] == 0.0

    def test_backtrack_limit_raises(self):
        """A slack-free model on a nonsmooth objective cannot be satisfied
        near the kink: the doubling loop must give up."""
        from sharpopt.triangles import BacktrackLimitError

        def oracle(x):
            return abs(float(x[0])), np.sign(x)

        problem = ProblemSpec(objective=oracle, feasible_set=WholeSpace(1))
        state = TriangleState(iteration=0, x=np.array([1e-3]), u=np.array([1e-3]),
                              accumulator=0.0, candidate_constant=1.0)
        with pytest.raises(BacktrackLimitError):
            _advance(state, lambda z: problem.eval(z), problem.feasible_set,
                     lambda a, acc, fy: 0.0, 8)


class TestSchedulesAndBounds:
    def test_slack_schedule_examples(self):
        assert slack_schedule(1.0, 1.0, 3.0, 3.0) == pytest.approx(0.25)
        assert slack_schedule(1.0, 0.0, 1.0, 2.0) == 0.0
        assert slack_schedule(2.0, 0.3, 1.0, 2.0) == pytest.approx(0.075)

    def test_gap_bound_examples(self):
        assert gap_bound(1.0, 1.0, 0.0) == pytest.approx(1.0)
        assert gap_bound(1.0, 100.0, 0.0) == pytest.approx(0.01)
        assert gap_bound(1.0, 2.0, 0.5) == pytest.approx(1.0)

    def test_gap_bound_rejects_zero_accumulator(self):
        with pytest.raises(ValueError):
            gap_bound(1.0, 0.0, 0.0)

    def test_stop_criterion_examples(self):
        assert stop_criterion(10.0, 1.0, 0.1)
        assert not stop_criterion(0.0, 1.0, 0.1)
        assert stop_criterion(11.0, 1.0, 0.1)

    def test_complexity_estimate_examples(self):
        assert complexity_estimate(1.0, 0.1, 1.0, 1.0) == 9
        assert complexity_estimate(1.0, 0.1, 0.0, 1.0) == 400
        assert complexity_estimate(1.0, 100.0, 1.0, 1.0) == 1

    def test_complexity_estimate_against_direct_formula(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            radius = float(rng.uniform(0.5, 5.0))
            eps = float(rng.uniform(0.01, 1.0))
            nu = float(rng.uniform(0.0, 1.0))
            const = float(rng.uniform(0.1, 4.0))
            # independent recomputation straight from the displayed form
            expected = (eps ** (-2.0 / (1.0 + 3.0 * nu))
                        * (radius * 2.0 ** ((2.0 + 4.0 * nu) / (1.0 + nu))
                           * const ** (2.0 / (1.0 + nu)))
                        ** ((1.0 + nu) / (1.0 + 3.0 * nu)))
            assert complexity_estimate(radius, eps, nu, const) \
                == max(1, math.ceil(expected))

    def test_smoothed_constant_examples(self):
        assert smoothed_constant(7.0, 1.0, 0.123) == pytest.approx(7.0)
        assert smoothed_constant(2.0, 0.0, 1.0) == pytest.approx(2.0)
        assert smoothed_constant(1.0, 0.0, 0.5) == pytest.approx(1.0)

    def test_smoothed_constant_rejects_zero_slack(self):
        with pytest.raises(ValueError):
            smoothed_constant(1.0, 0.5, 0.0)


class TestSolveRelative:
    @pytest.mark.parametrize("gamma", [0.5, 0.1, 0.01])
    def test_relative_accuracy_guarantee(self, gamma):
        prob = norm_shifted_ball(32)
        result = solve_relative(prob.spec, gamma,
                                solution_set=prob.sharpness.solution_set)
        assert result.status == "stop-criterion"
        assert result.objective <= (1.0 + gamma) * 1.0 + 1e-9
        radius = result.constants["radius"]
        epsilon = result.constants["epsilon"]
        assert result.objective - 1.0 <= 1.5 * epsilon * radius + 1e-9
        validate_trace(result.trace)

    def test_bound_holds_at_every_iteration(self):
        prob = norm_shifted_ball(32)
        result = solve_relative(prob.spec, 0.05)
        for rec in result.trace[1:]:
            assert rec.certificate_residual is not None
            assert rec.certificate_residual >= -1e-7

    def test_accepted_step_identities(self):
        prob = norm_shifted_ball(16)
        result = solve_relative(prob.spec, 0.02)
        prev_acc = 0.0
        for rec in result.trace[1:]:
            # accumulator recurrence and the quadratic-root identity
            assert rec.accumulator == pytest.approx(prev_acc + rec.coupling,
                                                    rel=1e-12)
            assert rec.local_constant * rec.coupling ** 2 \
                == pytest.approx(rec.accumulator, rel=1e-9)
            prev_acc = rec.accumulator

    def test_constant_halves_after_acceptance(self):
        prob = norm_shifted_ball(16)
        result = solve_relative(prob.spec, 0.02)
        rows = result.trace[1:]
        for prev, cur in zip(rows, rows[1:]):
            # next accepted constant is the halved candidate re-doubled some
            # number of times
            ratio = cur.local_constant / (prev.local_constant / 2.0)
            assert ratio >= 1.0 - 1e-12
            assert math.log2(ratio) == pytest.approx(round(math.log2(ratio)),
                                                     abs=1e-9)

    def test_stop_exit_within_complexity_estimate(self):
        prob = norm_shifted_ball(64)
        result = solve_relative(prob.spec, 0.1)
        budget = complexity_estimate(result.constants["radius"],
                                     result.constants["epsilon"], 1.0, 1.0)
        assert result.iterations <= budget

    def test_loose_accuracy_exits_fast_with_tight_bound(self):
        prob = norm_shifted_ball(16)
        result = solve_relative(prob.spec, 10.0)
        assert result.status == "stop-criterion"
        assert result.iterations <= 10
        radius = result.constants["radius"]
        epsilon = result.constants["epsilon"]
        assert result.trace[-1].bound <= 1.5 * epsilon * radius + 1e-9

    def test_missing_floor_raises(self):
        problem = half_square_problem()
        with pytest.raises(MissingConstantError):
            solve_relative(problem, 0.1)

    def test_iteration_limit_carries_trace(self):
        prob = norm_shifted_ball(16)
        config = SolverConfig(max_iterations=2, epsilon=1e-9)
        with pytest.raises(IterationLimitError) as err:
            solve_relative(prob.spec, 0.001, config)
        assert err.value.result is not None
        assert len(err.value.result.trace) == 3

    def test_invalid_gamma(self):
        prob = norm_shifted_ball(8)
        with pytest.raises(ValueError):
            solve_relative(prob.spec, -0.5)


class TestRunAdaptive:
    def test_fixed_iterations_zero_slack(self):
        prob = norm_shifted_ball(32)
        result = run_adaptive(prob.spec, iterations=40, slack="none")
        assert result.status == "completed"
        assert result.trace[-1].iteration == 40
        bounds = [r.bound for r in result.trace[1:]]
        assert all(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:]))

    def test_slack_sum_matches_schedule(self):
        prob = norm_shifted_ball(16)
        result = solve_relative(prob.spec, 0.1)
        radius = result.constants["radius"]
        epsilon = result.constants["epsilon"]
        for rec in result.trace[1:]:
            assert rec.step_slack == pytest.approx(
                slack_schedule(radius, epsilon, rec.coupling, rec.accumulator))

    def test_stopping_mode_requires_constants(self):
        problem = half_square_problem()
        with pytest.raises(MissingConstantError):
            run_adaptive(problem, epsilon=0.1)

    def test_custom_slack_callable(self):
        prob = norm_shifted_ball(8)
        result = run_adaptive(prob.spec, iterations=5,
                              slack=lambda a, acc, fy: 1e-6)
        assert all(r.step_slack == 1e-6 for r in result.trace[1:])
