"""Built-in oracles, sharpening transforms, generators, and the
sampling certificates."""

import math

import numpy as np
import pytest

from sharpopt import (
    MissingConstantError,
    ProblemSpec,
    SharpnessSpec,
    finite_diff_check,
    generate_linear_residual,
    linear_residual,
    norm_shifted_ball,
    power_norm,
    scaled_abs_sum,
    sharpen_power,
    sharpen_sqrt,
    weakly_quasiconvex_scalar,
)
from sharpopt.geometry import Box, WholeSpace
from sharpopt.problems import (
    BuiltinProblem,
    check_homogeneity_floor,
    check_lower_bound,
    check_quasiconvexity,
    check_sharpness,
    check_weak_quasiconvexity,
    sample_feasible,
)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class TestOracles:
    def test_norm_shifted_ball_at_direction(self):
        prob = norm_shifted_ball(8)
        p = unit(np.ones(8))
        value, grad = prob.eval(p)
        assert value == pytest.approx(1.0)
        np.testing.assert_allclose(grad, p, atol=1e-12)

    def test_weakly_quasiconvex_at_zero(self):
        prob = weakly_quasiconvex_scalar()
        value, grad = prob.eval(np.array([0.0]))
        assert value == 0.0
        assert grad[0] == 0.0

    def test_weakly_quasiconvex_at_one(self):
        prob = weakly_quasiconvex_scalar()
        value, grad = prob.eval(np.array([1.0]))
        assert value == pytest.approx(1.0 - math.exp(-1.0))
        assert grad[0] == pytest.approx(1.0)  # (1 - e^-1) + e^-1 exactly

    def test_weakly_quasiconvex_even_symmetry(self):
        prob = weakly_quasiconvex_scalar()
        vp, gp = prob.eval(np.array([0.7]))
        vm, gm = prob.eval(np.array([-0.7]))
        assert vp == pytest.approx(vm)
        assert gp[0] == pytest.approx(-gm[0])

    def test_scaled_abs_sum_constants(self):
        prob = scaled_abs_sum([1.0, math.sqrt(3.0)],
                              Box(lower=[1.0, 1.0], upper=[2.0, 2.0]))
        assert prob.spec.lipschitz_constant == pytest.approx(2.0)
        assert prob.spec.homogeneity_floor == 1.0
        assert prob.sharpness.sharp_modulus == 1.0
        assert prob.spec.optimal_value == pytest.approx(1.0 + math.sqrt(3.0))
        value, grad = prob.eval(np.array([1.5, -2.0]))
        assert value == pytest.approx(1.5 + 2.0 * math.sqrt(3.0))
        np.testing.assert_allclose(grad, [1.0, -math.sqrt(3.0)])

    def test_scaled_abs_sum_rejects_other_sets(self):
        from sharpopt.geometry import Halfspace
        with pytest.raises(ValueError):
            scaled_abs_sum([1.0], Halfspace(normal=[1.0], offset=1.0))


class TestGenerator:
    def test_orthogonal_when_condition_one(self):
        prob = generate_linear_residual(4, condition=1.0, seed=5)
        assert prob.sharpness.sharp_modulus == pytest.approx(1.0)
        assert prob.spec.lipschitz_constant == pytest.approx(1.0)

    def test_diagonal_under_zero_seed(self):
        prob = generate_linear_residual(2, condition=2.0, seed=0)
        assert prob.sharpness.sharp_modulus == pytest.approx(1.0)
        assert prob.spec.lipschitz_constant == pytest.approx(2.0)
        # rotation is the identity: the residual of e1 offset is the first
        # singular value exactly
        x_star = prob.sharpness.solution_set[0]
        value, _ = prob.eval(x_star + np.array([1.0, 0.0]))
        assert value == pytest.approx(1.0)

    def test_solution_attains_zero(self):
        prob = generate_linear_residual(6, condition=3.0, seed=11)
        x_star = prob.sharpness.solution_set[0]
        assert prob.eval(x_star)[0] == pytest.approx(0.0, abs=1e-12)

    def test_deterministic_given_seed(self):
        a = generate_linear_residual(5, condition=4.0, seed=3)
        b = generate_linear_residual(5, condition=4.0, seed=3)
        x = np.arange(5.0)
        assert a.eval(x)[0] == b.eval(x)[0]

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_linear_residual(0)
        with pytest.raises(ValueError):
            generate_linear_residual(2, condition=0.5)


class TestTransforms:
    def test_sqrt_of_quadratic_is_abs(self):
        # f(t) = t^2 has quadratic growth with modulus 1; the square-root
        # transform is |t| with sharpness exactly 1
        quad = power_norm(2.0, [0.0])
        sharp = sharpen_sqrt(quad)
        assert sharp.sharpness.sharp_modulus == pytest.approx(1.0)
        value, grad = sharp.eval(np.array([-1.5]))
        assert value == pytest.approx(1.5)
        assert grad[0] == pytest.approx(-1.0)

    def test_sqrt_at_minimizer(self):
        sharp = sharpen_sqrt(power_norm(2.0, [0.5]))
        value, grad = sharp.eval(np.array([0.5]))
        assert value == 0.0
        assert grad[0] == 0.0

    def test_sqrt_scaled_quadratic(self):
        # f(t) = 2 t^2: growth modulus 2, so the transform is sharp with
        # modulus sqrt(2)
        def oracle(x):
            return 2.0 * float(x[0] ** 2), np.array([4.0 * x[0]])

        base = BuiltinProblem(
            "double-square",
            ProblemSpec(objective=oracle, feasible_set=WholeSpace(1),
                        optimal_value=0.0),
            SharpnessSpec(growth_order=2.0, growth_modulus=2.0,
                          solution_set=[np.zeros(1)]),
        )
        sharp = sharpen_sqrt(base)
        assert sharp.sharpness.sharp_modulus == pytest.approx(math.sqrt(2.0))
        value, _ = sharp.eval(np.array([3.0]))
        assert value == pytest.approx(math.sqrt(2.0) * 3.0)

    def test_power_transform_cubic(self):
        cube = power_norm(3.0, [0.0, 0.0])
        sharp = sharpen_power(cube, 3.0)
        assert sharp.sharpness.sharp_modulus == pytest.approx(1.0)
        value, _ = sharp.eval(np.array([3.0, 4.0]))
        assert value == pytest.approx(5.0)

    def test_power_transform_identity(self):
        prob = power_norm(1.0, [0.0])
        assert sharpen_power(prob, 1.0) is prob

    def test_transform_requires_optimum(self):
        def oracle(x):
            return float(x[0]), np.ones(1)

        base = BuiltinProblem(
            "no-opt", ProblemSpec(objective=oracle, feasible_set=WholeSpace(1)),
            SharpnessSpec(growth_order=2.0, growth_modulus=1.0))
        with pytest.raises(MissingConstantError):
            sharpen_power(base, 2.0)

    def test_transform_requires_matching_order(self):
        with pytest.raises(ValueError):
            sharpen_power(power_norm(2.0, [0.0]), 3.0)

    def test_transform_holder_inheritance(self):
        # Lipschitz base: exponent becomes 1/2 with the square-root constant
        base = linear_residual(np.eye(2), np.zeros(2))
        base = BuiltinProblem(base.name, base.spec,
                              SharpnessSpec(growth_order=2.0, growth_modulus=1.0,
                                            solution_set=[np.zeros(2)]),
                              base.smooth_predicate)
        sharp = sharpen_sqrt(base)
        assert sharp.spec.holder_exponent == pytest.approx(0.5)
        assert sharp.spec.function_holder_constant == pytest.approx(1.0)

    def test_transform_quasiconvex_on_segments(self):
        sharp = sharpen_power(power_norm(3.0, [0.2, -0.4]), 3.0)
        cert = check_quasiconvexity(sharp, count=400, seed=1)
        assert cert.passed


class TestFiniteDifferences:
    def test_norm_shifted_ball_smooth_point(self):
        prob = norm_shifted_ball(6)
        p = unit(np.ones(6))
        assert finite_diff_check(prob, 3.0 * p, h=1e-6) <= 1e-6

    def test_identity_residual(self):
        prob = linear_residual(np.eye(2), np.zeros(2))
        assert finite_diff_check(prob, np.array([3.0, 4.0]), h=1e-6) <= 1e-6

    def test_quadratic_exact(self):
        prob = power_norm(2.0, [0.0])
        assert finite_diff_check(prob, np.array([1.0]), h=1e-4) <= 1e-9

    def test_all_builtins_at_sampled_smooth_points(self):
        problems = [
            norm_shifted_ball(5),
            generate_linear_residual(4, condition=3.0, seed=2),
            weakly_quasiconvex_scalar(),
            power_norm(2.0, [0.3, 0.7]),
            scaled_abs_sum([1.0, 2.0], Box(lower=[1.0, 1.0], upper=[3.0, 3.0])),
        ]
        for prob in problems:
            rng = np.random.default_rng(0)
            checked = 0
            for x in sample_feasible(prob.spec.feasible_set, rng, 200):
                if not prob.smooth_at(x):
                    continue
                assert finite_diff_check(prob, x) <= 1e-5, prob.name
                checked += 1
                if checked >= 50:
                    break
            assert checked >= 50, prob.name


class TestSamplingCertificates:
    def test_lower_bounds_hold(self):
        for prob in (norm_shifted_ball(6),
                     generate_linear_residual(3, condition=2.0, seed=1),
                     weakly_quasiconvex_scalar(),
                     power_norm(2.0, [0.0, 1.0])):
            assert check_lower_bound(prob, count=500, seed=0).passed

    def test_homogeneity_floor_shifted_ball(self):
        cert = check_homogeneity_floor(norm_shifted_ball(6), count=500, seed=0)
        assert cert.passed

    def test_sharpness_certificates(self):
        residual = generate_linear_residual(3, condition=2.0, seed=4)
        assert check_sharpness(residual, count=500, seed=0).passed
        from sharpopt import distance_to_set
        from sharpopt.geometry import Ball
        target = Ball(center=np.zeros(2), radius=0.5)
        assert check_sharpness(distance_to_set(target), count=500, seed=0).passed

    def test_misdeclared_sharpness_fails(self):
        residual = generate_linear_residual(3, condition=2.0, seed=4)
        doubled = 2.0 * residual.sharpness.sharp_modulus
        cert = check_sharpness(residual, count=500, seed=0, modulus=doubled)
        assert not cert.passed

    def test_weak_quasiconvexity_scalar(self):
        cert = check_weak_quasiconvexity(weakly_quasiconvex_scalar(),
                                         count=500, seed=0)
        assert cert.passed

    def test_weak_quasiconvexity_convex_builtins(self):
        for prob in (generate_linear_residual(3, condition=2.0, seed=9),
                     power_norm(2.0, [0.1])):
            assert check_weak_quasiconvexity(prob, count=300, seed=0).passed
