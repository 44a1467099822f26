import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jumpshift import (
    BasisSpec,
    ConvergenceError,
    DegeneracyError,
    GaussianSample,
    NonContractiveError,
    ShiftOperator,
    UnsupportedOperationError,
    dyadic_points,
    functional_sde_residual,
    geometric_rate,
    invert_exact,
    picard_inverse,
    perturb,
)
from jumpshift.wiener import schauder_values


class TestExactInverse:
    def test_identity(self):
        op = ShiftOperator.from_eigenvalues([], dim=3)
        target = GaussianSample([1.0, -2.0, 0.5])
        res = invert_exact(op, target)
        assert np.array_equal(res.solution.xi, target.xi)
        assert res.iterations == 0
        assert res.residual == 0.0

    def test_single_coordinate(self):
        op = ShiftOperator.from_eigenvalues([0.5])
        res = invert_exact(op, GaussianSample([3.0]))
        assert res.solution.xi[0] == 2.0

    def test_degenerate_rejected(self):
        op = ShiftOperator.from_eigenvalues([-1.0])
        with pytest.raises(DegeneracyError):
            invert_exact(op, GaussianSample([1.0]))

    def test_near_degenerate_flagged(self):
        op = ShiftOperator.from_eigenvalues([-1.0 + 1e-12])
        res = invert_exact(op, GaussianSample([1.0]))
        assert res.ill_conditioned

    def test_random_round_trip(self):
        rng = np.random.default_rng(42)
        lambdas = rng.uniform(-0.9, 2.0, 8)
        op = ShiftOperator.from_eigenvalues(lambdas)
        for _ in range(50):
            w = GaussianSample(rng.standard_normal(8))
            res = invert_exact(op, w)
            assert res.residual <= 1e-12
            # both composition orders
            assert np.max(np.abs(perturb(op, res.solution).xi - w.xi)) <= 1e-12
            back = invert_exact(op, perturb(op, w))
            assert np.max(np.abs(back.solution.xi - w.xi)) <= 1e-12


class TestPicard:
    def test_empty_operator_converges_immediately(self):
        op = ShiftOperator.from_eigenvalues([], dim=2)
        res = picard_inverse(op, GaussianSample([1.0, 2.0]), tol=1e-12)
        assert res.iterations == 1
        assert res.residual == 0.0

    def test_scalar_recursion_hand_oracle(self):
        # x <- 3 - 0.5 x converges to 2 with ratio 1/2 per sweep
        op = ShiftOperator.from_eigenvalues([0.5])
        res = picard_inverse(op, GaussianSample([3.0]), tol=1e-12)
        x, updates = 3.0, []
        while True:
            nxt = 3.0 - 0.5 * x
            updates.append(abs(nxt - x))
            x = nxt
            if updates[-1] < 1e-12:
                break
        assert res.iterations == len(updates)
        assert res.solution.xi[0] == pytest.approx(2.0, abs=1e-11)
        assert res.update_norms == tuple(updates)
        ratios = np.array(res.update_norms[1:]) / np.array(res.update_norms[:-1])
        assert np.allclose(ratios, 0.5, atol=1e-9)

    def test_iteration_count_tracks_contraction(self):
        op = ShiftOperator.from_eigenvalues([0.8, -0.5, 0.3])
        tol = 1e-12
        res = picard_inverse(op, GaussianSample([1.0, 0.7, -0.4]), tol=tol)
        predicted = math.log(tol) / math.log(0.8)
        assert abs(res.iterations - predicted) <= 2

    def test_geometric_rate_estimate(self):
        op = ShiftOperator.from_eigenvalues([0.8, -0.5, 0.3])
        res = picard_inverse(op, GaussianSample([1.0, 0.7, -0.4]), tol=1e-12)
        assert geometric_rate(res) == pytest.approx(0.8, rel=1e-3)

    def test_non_contractive_rejected(self):
        op = ShiftOperator.from_eigenvalues([1.2])
        with pytest.raises(NonContractiveError):
            picard_inverse(op, GaussianSample([1.0]), tol=1e-10)

    def test_budget_exhaustion_carries_residual(self):
        op = ShiftOperator.from_eigenvalues([0.9])
        with pytest.raises(ConvergenceError) as err:
            picard_inverse(op, GaussianSample([5.0]), tol=1e-14, max_iter=3)
        assert err.value.residual > 0.0

    @given(
        st.lists(st.floats(-0.85, 0.85), min_size=1, max_size=6),
        st.integers(0, 2**32 - 1),
    )
    def test_agrees_with_exact_inverse(self, lambdas, seed):
        op = ShiftOperator.from_eigenvalues(lambdas)
        target = GaussianSample(np.random.default_rng(seed).standard_normal(len(lambdas)))
        exact = invert_exact(op, target).solution.xi
        fixed_point = picard_inverse(op, target, tol=1e-12, max_iter=2000).solution.xi
        assert np.max(np.abs(exact - fixed_point)) <= 1e-10


class TestFunctionalEquation:
    BASIS = BasisSpec(63, kind="schauder")

    def _setup(self, seed=17, n_jumps=8):
        rng = np.random.default_rng(seed)
        lambdas = rng.uniform(-0.9, 2.0, n_jumps)
        op = ShiftOperator.from_eigenvalues(lambdas, dim=63)
        target = GaussianSample(rng.standard_normal(63))
        return op, target

    def test_empty_operator_zero_residual(self):
        op = ShiftOperator.from_eigenvalues([], dim=63)
        rng = np.random.default_rng(3)
        w = GaussianSample(rng.standard_normal(63))
        res = functional_sde_residual(op, self.BASIS, w, w, dyadic_points(63))
        assert res == 0.0

    def test_exact_solutions_satisfy_equation(self):
        for seed in (1, 2, 3):
            op, target = self._setup(seed)
            solution = invert_exact(op, target).solution
            res = functional_sde_residual(op, self.BASIS, target, solution, dyadic_points(63))
            assert res <= 1e-10

    def test_perturbed_solution_detected(self):
        op, target = self._setup()
        solution = invert_exact(op, target).solution
        xi = np.array(solution.xi)
        k = int(op.indices_[0])
        xi[k - 1] += 0.1
        bumped = GaussianSample(xi)
        res = functional_sde_residual(op, self.BASIS, target, bumped, dyadic_points(63))
        # sensitivity oracle: the bump feeds the residual through
        # (1 + lambda_k) times the basis peak value of direction k
        lam = float(op.lambdas_[0])
        peak = max(abs(schauder_values(63, float(t))[k - 1]) for t in dyadic_points(63))
        assert res >= 0.1 * abs(1 + lam) * peak - 1e-12
        assert res > 0.0

    def test_abstract_basis_rejected(self):
        op, target = self._setup()
        with pytest.raises(UnsupportedOperationError):
            functional_sde_residual(op, BasisSpec(63), target, target, [0.5])
