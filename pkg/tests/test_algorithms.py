import numpy as np
import pytest

import tomokit as tk
from tomokit import ImageGeometry, LabeledArray
from tomokit.algorithms import (CGLS, FISTA, GD, LADMM, PDHG, SIRT,
                                write_history_csv)
from tomokit.containers import BlockContainer
from tomokit.functions import (INFEASIBLE, BlockFunction, IndicatorBox,
                               L1Norm, L2NormSquared, LeastSquares,
                               MixedL21Norm, ZeroFunction)
from tomokit.operators import (ArraySpace, BlockOperator, GradientOperator,
                               IdentityOperator, MatrixOperator)


def make_vec(values, labels=("x",)):
    return LabeledArray(np.atleast_1d(np.asarray(values, float)), labels)


def small_lsq(seed=3, shape=(8, 5)):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal(shape)
    op = MatrixOperator(M)
    b = LabeledArray(rng.standard_normal(shape[0]), op.range.labels)
    return M, op, b


class TestRunLoop:
    def test_run_zero_keeps_state(self):
        _, op, b = small_lsq()
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=10)
        before = alg.x.values.copy()
        alg.run(0)
        assert np.array_equal(alg.x.values, before)
        assert alg.iteration == 0

    def test_split_run_bitwise_identical(self):
        _, op, b = small_lsq()
        a1 = CGLS(op.domain.allocate(0.0), op, b, max_iteration=100,
                  log_interval=5)
        a2 = CGLS(op.domain.allocate(0.0), op, b, max_iteration=100,
                  log_interval=5)
        a1.run(20)
        a2.run(7)
        a2.run(13)
        assert np.array_equal(a1.x.values, a2.x.values)
        assert a1.history == a2.history

    def test_budget_truncation_warns(self):
        _, op, b = small_lsq()
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=5)
        with pytest.warns(RuntimeWarning):
            alg.run(50)
        assert alg.iteration == 5

    def test_log_cadence_absolute(self):
        _, op, b = small_lsq()
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=1000,
                   log_interval=10)
        alg.run(35)
        iterations = [row[0] for row in alg.history]
        assert iterations == [0, 10, 20, 30]

    def test_default_log_interval_small_budget(self):
        _, op, b = small_lsq()
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=50)
        alg.run(3)
        assert [row[0] for row in alg.history] == [0, 1, 2, 3]

    def test_callback_sees_state(self):
        _, op, b = small_lsq()
        seen = []
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=10)
        alg.run(4, callback=lambda a: seen.append(a.iteration))
        assert seen == [1, 2, 3, 4]

    def test_csv_export(self, tmp_path):
        _, op, b = small_lsq()
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=10)
        alg.run(3)
        path = tmp_path / "history.csv"
        write_history_csv(alg, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iteration,objective"
        assert len(lines) == 1 + len(alg.history)
        # floats are written in full repr precision
        assert float(lines[1].split(",")[1]) == alg.history[0][1]


class TestGD:
    def test_exact_step_on_quadratic(self):
        c = make_vec([1.0, 2.0])
        f = L2NormSquared(b=c)
        alg = GD(make_vec([0.0, 0.0]), f, max_iteration=10)
        alg.run(1)
        assert np.allclose(alg.solution.values, c.values)

    def test_converges_to_target(self):
        c = make_vec([0.5, -1.5, 3.0])
        alg = GD(make_vec([0.0, 0.0, 0.0]), L2NormSquared(b=c),
                 step=0.25, max_iteration=200)
        alg.run(100)
        assert np.allclose(alg.solution.values, c.values, atol=1e-10)

    def test_backtracking_monotone_decrease(self):
        M, op, b = small_lsq(seed=9)
        f = LeastSquares(op, b)
        alg = GD(op.domain.allocate(0.0), f, step="backtracking",
                 max_iteration=60)
        alg.run(60)
        objectives = [row[1] for row in alg.history]
        assert all(b2 <= a2 + 1e-12
                   for a2, b2 in zip(objectives, objectives[1:]))

    def test_missing_gradient_rejected(self):
        with pytest.raises(ValueError):
            GD(make_vec([0.0]), L1Norm(), max_iteration=5)

    def test_needs_step_without_lipschitz(self):
        from tomokit.functions import Function

        class Smoothish(Function):
            def value(self, x):
                return x.squared_norm()

            def gradient(self, x, out=None):
                return 2.0 * x
        with pytest.raises(ValueError):
            GD(make_vec([0.0]), Smoothish(), max_iteration=5)


class TestCGLS:
    def test_identity_solved_in_two_iterations(self):
        sp = ArraySpace((2,))
        op = IdentityOperator(sp)
        b = LabeledArray([1.0, 2.0], sp.labels)
        alg = CGLS(sp.allocate(0.0), op, b, max_iteration=10)
        alg.run(2)
        assert np.linalg.norm(alg.x.values - b.values) <= 1e-12

    def test_dense_normal_equations_oracle(self):
        M, op, b = small_lsq(seed=3, shape=(8, 5))
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=20)
        alg.run(5)
        expected = np.linalg.solve(M.T @ M, M.T @ b.values)
        rel = np.linalg.norm(alg.x.values - expected) \
            / np.linalg.norm(expected)
        assert rel <= 1e-8

    def test_krylov_subspace_membership(self):
        # iterate k lies in span{A^T b, (A^T A) A^T b, ...} of order k
        M, op, b = small_lsq(seed=12, shape=(7, 6))
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=10)
        s = M.T @ b.values
        basis = [s]
        for _ in range(3):
            basis.append(M.T @ (M @ basis[-1]))
        for k in (1, 2, 3):
            alg.run(1)
            B = np.stack(basis[:k], axis=1)
            coeffs, *_ = np.linalg.lstsq(B, alg.x.values, rcond=None)
            residual = np.linalg.norm(B @ coeffs - alg.x.values)
            assert residual <= 1e-10 * max(np.linalg.norm(alg.x.values),
                                           1.0)

    def test_breakdown_flags_convergence(self):
        sp = ArraySpace((3,))
        op = IdentityOperator(sp)
        b = sp.allocate(0.0)
        alg = CGLS(sp.allocate(0.0), op, b, max_iteration=10)
        alg.run(3)
        assert alg.converged

    def test_objective_is_residual_norm_squared(self):
        M, op, b = small_lsq(seed=5)
        alg = CGLS(op.domain.allocate(0.0), op, b, max_iteration=10,
                   log_interval=1)
        alg.run(4)
        for iteration, value in alg.history:
            pass
        x = alg.x.values
        assert value == pytest.approx(
            np.sum((M @ x - b.values) ** 2), rel=1e-10)

    def test_tolerance_stop(self):
        M, op, b = small_lsq(seed=3, shape=(6, 4))
        alg = CGLS(op.domain.allocate(0.0), op, b, tolerance=1e-12,
                   max_iteration=100)
        alg.run(100)
        assert alg.converged
        assert alg.iteration < 100


class TestSIRT:
    def test_bounds_hold_for_every_iterate(self):
        rng = np.random.default_rng(2)
        M = np.abs(rng.standard_normal((12, 6))) + 0.05
        op = MatrixOperator(M)
        b = LabeledArray(rng.standard_normal(12) + 3.0, op.range.labels)
        lower, upper = 0.0, 0.09
        alg = SIRT(op.domain.allocate(0.0), op, b, lower=lower,
                   upper=upper, max_iteration=200)
        violations = []

        def check(a):
            v = a.x.values
            violations.append(np.any(v < lower) or np.any(v > upper))
        alg.run(200, callback=check)
        assert not any(violations)

    def test_unconstrained_matches_weighted_least_squares(self):
        rng = np.random.default_rng(7)
        M = np.abs(rng.standard_normal((6, 4))) + 0.1
        op = MatrixOperator(M)
        b = LabeledArray(rng.standard_normal(6), op.range.labels)
        alg = SIRT(op.domain.allocate(0.0), op, b, max_iteration=30000,
                   log_interval=10000)
        alg.run(30000)
        R = np.diag(1.0 / M.sum(axis=1))
        expected = np.linalg.solve(M.T @ R @ M, M.T @ R @ b.values)
        rel = np.linalg.norm(alg.x.values - expected) \
            / np.linalg.norm(expected)
        assert rel <= 1e-6

    def test_zero_rows_and_columns_skipped(self):
        M = np.array([[1.0, 0.5, 0.0],
                      [0.0, 0.0, 0.0],
                      [0.3, 0.2, 0.0]])
        op = MatrixOperator(M)
        b = LabeledArray([1.0, 5.0, 0.5], op.range.labels)
        alg = SIRT(op.domain.allocate(0.0), op, b, max_iteration=50)
        alg.run(50)
        assert np.all(np.isfinite(alg.x.values))
        assert alg.x.values[2] == 0.0  # unseen voxel never updated

    def test_relaxation_scales_step(self):
        rng = np.random.default_rng(1)
        M = np.abs(rng.standard_normal((5, 3))) + 0.1
        op = MatrixOperator(M)
        b = LabeledArray(rng.standard_normal(5), op.range.labels)
        a1 = SIRT(op.domain.allocate(0.0), op, b, relaxation=1.0,
                  max_iteration=5)
        a2 = SIRT(op.domain.allocate(0.0), op, b, relaxation=0.5,
                  max_iteration=5)
        a1.run(1)
        a2.run(1)
        assert np.allclose(a2.x.values, 0.5 * a1.x.values)


class TestFISTA:
    def test_soft_threshold_oracle(self):
        sp = ArraySpace((5,))
        b = LabeledArray([3.0, -2.0, 0.3, 0.0, 1.0], sp.labels)
        f = LeastSquares(IdentityOperator(sp), b)
        alpha = 1.0
        alg = FISTA(sp.allocate(0.0), f, alpha * L1Norm(),
                    max_iteration=500)
        alg.run(400)
        expected = np.sign(b.values) * np.maximum(
            np.abs(b.values) - alpha / 2.0, 0.0)
        assert np.max(np.abs(alg.solution.values - expected)) <= 1e-8

    def test_nonneg_least_squares_feasible(self):
        M, op, b = small_lsq(seed=21, shape=(8, 5))
        alg = FISTA(op.domain.allocate(0.0), LeastSquares(op, b),
                    IndicatorBox(lower=0.0), max_iteration=300)
        feasible = []
        alg.run(300, callback=lambda a: feasible.append(
            bool(np.all(a.x.values >= 0.0))))
        assert all(feasible)
        # KKT: gradient must be ~0 on the support, >= 0 off it
        g = 2 * M.T @ (M @ alg.x.values - b.values)
        on = alg.x.values > 1e-10
        assert np.all(np.abs(g[on]) <= 1e-6)
        assert np.all(g[~on] >= -1e-6)

    def test_g_defaults_to_zero_function(self):
        M, op, b = small_lsq(seed=2)
        alg = FISTA(op.domain.allocate(0.0), LeastSquares(op, b),
                    max_iteration=1000)
        alg.run(1000)
        expected = np.linalg.solve(M.T @ M, M.T @ b.values)
        assert np.allclose(alg.solution.values, expected, atol=1e-6)

    def test_accelerated_beats_plain_gd_on_quadratic(self):
        M, op, b = small_lsq(seed=33, shape=(20, 12))
        f = LeastSquares(op, b)
        fista = FISTA(op.domain.allocate(0.0), f, max_iteration=100,
                      log_interval=100)
        gd = GD(op.domain.allocate(0.0), f, max_iteration=100,
                log_interval=100)
        fista.run(100)
        gd.run(100)
        assert fista.history[-1][1] <= gd.history[-1][1]

    def test_missing_prox_rejected(self):
        M, op, b = small_lsq()
        f = LeastSquares(op, b)
        with pytest.raises(ValueError):
            FISTA(op.domain.allocate(0.0), f, g=f, max_iteration=5)


def tiny_tv_problem(alpha=0.3, seed=7):
    ig = ImageGeometry((4, 4))
    rng = np.random.default_rng(seed)
    truth = np.zeros((4, 4))
    truth[1:3, 1:3] = 1.0
    b = LabeledArray(truth + 0.1 * rng.standard_normal((4, 4)),
                     ig.labels, ig)
    K = BlockOperator(IdentityOperator(ig), GradientOperator(ig))
    F = BlockFunction(L2NormSquared(b=b), alpha * MixedL21Norm())
    return ig, b, K, F


def tiny_tv_optimum(b, alpha):
    import cvxpy as cp
    n = b.shape[0]
    V = cp.Variable(b.shape)
    dy = cp.vstack([V[1:, :] - V[:-1, :], np.zeros((1, n))])
    dx = cp.hstack([V[:, 1:] - V[:, :-1], np.zeros((n, 1))])
    tv = cp.sum(cp.norm(
        cp.vstack([cp.reshape(dy, (1, n * n), order="C"),
                   cp.reshape(dx, (1, n * n), order="C")]), axis=0))
    problem = cp.Problem(cp.Minimize(
        cp.sum_squares(V - b.values) + alpha * tv))
    problem.solve(solver=cp.CLARABEL)
    return problem.value


class TestPDHG:
    def test_matches_convex_oracle(self):
        ig, b, K, F = tiny_tv_problem()
        alg = PDHG(F, K, ZeroFunction(), max_iteration=10000,
                   log_interval=1000)
        alg.run(8000)
        optimum = tiny_tv_optimum(b, 0.3)
        primal = alg.history[-1][1]
        assert abs(primal - optimum) / optimum <= 1e-6

    def test_gap_shrinks_and_weak_duality(self):
        ig, b, K, F = tiny_tv_problem()
        alg = PDHG(F, K, ZeroFunction(), max_iteration=6000,
                   log_interval=50)
        alg.run(3000)
        gaps = {it: gap for it, _, dual, gap in alg.history
                if gap is not INFEASIBLE}
        assert gaps[3000] <= 0.01 * gaps[50]
        primal, dual = alg.history[-1][1], alg.history[-1][2]
        assert primal >= dual - 1e-8

    def test_step_size_condition_enforced(self):
        ig, b, K, F = tiny_tv_problem()
        norm_k = K.norm()
        with pytest.raises(ValueError):
            PDHG(F, K, ZeroFunction(), sigma=2.0 / norm_k,
                 tau=2.0 / norm_k, max_iteration=10)

    def test_default_steps_satisfy_condition(self):
        ig, b, K, F = tiny_tv_problem()
        alg = PDHG(F, K, ZeroFunction(), max_iteration=10)
        norm_k = K.norm()
        assert alg.sigma * alg.tau * norm_k ** 2 <= 1.0 + 1e-9

    def test_history_columns(self):
        ig, b, K, F = tiny_tv_problem()
        alg = PDHG(F, K, ZeroFunction(), max_iteration=100,
                   log_interval=50)
        alg.run(100)
        assert alg.history_columns == ("objective", "dual_objective",
                                       "gap")
        assert all(len(row) == 4 for row in alg.history)

    def test_requires_conjugate_prox(self):
        ig, b, K, F = tiny_tv_problem()
        from tomokit.functions import LeastSquares as LS

        class NoProx(ZeroFunction):
            pass
        bad = LS(K, K.range.allocate(0.0))  # no prox, no conjugate prox
        with pytest.raises(ValueError):
            PDHG(bad, K, ZeroFunction(), max_iteration=5)


class TestLADMM:
    def test_agrees_with_pdhg_and_oracle(self):
        ig, b, K, F = tiny_tv_problem()
        alg = LADMM(F, K, ZeroFunction(), max_iteration=20000,
                    log_interval=5000)
        alg.run(15000)
        optimum = tiny_tv_optimum(b, 0.3)
        assert abs(alg.history[-1][1] - optimum) <= 1e-4 * optimum

    def test_box_feasible_after_each_prox(self):
        ig, b, K, F = tiny_tv_problem()
        g = IndicatorBox(lower=0.0, upper=1.0)
        alg = LADMM(F, K, g, max_iteration=200)
        feasible = []
        alg.run(200, callback=lambda a: feasible.append(
            bool(np.all((a.x.values >= 0.0) & (a.x.values <= 1.0)))))
        assert all(feasible)

    def test_degenerate_splitting_reaches_minimiser(self):
        sp = ArraySpace((4,))
        target = LabeledArray([1.0, -2.0, 0.5, 3.0], sp.labels)
        f = L2NormSquared(b=target)
        alg = LADMM(f, IdentityOperator(sp), ZeroFunction(),
                    max_iteration=3000, log_interval=1000)
        alg.run(3000)
        assert np.allclose(alg.solution.values, target.values, atol=1e-5)

    def test_step_condition_enforced(self):
        ig, b, K, F = tiny_tv_problem()
        norm_k = K.norm()
        with pytest.raises(ValueError):
            LADMM(F, K, ZeroFunction(), sigma=1.0,
                  tau=2.0 / norm_k ** 2, max_iteration=5)


class TestDeterminism:
    def test_identical_runs_bitwise(self):
        ig, b, K, F = tiny_tv_problem()
        a1 = PDHG(F, K, ZeroFunction(), max_iteration=300,
                  log_interval=100)
        a2 = PDHG(F, K, ZeroFunction(), max_iteration=300,
                  log_interval=100)
        a1.run(300)
        a2.run(300)
        assert np.array_equal(a1.x.values, a2.x.values)
        assert a1.history == a2.history
