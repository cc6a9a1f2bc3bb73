import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisylasso.corruption import CorruptionModel, DesignSpec, apply_missing, generate_design
from noisylasso.graphical import (GraphSpec, column_surrogates, estimate_precision, generate_graph_precision,
                                  l1op_norm, precision_from_covariance, regression_vectors, symmetrize_l1op)
from noisylasso.optimizer import SolverConfig
from noisylasso.rng import make_rng
from noisylasso.surrogates import lasso_pair, missing_pair_general
from oracles import brute_symmetrize_2x2, random_spd

EXACT = SolverConfig(mode="lagrangian", lam=0.0, b0=1e6, tol=1e-15, max_iter=200_000)


class TestGenerators:
    def test_chain_unscaled(self):
        T = generate_graph_precision(GraphSpec("chain", 3), rescale=False)
        assert np.allclose(T, [[1, 0.1, 0], [0.1, 1, 0.1], [0, 0.1, 1]])

    def test_star_degree(self):
        T = generate_graph_precision(GraphSpec("star", 10), rescale=False)
        assert np.count_nonzero(T[0, 1:]) == 1

    def test_erdos_renyi_condition_number(self):
        spec = GraphSpec("erdos_renyi", 30)
        ev = np.linalg.eigvalsh(generate_graph_precision(spec, seed=2, rescale=False))
        assert ev[-1] / ev[0] == pytest.approx(30, rel=1e-6)

    @pytest.mark.parametrize("family", ["chain", "star", "erdos_renyi"])
    def test_unit_operator_norm(self, family):
        T = generate_graph_precision(GraphSpec(family, 20), seed=1)
        ev = np.linalg.eigvalsh(T)
        assert ev[0] > 0 and abs(ev[-1] - 1.0) <= 1e-10 and np.array_equal(T, T.T)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            GraphSpec("tree", 5)


class TestColumnSurrogates:
    def test_uncorrupted_is_lasso_column(self):
        Z = make_rng(0).standard_normal((20, 4))
        pair = column_surrogates(Z, CorruptionModel("none"), 1)
        ref = lasso_pair(np.delete(Z, 1, axis=1), Z[:, 1])
        assert np.allclose(pair.gamma_mat, ref.gamma_mat) and np.allclose(pair.gamma_vec, ref.gamma_vec)

    def test_additive_block_indexing(self):
        Z = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 1.0]])
        pair = column_surrogates(Z, CorruptionModel("additive", cov_w=0.1 * np.eye(3)), 0)
        S = Z.T @ Z / 2
        assert np.allclose(pair.gamma_mat, S[1:, 1:] - 0.1 * np.eye(2))
        assert np.allclose(pair.gamma_vec, [S[1, 0], S[2, 0]])

    def test_missing_cross_term(self):
        X = make_rng(1).standard_normal((30, 4))
        Z, mask = apply_missing(X, 0.25, 2)
        pair = column_surrogates(Z, CorruptionModel("missing", rho=np.full(4, 0.25)), 2, mask)
        # the response column is itself thinned, so its factor is (1 - rho) once more than the pair's
        ref = missing_pair_general(np.delete(Z, 2, axis=1), Z[:, 2], np.full(3, 0.25))
        assert np.allclose(pair.gamma_vec, ref.gamma_vec / 0.75, rtol=1e-13)
        assert np.allclose(pair.gamma_mat, ref.gamma_mat, rtol=1e-13)

    def test_bad_index(self):
        with pytest.raises(ValueError):
            column_surrogates(np.ones((3, 2)), CorruptionModel("none"), 2)


class TestSymmetrize:
    def test_symmetric_fixed_point(self):
        S = random_spd(make_rng(0), 4)
        assert np.allclose(symmetrize_l1op(S), S, atol=1e-9)

    def test_two_by_two_example(self):
        T = np.array([[0.0, 1.0], [0.0, 0.0]])
        X = symmetrize_l1op(T)
        assert X[0, 1] == pytest.approx(0.5) and l1op_norm(X - T) == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(10))
    def test_two_by_two_brute_force(self, seed):
        T = make_rng(seed).standard_normal((2, 2))
        best, _, h = brute_symmetrize_2x2(T, resolution=4001)
        assert l1op_norm(symmetrize_l1op(T) - T) <= best + 1e-9
        assert l1op_norm(symmetrize_l1op(T) - T) >= best - h

    @pytest.mark.parametrize("seed", range(5))
    def test_three_by_three_vs_average(self, seed):
        T = make_rng(seed).standard_normal((3, 3))
        assert l1op_norm(symmetrize_l1op(T) - T) <= l1op_norm(symmetrize_l1op(T, "average") - T) + 1e-9

    def test_solvers_agree(self):
        T = make_rng(5).standard_normal((5, 5))
        a = l1op_norm(symmetrize_l1op(T, solver="simplex") - T)
        b = l1op_norm(symmetrize_l1op(T, solver="highs") - T)
        assert a == pytest.approx(b, abs=1e-9)

    @given(st.integers(0, 2 ** 32), st.integers(2, 5))
    def test_output_symmetric(self, seed, p):
        X = symmetrize_l1op(make_rng(seed).standard_normal((p, p)))
        assert np.array_equal(X, X.T)

    def test_non_square(self):
        with pytest.raises(ValueError):
            symmetrize_l1op(np.ones((2, 3)))


class TestEstimator:
    def test_regression_identity(self):
        Theta = random_spd(make_rng(1), 4, cond=5)
        Sigma = np.linalg.inv(Theta)
        for j, th in enumerate(regression_vectors(Theta)):
            rest = np.delete(np.arange(4), j)
            assert np.allclose(th, np.linalg.solve(Sigma[np.ix_(rest, rest)], Sigma[rest, j]))

    def test_population_reconstruction_p3(self):
        Theta = random_spd(make_rng(2), 3, cond=4)
        est = precision_from_covariance(np.linalg.inv(Theta), EXACT)
        assert np.abs(est.theta_tilde - Theta).max() <= 1e-8
        assert np.allclose(np.diag(est.theta_tilde), -est.a_hat)

    def test_consistency_large_n(self):
        Theta = generate_graph_precision(GraphSpec("chain", 10))
        X = generate_design(DesignSpec(n=10_000, p=10, cov=np.linalg.inv(Theta)), seed=3)
        est = estimate_precision(X, CorruptionModel("none"), solver=SolverConfig(), theta_true=Theta)
        assert np.linalg.norm(est.theta_hat - Theta, 2) <= 0.1
        assert np.array_equal(est.theta_hat, est.theta_hat.T)

    def test_missing_error_decreases(self):
        Theta = generate_graph_precision(GraphSpec("chain", 16))
        errs = []
        for n in (200, 800, 3200):
            X = generate_design(DesignSpec(n=n, p=16, cov=np.linalg.inv(Theta)), seed=n)
            Z, mask = apply_missing(X, 0.2, n + 1)
            est = estimate_precision(Z, CorruptionModel("missing", rho=np.full(16, 0.2)), mask,
                                     SolverConfig(), theta_true=Theta)
            errs.append(np.linalg.norm(est.theta_hat - Theta, 2))
        assert errs[0] > errs[1] > errs[2]

    def test_singular_column_reported(self):
        S = np.ones((3, 3))
        with pytest.raises(ZeroDivisionError, match="column"):
            precision_from_covariance(S, SolverConfig(R=1.0))

    def test_csv_export(self, tmp_path):
        Theta = random_spd(make_rng(4), 3)
        est = precision_from_covariance(np.linalg.inv(Theta), EXACT)
        paths = est.to_csv(tmp_path / "prec")
        assert np.allclose(np.loadtxt(paths[0], delimiter=","), est.theta_hat)
