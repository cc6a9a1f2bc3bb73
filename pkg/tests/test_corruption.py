import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisylasso.corruption import (CorruptedDataset, CorruptionModel, DesignSpec, SimulationConfig,
                                   apply_additive_noise, apply_missing, apply_multiplicative, bernoulli_noise,
                                   constant_noise, generate_design, generate_response, generate_sparse_beta,
                                   read_dataset_csv, solve_stationary_covariance, uniform_noise,
                                   var_driving_matrix)
from noisylasso.rng import child_seeds, make_rng, trial_seed


def test_rng_is_philox_and_deterministic():
    a = make_rng(5).standard_normal(4)
    b = make_rng(5).standard_normal(4)
    assert isinstance(make_rng(5).bit_generator, np.random.Philox)
    assert np.array_equal(a, b)
    assert child_seeds(3, 4) == child_seeds(3, 4)
    assert trial_seed(0, 1, 2) != trial_seed(0, 2, 1)


class TestStationaryCovariance:
    def test_zero_driving_matrix(self):
        assert np.allclose(solve_stationary_covariance(np.zeros((3, 3)), np.eye(3)), np.eye(3))

    def test_scalar_fixed_point(self):
        S = solve_stationary_covariance(np.array([[0.5]]), np.array([[1.0]]))
        assert S[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-10)

    def test_residual_random(self):
        A = var_driving_matrix(3, 0.2, seed=1)
        assert np.linalg.norm(A, 2) == pytest.approx(0.2)
        S = solve_stationary_covariance(A, np.eye(3))
        assert np.abs(S - A @ S @ A.T - np.eye(3)).max() <= 1e-10
        assert np.array_equal(S, S.T)

    def test_rejects_unit_norm(self):
        with pytest.raises(ValueError):
            solve_stationary_covariance(np.eye(2), np.eye(2))


class TestDesign:
    def test_iid_covariance(self):
        X = generate_design(DesignSpec(n=100_000, p=2, cov=np.eye(2)), seed=0)
        assert np.abs(X.T @ X / X.shape[0] - np.eye(2)).max() < 0.05

    def test_var_with_zero_matrix_matches_iid(self):
        spec = DesignSpec.var(100_000, np.zeros((2, 2)), np.eye(2))
        X = generate_design(spec, seed=1)
        assert np.abs(X.T @ X / X.shape[0] - np.eye(2)).max() < 0.05

    def test_ar1_autocorrelation(self):
        X = generate_design(DesignSpec.var(100_000, np.array([[0.5]]), np.array([[1.0]])), seed=2)[:, 0]
        r = np.corrcoef(X[:-1], X[1:])[0, 1]
        assert r == pytest.approx(0.5, abs=0.02)
        assert X.var() == pytest.approx(4.0 / 3.0, rel=0.03)

    def test_rejects_non_spd(self):
        with pytest.raises(ValueError):
            DesignSpec(n=5, p=2, cov=np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_deterministic(self):
        spec = DesignSpec(n=20, p=3, cov=np.eye(3))
        assert np.array_equal(generate_design(spec, 9), generate_design(spec, 9))


class TestSparseBeta:
    def test_equal_magnitude(self):
        gt = generate_sparse_beta(4, 4, 2.0, seed=0)
        assert np.allclose(np.abs(gt.beta_star), 1.0)

    @pytest.mark.parametrize("p,k", [(256, 6), (128, 12)])
    def test_support_and_norm(self, p, k):
        gt = generate_sparse_beta(p, k, 1.0, seed=3)
        assert np.count_nonzero(gt.beta_star) == k == gt.k
        assert np.linalg.norm(gt.beta_star) == pytest.approx(1.0)

    def test_k_larger_than_p(self):
        with pytest.raises(ValueError):
            generate_sparse_beta(3, 4)


class TestResponse:
    def test_noiseless(self):
        X = make_rng(0).standard_normal((5, 3))
        b = np.array([1.0, -2.0, 0.0])
        assert np.array_equal(generate_response(X, b, 0.0, seed=1), X @ b)

    def test_zero_signal_variance(self):
        y = generate_response(np.ones((100_000, 2)), np.zeros(2), 0.5, seed=2)
        assert y.var() == pytest.approx(0.25, rel=0.02)

    def test_noise_stream(self):
        y = generate_response(np.eye(3), np.array([1.0, 0, 0]), 0.5, seed=4)
        expected = 0.5 * make_rng(4).standard_normal(3)
        assert np.allclose(y - np.array([1.0, 0, 0]), expected)


class TestChannels:
    def test_additive_zero_is_identity(self):
        X = make_rng(0).standard_normal((4, 3))
        assert np.array_equal(apply_additive_noise(X, 0.0, 1), X)

    def test_additive_std(self):
        X = np.zeros((100_000, 2))
        Z = apply_additive_noise(X, 0.04, seed=1)
        assert Z.std() == pytest.approx(0.2, rel=0.01)

    def test_additive_diag(self):
        Z = apply_additive_noise(np.zeros((100_000, 2)), np.diag([1.0, 4.0]), seed=2)
        assert np.allclose(Z.var(axis=0), [1.0, 4.0], rtol=0.03)

    def test_additive_rejects_non_psd(self):
        with pytest.raises(ValueError):
            apply_additive_noise(np.zeros((3, 2)), np.diag([1.0, -1.0]), 0)

    def test_missing_zero_rate(self):
        X = make_rng(0).standard_normal((10, 4))
        Z, mask = apply_missing(X, 0.0, 1)
        assert np.array_equal(Z, X) and mask.all()

    def test_missing_fraction(self):
        Z, mask = apply_missing(np.ones((1000, 100)), 0.2, seed=3)
        assert mask.mean() == pytest.approx(0.8, abs=0.01)
        assert np.all(Z[~mask] == 0.0)

    def test_missing_per_column(self):
        _, mask = apply_missing(np.ones((10_000, 2)), np.array([0.0, 0.5]), seed=4)
        assert mask[:, 0].all()
        # Hoeffding: P(|mean - 0.5| > 0.02) <= 2 exp(-2 n 0.02^2) < 1e-3
        assert mask[:, 1].mean() == pytest.approx(0.5, abs=0.02)

    def test_missing_rejects_rho_one(self):
        with pytest.raises(ValueError):
            apply_missing(np.ones((2, 2)), 1.0, 0)

    def test_multiplicative_identity(self):
        X = make_rng(1).standard_normal((6, 3))
        assert np.array_equal(apply_multiplicative(X, constant_noise(3), 0), X)

    def test_bernoulli_matches_missing(self):
        X = make_rng(2).standard_normal((50, 4))
        rho = np.array([0.1, 0.2, 0.3, 0.4])
        Z1 = apply_multiplicative(X, bernoulli_noise(rho), seed=7)
        Z2, _ = apply_missing(X, rho, seed=7)
        assert np.array_equal(Z1, Z2)

    def test_uniform_mean(self):
        Z = apply_multiplicative(np.ones((100_000, 3)), uniform_noise(0.5, 1.5, 3), seed=5)
        assert np.allclose(Z.mean(axis=0), 1.0, atol=0.01)

    def test_nonpositive_moment_rejected(self):
        with pytest.raises(ValueError):
            uniform_noise(-0.5, 1.0, 2)


@given(st.integers(1, 30), st.integers(1, 6), st.floats(0.0, 0.9), st.integers(0, 2 ** 32))
def test_masked_entries_are_zero(n, p, rho, seed):
    X = make_rng(seed).standard_normal((n, p)) + 3.0
    Z, mask = apply_missing(X, rho, seed)
    assert np.all(Z[~mask] == 0.0)
    assert np.array_equal(Z[mask], X[mask])


def test_dataset_rejects_nonzero_masked_entry():
    mask = np.array([[True, False]])
    with pytest.raises(ValueError):
        CorruptedDataset(np.array([[1.0, 2.0]]), np.array([0.0]), CorruptionModel("missing", rho=0.5), mask=mask)


def test_dataset_csv_round_trip(tmp_path):
    X = make_rng(0).standard_normal((5, 3))
    Z, mask = apply_missing(X, 0.3, 1)
    data = CorruptedDataset(Z, np.arange(5.0), CorruptionModel("missing", rho=0.3), mask=mask)
    data.to_csv(tmp_path / "d")
    back = read_dataset_csv(tmp_path / "d", data.model)
    assert np.array_equal(back.Z, Z) and np.array_equal(back.mask, mask) and np.array_equal(back.y, data.y)
    header = (tmp_path / "d_Z.csv").read_text().splitlines()[0]
    assert header.endswith("z2_observed")


def test_simulation_config_round_trip(tmp_path):
    cfg = SimulationConfig(n=50, p=8, k=2, mode="var", sigma_w=0.2, A_norm=0.2, seed=3)
    cfg.dump(tmp_path / "c.yaml")
    back = SimulationConfig.load(tmp_path / "c.yaml")
    assert back == cfg
    design, truth, model = back.build()
    assert design.p == 8 and truth.k == 2 and model.kind == "additive"
