import numpy as np
import pytest
import scipy.integrate
import scipy.stats

from expsig.colreg import (
    DEPENDENCE_COV,
    DEPENDENCE_FUNCTIONS,
    RegressionData,
    RmseExperimentConfig,
    controlled_ols_oracle,
    controlled_ols_sample,
    joint_ols,
    joint_ols_stacked,
    ols,
    rmse_experiment,
    theoretical_rmse_ratio,
)


def random_instance(rng, n=60, p=3, k=2):
    X = rng.standard_normal((n, p))
    Z = rng.standard_normal((n, k))
    beta = rng.standard_normal(p)
    y = X @ beta + 0.5 * rng.standard_normal(n)
    return X, Z, y, beta


def test_ols_intercept_is_mean():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(40)
    data = RegressionData(np.ones((40, 1)), y)
    assert ols(data)[0] == pytest.approx(y.mean())


def test_ols_exact_recovery():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 4))
    beta = rng.standard_normal(4)
    got = ols(RegressionData(X, X @ beta))
    assert np.max(np.abs(got - beta)) < 1e-10


def test_ols_orthogonal_columns_project_independently():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.standard_normal((30, 2)))
    y = rng.standard_normal(30)
    got = ols(RegressionData(q, y))
    assert got[0] == pytest.approx(q[:, 0] @ y)
    assert got[1] == pytest.approx(q[:, 1] @ y)


def test_ols_singular_design_rejected():
    X = np.ones((10, 2))
    with pytest.raises(np.linalg.LinAlgError):
        ols(RegressionData(X, np.ones(10)))


def test_controlled_sample_orthogonal_control_is_ols():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 2))
    y = rng.standard_normal(40)
    z = rng.standard_normal(40)
    z -= (z @ y) / (y @ y) * y  # orthogonal to y
    data = RegressionData(X, y, Z=z)
    assert np.allclose(controlled_ols_sample(data), ols(RegressionData(X, y)), atol=1e-12)


def test_controlled_sample_degenerate_control_zeroes_fit():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((40, 2))
    y = rng.standard_normal(40)
    got = controlled_ols_sample(RegressionData(X, y, Z=y))
    assert np.max(np.abs(got)) < 1e-10


def test_controlled_sample_two_step_identity():
    rng = np.random.default_rng(5)
    X, Z, y, _ = random_instance(rng)
    direct = controlled_ols_sample(RegressionData(X, y, Z=Z))
    resid = y - Z @ np.linalg.lstsq(Z, y, rcond=None)[0]
    two_step = np.linalg.lstsq(X, resid, rcond=None)[0]
    assert np.max(np.abs(direct - two_step)) < 1e-10


def test_joint_ols_no_controls_is_ols():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((30, 3))
    y = rng.standard_normal(30)
    assert np.allclose(joint_ols(RegressionData(X, y)), ols(RegressionData(X, y)))


def test_joint_ols_block_equals_stacked():
    rng = np.random.default_rng(7)
    for _ in range(10):
        X, Z, y, _ = random_instance(rng)
        a = joint_ols(RegressionData(X, y, Z=Z))
        b = joint_ols_stacked(RegressionData(X, y, Z=Z))
        assert np.max(np.abs(a - b)) < 1e-8


def test_joint_ols_exact_recovery():
    rng = np.random.default_rng(8)
    X, Z, _, _ = random_instance(rng)
    beta = rng.standard_normal(3)
    alpha = rng.standard_normal(2)
    y = X @ beta + Z @ alpha
    got = joint_ols(RegressionData(X, y, Z=Z))
    assert np.max(np.abs(got - beta)) < 1e-8


def test_oracle_uncorrelated_control_is_ols():
    rng = np.random.default_rng(9)
    X, Z, y, _ = random_instance(rng, k=1)
    sigma = np.array([[1.0, 0.0], [0.0, 1.0]])
    data = RegressionData(X, y, Z=Z, Sigma=sigma)
    assert np.allclose(controlled_ols_oracle(data), ols(RegressionData(X, y)))


def test_oracle_with_sample_moments_matches_feasible():
    rng = np.random.default_rng(10)
    X, Z, y, _ = random_instance(rng, k=2)
    n = len(y)
    sigma = np.zeros((3, 3))
    sigma[0, 0] = y @ y / n
    sigma[1:, 0] = Z.T @ y / n
    sigma[0, 1:] = sigma[1:, 0]
    sigma[1:, 1:] = Z.T @ Z / n
    a = controlled_ols_oracle(RegressionData(X, y, Z=Z, Sigma=sigma))
    b = controlled_ols_sample(RegressionData(X, y, Z=Z))
    assert np.max(np.abs(a - b)) < 1e-8


def test_oracle_against_independent_coding():
    rng = np.random.default_rng(11)
    X, Z, y, _ = random_instance(rng, k=2)
    sigma_zy = np.array([0.3, -0.2])
    sigma_z = np.array([[1.5, 0.2], [0.2, 0.8]])
    sigma = np.zeros((3, 3))
    sigma[0, 0] = 2.0
    sigma[1:, 0] = sigma_zy
    sigma[0, 1:] = sigma_zy
    sigma[1:, 1:] = sigma_z
    got = controlled_ols_oracle(RegressionData(X, y, Z=Z, Sigma=sigma))
    # independent coding of the same display
    expected = np.linalg.solve(X.T @ X, X.T @ (y - Z @ np.linalg.solve(sigma_z, sigma_zy)))
    assert np.max(np.abs(got - expected)) < 1e-12


def test_translation_equivariance():
    # exact for ols / joint / oracle; the sample-covariance feasible
    # estimator shifts its estimated cross-moment by Z'X delta / N, so its
    # equivariance only holds up to that sampling term
    rng = np.random.default_rng(12)
    X, Z, y, _ = random_instance(rng, n=2000, k=1)
    delta = rng.standard_normal(3)
    shifted = y + X @ delta
    sigma = np.array([[1.0, 0.1], [0.1, 1.0]])
    for est in (ols, joint_ols):
        a = est(RegressionData(X, y, Z=Z))
        b = est(RegressionData(X, shifted, Z=Z))
        assert np.max(np.abs(b - a - delta)) < 1e-9
    a = controlled_ols_oracle(RegressionData(X, y, Z=Z, Sigma=sigma))
    b = controlled_ols_oracle(RegressionData(X, shifted, Z=Z, Sigma=sigma))
    assert np.max(np.abs(b - a - delta)) < 1e-9
    a = controlled_ols_sample(RegressionData(X, y, Z=Z))
    b = controlled_ols_sample(RegressionData(X, shifted, Z=Z))
    assert np.max(np.abs(b - a - delta)) < 0.2  # O(1/sqrt(N)) only


def test_dependence_normalizations():
    # E f = 0, E f^2 = 1 and the closed-form Cov(z, f(z)), by quadrature
    for name, f in DEPENDENCE_FUNCTIONS.items():
        pdf = scipy.stats.norm.pdf
        mean, _ = scipy.integrate.quad(lambda z: f(np.array([z]))[0] * pdf(z), -12, 12)
        second, _ = scipy.integrate.quad(lambda z: f(np.array([z]))[0] ** 2 * pdf(z), -12, 12)
        cov, _ = scipy.integrate.quad(lambda z: z * f(np.array([z]))[0] * pdf(z), -12, 12)
        assert abs(mean) < 1e-9
        assert second == pytest.approx(1.0, abs=1e-9)
        assert cov == pytest.approx(DEPENDENCE_COV[name], abs=1e-9)


def test_dependence_cov_monte_carlo():
    rng = np.random.default_rng(13)
    z = rng.standard_normal(10_000_000)
    for name, f in DEPENDENCE_FUNCTIONS.items():
        emp = float(np.mean(z * f(z)))
        assert emp == pytest.approx(DEPENDENCE_COV[name], abs=2e-3)


def test_infeasible_cells_rejected():
    with pytest.raises(ValueError):
        RmseExperimentConfig(rho=0.75, dependence="sq", seed=0)
    with pytest.raises(ValueError):
        RmseExperimentConfig(rho=1.0, dependence="exp", seed=0)
    RmseExperimentConfig(rho=0.75, dependence="cube", seed=0)  # feasible


def test_rmse_zero_correlation_is_neutral():
    res = rmse_experiment(RmseExperimentConfig(sigma=10.0, rho=0.0, reps=3000, seed=3))
    for name in ("controlled_sample", "joint_ols", "controlled_oracle"):
        assert res.percent_of_ols[name] == pytest.approx(100.0, abs=2.0)


def test_rmse_feasible_ratio_approaches_theory():
    res = rmse_experiment(RmseExperimentConfig(sigma=10.0, rho=0.5, reps=4000, seed=4))
    target = 100.0 * theoretical_rmse_ratio(0.5)
    assert res.percent_of_ols["joint_ols"] == pytest.approx(target, abs=2.0)
    assert res.percent_of_ols["controlled_sample"] == pytest.approx(target, abs=2.0)
    assert res.percent_of_ols["controlled_oracle"] == pytest.approx(target, abs=2.0)


def test_rmse_rows_shape():
    res = rmse_experiment(RmseExperimentConfig(reps=100, seed=5))
    rows = res.to_rows()
    assert [r["estimator"] for r in rows] == [
        "ols",
        "controlled_sample",
        "joint_ols",
        "controlled_oracle",
    ]
