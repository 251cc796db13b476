"""Controlled linear regression estimators and their RMSE simulation.

Four estimators of the regression coefficients: plain OLS, the feasible
sample-covariance controlled estimator, the joint OLS estimator (block
formula), and the infeasible estimator using the known control covariance.
The simulation study resamples controls and errors on one fixed design and
reports prediction RMSEs against the noiseless best prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import e, sqrt
from typing import Callable, Dict, List, Optional

import numpy as np

from .rng import stream

PINV_RTOL = 1e-10


@dataclass
class RegressionData:
    X: np.ndarray
    y: np.ndarray
    Z: Optional[np.ndarray] = None
    Sigma: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("design and target row counts differ")
        if self.Z is not None:
            Z = np.asarray(self.Z, dtype=float)
            if Z.ndim == 1:
                Z = Z[:, None]
            if Z.shape[0] != self.y.shape[0]:
                raise ValueError("control and target row counts differ")
            self.Z = Z
        if self.Sigma is not None:
            self.Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))


def _solve_gram(X: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    gram = X.T @ X
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular design Gram matrix") from exc


def ols(data: RegressionData) -> np.ndarray:
    """beta_hat = (X'X)^-1 X'y."""
    return _solve_gram(data.X, data.X.T @ data.y)


def controlled_ols_sample(data: RegressionData) -> np.ndarray:
    """Feasible controlled estimator: project y off the controls, then OLS.

    Uses (X'X)^-1 X' (I - Z (Z'Z)^-1 Z') y; a rank-deficient Z'Z falls back
    to the pseudo-inverse (flagged via the returned estimator being computed
    with minimum-norm projection).
    """
    if data.Z is None:
        return ols(data)
    Z = data.Z
    zty = Z.T @ data.y
    try:
        proj_coeff = np.linalg.solve(Z.T @ Z, zty)
    except np.linalg.LinAlgError:
        proj_coeff = np.linalg.pinv(Z.T @ Z, rcond=PINV_RTOL) @ zty
    resid = data.y - Z @ proj_coeff
    return _solve_gram(data.X, data.X.T @ resid)


def joint_ols(data: RegressionData) -> np.ndarray:
    """First p entries of OLS on the stacked design (X Z), via the block formula."""
    if data.Z is None or data.Z.shape[1] == 0:
        return ols(data)
    X, Z, y = data.X, data.Z, data.y
    xtx_inv_xt = np.linalg.solve(X.T @ X, X.T)
    beta_x = xtx_inv_xt @ y
    resid_proj = Z.T @ y - Z.T @ X @ beta_x
    schur = Z.T @ Z - (Z.T @ X) @ (xtx_inv_xt @ Z)
    try:
        alpha = np.linalg.solve(schur, resid_proj)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular joint Gram matrix") from exc
    return beta_x - xtx_inv_xt @ (Z @ alpha)


def joint_ols_stacked(data: RegressionData) -> np.ndarray:
    """Stacked-design route, kept as the two-route identity check."""
    if data.Z is None:
        return ols(data)
    W = np.hstack([data.X, data.Z])
    full = _solve_gram(W, W.T @ data.y)
    return full[: data.X.shape[1]]


def controlled_ols_oracle(data: RegressionData) -> np.ndarray:
    """Infeasible controlled estimator with the known joint covariance.

    beta_X - (X'X)^-1 X' Z Sigma_z^-1 Sigma_zy, partitioning Sigma as the
    (error, controls) covariance.
    """
    if data.Sigma is None:
        raise ValueError("oracle estimator needs the joint (error, control) covariance")
    if data.Z is None:
        return ols(data)
    sigma_zy = data.Sigma[1:, 0]
    sigma_z = data.Sigma[1:, 1:]
    try:
        lam = np.linalg.solve(sigma_z, sigma_zy)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular control covariance") from exc
    return ols(data) - _solve_gram(data.X, data.X.T @ (data.Z @ lam))


# ---------------------------------------------------------------------------
# Simulation study
# ---------------------------------------------------------------------------

DEPENDENCE_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "linear": lambda z: z,
    "sq": lambda z: (z**2 + z - 1) / sqrt(3.0),
    "cube": lambda z: z**3 / sqrt(15.0),
    "exp": lambda z: (np.exp(z) - sqrt(e)) / sqrt(e**2 - e),
}

# Cov(z, f(z)) for standard normal z, in closed form (cross-checked by
# quadrature and Monte Carlo in the tests).
DEPENDENCE_COV: Dict[str, float] = {
    "linear": 1.0,
    "sq": 1.0 / sqrt(3.0),
    "cube": 3.0 / sqrt(15.0),
    "exp": sqrt(e) / sqrt(e**2 - e),
}

ESTIMATOR_NAMES = ("ols", "controlled_sample", "joint_ols", "controlled_oracle")


@dataclass
class RmseExperimentConfig:
    sigma: float = 10.0
    rho: float = 0.5
    dependence: str = "linear"
    n: int = 1000
    reps: int = 10000
    seed: int = 0
    beta: tuple = (-1.0, 6.0, 8.0)

    def __post_init__(self) -> None:
        if self.dependence not in DEPENDENCE_FUNCTIONS:
            raise ValueError(f"unknown dependence {self.dependence!r}")
        if not 0 <= self.rho <= 1:
            raise ValueError("correlation must lie in [0, 1]")
        kappa = self.rho / DEPENDENCE_COV[self.dependence]
        if kappa > 1 + 1e-12:
            raise ValueError(
                f"rho={self.rho} infeasible for dependence {self.dependence!r}"
                f" (needs kappa={kappa:.3f} <= 1)"
            )


@dataclass
class RmseExperimentResult:
    config: RmseExperimentConfig
    rmse: Dict[str, float]
    percent_of_ols: Dict[str, float]
    paired_tstat: Dict[str, float]

    def to_rows(self) -> List[Dict[str, object]]:
        rows = []
        for name in ESTIMATOR_NAMES:
            rows.append(
                {
                    "estimator": name,
                    "rmse": self.rmse[name],
                    "percent_of_ols": self.percent_of_ols[name],
                    "paired_tstat_vs_ols": self.paired_tstat[name],
                }
            )
        return rows


def rmse_experiment(config: RmseExperimentConfig) -> RmseExperimentResult:
    """Prediction-RMSE comparison on one fixed design.

    The design has an intercept, x1 ~ N(0,1) and x2 ~ N(1,1), held fixed
    across replications; each replication resamples the control z and the
    independent noise, forms y, and evaluates every estimator's prediction
    at the test point (1, 0, 1) against the noiseless value x*' beta.
    """
    rng_design = stream(config.seed, 0)
    n = config.n
    x1 = rng_design.standard_normal(n)
    x2 = rng_design.standard_normal(n) + 1.0
    X = np.column_stack([np.ones(n), x1, x2])
    x_star = np.array([1.0, 0.0, 1.0])
    beta = np.asarray(config.beta, dtype=float)
    y_star = float(x_star @ beta)

    f = DEPENDENCE_FUNCTIONS[config.dependence]
    kappa = config.rho / DEPENDENCE_COV[config.dependence]
    sigma = config.sigma

    # precomputed projections: predictions are linear in y given the design
    w_ols = np.linalg.solve(X.T @ X, x_star)  # x*' (X'X)^-1 X' y = (X w_ols) . y
    ols_weights = X @ w_ols
    signal = X @ beta
    gram_inv = np.linalg.inv(X.T @ X)

    preds = {name: np.empty(config.reps) for name in ESTIMATOR_NAMES}
    batch = 256
    rep = 0
    idx = 1
    while rep < config.reps:
        b = min(batch, config.reps - rep)
        z = np.empty((b, n))
        eta = np.empty((b, n))
        for i in range(b):
            r = stream(config.seed, idx + rep + i)
            z[i] = r.standard_normal(n)
            eta[i] = r.standard_normal(n)
        eps = sigma * kappa * f(z) + sigma * np.sqrt(max(1 - kappa**2, 0.0)) * eta
        y = signal[None, :] + eps

        zy = np.einsum("bn,bn->b", z, y)
        zz = np.einsum("bn,bn->b", z, z)
        wz = z @ ols_weights
        ols_pred = y @ ols_weights
        preds["ols"][rep : rep + b] = ols_pred
        preds["controlled_sample"][rep : rep + b] = ols_pred - wz * zy / zz

        # joint OLS via the rank-one block formula (single control column)
        xz = z @ (X @ gram_inv)  # rows are Z' X (X'X)^-1
        yx = y @ X
        zPy = zy - np.einsum("bp,bp->b", xz, yx)
        zPz = zz - np.einsum("bp,bp->b", xz, z @ X)
        alpha = zPy / zPz
        preds["joint_ols"][rep : rep + b] = ols_pred - alpha * wz

        # known covariance: Sigma_z = 1, Sigma_zy = rho * sigma
        preds["controlled_oracle"][rep : rep + b] = ols_pred - (config.rho * sigma) * wz
        rep += b

    sq_err = {name: (preds[name] - y_star) ** 2 for name in ESTIMATOR_NAMES}
    rmse = {name: float(np.sqrt(sq_err[name].mean())) for name in ESTIMATOR_NAMES}
    percent = {
        name: 100.0 * rmse[name] / rmse["ols"] if rmse["ols"] > 0 else float("nan")
        for name in ESTIMATOR_NAMES
    }
    tstat = {}
    for name in ESTIMATOR_NAMES:
        diff = sq_err[name] - sq_err["ols"]
        sd = diff.std(ddof=1)
        tstat[name] = float(diff.mean() / (sd / np.sqrt(diff.size))) if sd > 0 else 0.0
    return RmseExperimentResult(config, rmse, percent, tstat)


def theoretical_rmse_ratio(rho: float) -> float:
    """RMSE ratio implied by the constant variance-reduction factor 1 - rho^2."""
    return sqrt(max(1.0 - rho**2, 0.0))
