"""Seeded simulators for the example processes.

All simulators are pure functions of (params, partition, seed, index): the
same inputs reproduce the same path bit for bit, and batches address one
Philox stream per path so parallel and serial generation agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .paths import Partition, PiecewiseLinearPath
from .rng import stream

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


class SimulationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Parameter types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HestonParams:
    s0: float = 1.0
    v0: float = 0.1
    kappa: float = 0.6
    theta: float = 0.1
    xi: float = 0.2
    rho: float = -0.15

    def __post_init__(self) -> None:
        if self.s0 <= 0 or self.v0 <= 0:
            raise ValueError("initial price and variance must be positive")
        if min(self.kappa, self.theta) <= 0 or self.xi < 0:
            raise ValueError("kappa, theta must be positive and xi non-negative")
        if not -1 < self.rho < 1:
            raise ValueError("correlation must lie in (-1, 1)")

    def feller(self) -> bool:
        return 2 * self.kappa * self.theta > self.xi**2


@dataclass(frozen=True)
class OUParams:
    """Stationary mean-zero OU: drift matrix A and stationary covariance."""

    A: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        S = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Sigma", S)
        if A.shape[0] != A.shape[1] or A.shape != S.shape:
            raise ValueError("A and Sigma must be square matrices of equal size")
        if np.min(np.linalg.eigvals(A).real) <= 0:
            raise ValueError("A must have eigenvalues with positive real part")
        if not np.allclose(S, S.T):
            raise ValueError("Sigma must be symmetric")
        if np.min(np.linalg.eigvalsh(S)) < -1e-12:
            raise ValueError("Sigma must be positive semi-definite")

    @property
    def d(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class CAR2Params:
    """Order-2 continuous-time autoregressive process in dimension 2."""

    A1: np.ndarray
    A2: np.ndarray

    def __post_init__(self) -> None:
        A1 = np.atleast_2d(np.asarray(self.A1, dtype=float))
        A2 = np.atleast_2d(np.asarray(self.A2, dtype=float))
        object.__setattr__(self, "A1", A1)
        object.__setattr__(self, "A2", A2)
        if A1.shape != (2, 2) or A2.shape != (2, 2):
            raise ValueError("A1 and A2 must be 2x2 matrices")

    def state_drift(self) -> np.ndarray:
        """The 4x4 drift of the state-space OU representation."""
        top = np.hstack([np.zeros((2, 2)), -np.eye(2)])
        bottom = np.hstack([self.A2, self.A1])
        return np.vstack([top, bottom])

    def state_diffusion_cov(self) -> np.ndarray:
        out = np.zeros((4, 4))
        out[2:, 2:] = np.eye(2)
        return out

    def stationary_cov(self) -> np.ndarray:
        """Solve A S + S A^T = B B^T for the stationary state covariance."""
        A = self.state_drift()
        if np.min(np.linalg.eigvals(A).real) <= 0:
            raise ValueError("state drift is not stable; no stationary law")
        return scipy.linalg.solve_lyapunov(A, self.state_diffusion_cov())


@dataclass(frozen=True)
class FbmParams:
    H: float

    def __post_init__(self) -> None:
        if not 0 < self.H < 1:
            raise ValueError(f"Hurst exponent must lie in (0, 1), got {self.H}")


# ---------------------------------------------------------------------------
# Simulators
# ---------------------------------------------------------------------------


def simulate_bm(
    d: int, partition: Partition, seed: int, index: int = 0
) -> PiecewiseLinearPath:
    """Standard d-dimensional Brownian motion started at 0."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    rng = stream(seed, index)
    dt = partition.step_widths()
    z = rng.standard_normal((dt.size, d))
    inc = z * np.sqrt(dt)[:, None]
    samples = np.zeros((dt.size + 1, d))
    np.cumsum(inc, axis=0, out=samples[1:])
    return PiecewiseLinearPath(partition, samples)


def simulate_bm_batch(
    d: int, partition: Partition, seed: int, n: int, offset: int = 0
) -> np.ndarray:
    """Increment array (n, M, d) for n independent BM paths."""
    dt = partition.step_widths()
    out = np.empty((n, dt.size, d))
    for i in range(n):
        z = stream(seed, offset + i).standard_normal((dt.size, d))
        out[i] = z * np.sqrt(dt)[:, None]
    return out


def _cholesky_with_jitter(gram: np.ndarray) -> np.ndarray:
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(gram + jitter * np.eye(gram.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise SimulationError("Gram matrix not positive definite after maximal jitter")


def gaussian_factor(
    cov: Callable[[np.ndarray, np.ndarray], np.ndarray], partition: Partition
) -> np.ndarray:
    """Cholesky factor of the covariance Gram matrix over the interior grid."""
    t = partition.times[1:]
    gram = cov(t[:, None], t[None, :])
    return _cholesky_with_jitter(np.asarray(gram, dtype=float))


def simulate_gaussian(
    cov: Callable[[np.ndarray, np.ndarray], np.ndarray],
    mean: Optional[Callable[[np.ndarray], np.ndarray]],
    partition: Partition,
    seed: int,
    index: int = 0,
    d: int = 1,
    factor: Optional[np.ndarray] = None,
) -> PiecewiseLinearPath:
    """Exact joint Gaussian sample on the grid, X_0 pinned to mean(0).

    Coordinates are i.i.d. copies sharing the scalar covariance function.
    Pass a precomputed `factor` (from :func:`gaussian_factor`) when drawing
    many paths on one grid.
    """
    if factor is None:
        factor = gaussian_factor(cov, partition)
    rng = stream(seed, index)
    m = partition.n_steps
    z = rng.standard_normal((m, d))
    samples = np.zeros((m + 1, d))
    samples[1:] = factor @ z
    if mean is not None:
        samples += np.asarray(mean(partition.times), dtype=float).reshape(m + 1, -1)
    return PiecewiseLinearPath(partition, samples)


def fbm_covariance(H: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def cov(s: np.ndarray, t: np.ndarray) -> np.ndarray:
        return 0.5 * (
            np.abs(t) ** (2 * H) + np.abs(s) ** (2 * H) - np.abs(t - s) ** (2 * H)
        )

    return cov


def simulate_fbm(
    params: FbmParams,
    partition: Partition,
    seed: int,
    index: int = 0,
    d: int = 1,
    factor: Optional[np.ndarray] = None,
) -> PiecewiseLinearPath:
    """Fractional Brownian motion via exact Cholesky sampling, X_0 = 0."""
    return simulate_gaussian(
        fbm_covariance(params.H), None, partition, seed, index=index, d=d, factor=factor
    )


def _ou_transition(A: np.ndarray, Sigma: np.ndarray, h: float):
    """One-step exact transition: X_{t+h} = Phi X_t + L z."""
    phi = scipy.linalg.expm(-A * h)
    noise_cov = Sigma - phi @ Sigma @ phi.T
    noise_cov = 0.5 * (noise_cov + noise_cov.T)
    try:
        L = _cholesky_with_jitter(noise_cov)
    except SimulationError as exc:
        raise SimulationError(f"transition noise covariance lost PSD at h={h}") from exc
    return phi, L


def simulate_ou(
    params: OUParams, partition: Partition, seed: int, index: int = 0
) -> PiecewiseLinearPath:
    """Stationary OU path: X_0 ~ N(0, Sigma), exact transitions on the grid."""
    rng = stream(seed, index)
    d = params.d
    L0 = _cholesky_with_jitter(params.Sigma)
    x = L0 @ rng.standard_normal(d)
    dt = partition.step_widths()
    samples = np.empty((dt.size + 1, d))
    samples[0] = x
    uniq = {}
    for m, h in enumerate(dt):
        key = round(float(h), 15)
        if key not in uniq:
            uniq[key] = _ou_transition(params.A, params.Sigma, float(h))
        phi, L = uniq[key]
        x = phi @ x + L @ rng.standard_normal(d)
        samples[m + 1] = x
    return PiecewiseLinearPath(partition, samples)


def simulate_ou_long_batch(
    params: OUParams, n_steps: int, h: float, seed: int, n: int, offset: int = 0
) -> np.ndarray:
    """n stationary OU trajectories of n_steps uniform steps, shape (n, n_steps+1, d).

    Diagonalizes the drift so the linear recursion runs through one C-level
    filter per eigen-direction instead of a Python loop over steps; falls
    back to the step loop when the drift is defective.
    """
    d = params.d
    phi, L = _ou_transition(params.A, params.Sigma, h)
    L0 = _cholesky_with_jitter(params.Sigma)
    x0 = np.empty((n, d))
    z = np.empty((n, n_steps, d))
    for i in range(n):
        rng = stream(seed, offset + i)
        x0[i] = L0 @ rng.standard_normal(d)
        z[i] = rng.standard_normal((n_steps, d))
    eps = z @ L.T
    try:
        evals, V = np.linalg.eig(phi)
        cond = np.linalg.cond(V)
        if not np.isfinite(cond) or cond > 1e8:
            raise np.linalg.LinAlgError("ill-conditioned eigenbasis")
        import scipy.signal

        Vinv = np.linalg.inv(V)
        y0 = x0 @ Vinv.T
        w = eps @ Vinv.T
        out_modes = np.empty((n, n_steps + 1, d), dtype=complex)
        out_modes[:, 0, :] = y0
        for k in range(d):
            lam = evals[k]
            zi = (lam * y0[:, k])[:, None]
            filtered, _ = scipy.signal.lfilter(
                [1.0], [1.0, -lam], w[:, :, k], axis=1, zi=zi
            )
            out_modes[:, 1:, k] = filtered
        paths = np.real(out_modes @ V.T)
    except np.linalg.LinAlgError:
        paths = np.empty((n, n_steps + 1, d))
        paths[:, 0, :] = x0
        x = x0
        for m in range(n_steps):
            x = x @ phi.T + eps[:, m, :]
            paths[:, m + 1, :] = x
    if not np.all(np.isfinite(paths)):
        raise SimulationError("non-finite OU state")
    return paths


def simulate_car2(
    params: CAR2Params, partition: Partition, seed: int, index: int = 0
) -> PiecewiseLinearPath:
    """CAR(2) path: first two coordinates of the stationary 4-d state OU."""
    ou = OUParams(params.state_drift(), params.stationary_cov())
    state = simulate_ou(ou, partition, seed, index=index)
    return PiecewiseLinearPath(partition, state.samples[:, :2].copy())


def simulate_heston(
    params: HestonParams,
    partition: Partition,
    seed: int,
    index: int = 0,
    substeps: int = 16,
) -> PiecewiseLinearPath:
    """Joint (S, V) Heston path sampled down from a finer Euler grid.

    The variance update clips V at zero inside the square root only; the
    price moves by the exact lognormal step with variance frozen over each
    fine interval, which keeps S positive and exactly a martingale.
    """
    inc = simulate_heston_batch(params, partition, seed, 1, offset=index, substeps=substeps)
    samples = np.zeros((partition.n_steps + 1, 2))
    samples[0] = (params.s0, params.v0)
    samples[1:] = samples[0] + np.cumsum(inc[0], axis=0)
    return PiecewiseLinearPath(partition, samples)


def simulate_heston_batch(
    params: HestonParams,
    partition: Partition,
    seed: int,
    n: int,
    offset: int = 0,
    substeps: int = 16,
) -> np.ndarray:
    """Increment array (n, M, 2) of Heston (S, V) paths on the partition."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    dt = partition.step_widths()
    fine_dt = np.repeat(dt / substeps, substeps)
    n_fine = fine_dt.size
    z = np.empty((n, n_fine, 2))
    for i in range(n):
        z[i] = stream(seed, offset + i).standard_normal((n_fine, 2))
    sqrt_h = np.sqrt(fine_dt)
    dws = z[:, :, 0] * sqrt_h
    dwv = (params.rho * z[:, :, 0] + np.sqrt(1 - params.rho**2) * z[:, :, 1]) * sqrt_h
    s = np.full(n, params.s0)
    v = np.full(n, params.v0)
    out = np.empty((n, dt.size, 2))
    prev_s, prev_v = s.copy(), v.copy()
    for m in range(n_fine):
        vplus = np.maximum(v, 0.0)
        root = np.sqrt(vplus)
        h = fine_dt[m]
        s = s * np.exp(root * dws[:, m] - 0.5 * vplus * h)
        v = v + params.kappa * (params.theta - v) * h + params.xi * root * dwv[:, m]
        if (m + 1) % substeps == 0:
            coarse = (m + 1) // substeps - 1
            if not (np.all(np.isfinite(s)) and np.all(np.isfinite(v))):
                raise SimulationError(f"non-finite Heston state at coarse step {coarse}")
            out[:, coarse, 0] = s - prev_s
            out[:, coarse, 1] = v - prev_v
            prev_s, prev_v = s.copy(), v.copy()
    return out


def heston_variance_mean(params: HestonParams, t: np.ndarray) -> np.ndarray:
    """E[V_t] = theta + (v0 - theta) e^(-kappa t), exact for the CIR variance."""
    return params.theta + (params.v0 - params.theta) * np.exp(-params.kappa * np.asarray(t))
