"""Expected-signature estimation.

Implements the plain Monte-Carlo estimator, its martingale control-variate
correction with both coefficient estimators (regression slope and the
shuffle/quadratic-variation form), the estimator-selection diagnostic, and
the feasible long-run covariance (HAC) estimator used by the CLT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .paths import qv_letter
from .signatures import batch_control_terms, batch_sig_words, path_batch_increments
from .words import Word, shuffle

C_MODES = ("fixed", "c1", "c2")


class DegenerateControlError(ValueError):
    """Control variate has zero empirical variance (or undefined structure)."""


@dataclass
class EstimateReport:
    """Point estimates per word plus the per-sample values behind them."""

    words: List[str]
    phi_hat: np.ndarray
    per_sample: np.ndarray
    variance: np.ndarray
    n: int
    control_per_sample: Optional[np.ndarray] = None
    c_used: Optional[np.ndarray] = None
    c_mode: Optional[str] = None
    variance_ratio: Optional[np.ndarray] = None
    hac: Optional[np.ndarray] = None
    hac_meta: Optional[Dict[str, object]] = None
    fallback_words: List[str] = field(default_factory=list)
    meta: Dict[str, object] = field(default_factory=dict)

    def standard_errors(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def to_dict(self, include_samples: bool = False) -> Dict[str, object]:
        out: Dict[str, object] = {
            "words": list(self.words),
            "phi_hat": [float(v) for v in self.phi_hat],
            "variance": [float(v) for v in self.variance],
            "standard_error": [float(v) for v in self.standard_errors()],
            "n": self.n,
            "meta": self.meta,
        }
        if self.c_used is not None:
            out["c_used"] = [float(v) for v in self.c_used]
            out["c_mode"] = self.c_mode
        if self.variance_ratio is not None:
            out["variance_ratio"] = [float(v) for v in self.variance_ratio]
        if self.fallback_words:
            out["fallback_words"] = list(self.fallback_words)
        if self.hac is not None:
            out["hac"] = [[float(v) for v in row] for row in self.hac]
            out["hac_meta"] = self.hac_meta
        if include_samples:
            out["per_sample"] = self.per_sample.tolist()
        return out


def _as_increments(paths) -> np.ndarray:
    if isinstance(paths, np.ndarray):
        if paths.ndim != 3:
            raise ValueError("increment array must have shape (N, M, d)")
        return paths
    return path_batch_increments(list(paths))


def expected_signature(paths, words: Sequence[Word], meta: Optional[dict] = None) -> EstimateReport:
    """Sample mean of per-path signature coefficients, one column per word."""
    inc = _as_increments(paths)
    if inc.shape[0] < 1:
        raise ValueError("empty path list")
    per_sample = batch_sig_words(inc, list(words))
    n = per_sample.shape[0]
    phi = per_sample.mean(axis=0)
    var = per_sample.var(axis=0, ddof=1) / n if n > 1 else np.zeros(per_sample.shape[1])
    return EstimateReport(
        words=[str(w) for w in words],
        phi_hat=phi,
        per_sample=per_sample,
        variance=var,
        n=n,
        meta=meta or {},
    )


def estimate_c1(sig_values: np.ndarray, control_values: np.ndarray) -> float:
    """Regression-through-the-origin slope sum(S * S_c) / sum(S_c^2).

    No intercept and no centering of the control: its population mean is
    zero for martingale inputs, so the uncentered ratio spends no degrees
    of freedom estimating it.
    """
    denom = float(np.dot(control_values, control_values))
    if denom == 0.0:
        raise DegenerateControlError("control variate is identically zero in sample")
    return float(np.dot(sig_values, control_values) / denom)


def estimate_c1_centered(sig_values: np.ndarray, control_values: np.ndarray) -> float:
    """Sample-optimal centered slope Cov(S, S_c) / Var(S_c); used by the
    variance-identity check, not by the estimators themselves."""
    sc = control_values - control_values.mean()
    denom = float(np.dot(sc, sc))
    if denom == 0.0:
        raise DegenerateControlError("control variate has zero sample variance")
    return float(np.dot(sig_values - sig_values.mean(), sc) / denom)


def _augmented_increments(inc: np.ndarray) -> np.ndarray:
    """Increments of (X, running step-product) paths, shape (N, M, d + d^2)."""
    n, m, d = inc.shape
    prods = (inc[:, :, :, None] * inc[:, :, None, :]).reshape(n, m, d * d)
    return np.concatenate([inc, prods], axis=2)


def _c2_word_sets(I: Word) -> Tuple[List[Tuple[Word, int]], List[Tuple[Word, int]], List[Tuple[Word, int]]]:
    """Shuffle expansions behind the quadratic-variation estimator of c*.

    Words live on the augmented alphabet of size d + d^2 where the extra
    letters address the running step-product coordinates.
    """
    d = I.d
    k = len(I)
    if k < 2:
        raise DegenerateControlError("quadratic-variation estimator needs |I| >= 2")
    D = d + d * d
    I_aug = I.relabel(D)
    I1_aug = I.drop_last().relabel(D)
    qv_last = Word((qv_letter(d, I.letters[-1], I.letters[-1]),), D)
    qv_pair = Word((qv_letter(d, I.letters[-2], I.letters[-1]),), D)
    I2_qv = I.drop_last(2).relabel(D).concat(qv_pair)
    num_a = [(w, c) for w, c in shuffle(I_aug, I_aug).words()]
    num_b = [(w, c) for w, c in shuffle(I_aug, I2_qv).words()]
    den = [(w.concat(qv_last), c) for w, c in shuffle(I1_aug, I1_aug).words()]
    return num_a, num_b, den


def c2_components(paths, I: Word) -> Tuple[np.ndarray, np.ndarray]:
    """Per-path numerator and denominator samples of the QV-based c* estimator."""
    inc = _as_increments(paths)
    num_a, num_b, den = _c2_word_sets(I)
    aug = _augmented_increments(inc)
    all_words = [w for w, _ in num_a] + [w for w, _ in num_b] + [w for w, _ in den]
    values = batch_sig_words(aug, all_words)
    ca = np.array([c for _, c in num_a], dtype=float)
    cb = np.array([c for _, c in num_b], dtype=float)
    cd = np.array([c for _, c in den], dtype=float)
    na, nb = len(num_a), len(num_b)
    y2 = values[:, :na] @ ca - 0.5 * (values[:, na : na + nb] @ cb)
    z2 = values[:, na + nb :] @ cd
    return y2, z2


def estimate_c2(paths, I: Word) -> float:
    """QV/shuffle estimator of the optimal control coefficient."""
    y2, z2 = c2_components(paths, I)
    denom = float(z2.sum())
    if denom == 0.0:
        raise DegenerateControlError("quadratic-variation denominator is zero")
    return float(y2.sum() / denom)


def corrected_expected_signature(
    paths,
    words: Sequence[Word],
    c_mode: str = "c1",
    c_fixed: Optional[float] = None,
    centered: bool = False,
    meta: Optional[dict] = None,
) -> EstimateReport:
    """Control-variate estimator: per word, mean of S^I - c * S_c^I.

    `c_mode` picks the coefficient per word: "fixed" uses `c_fixed`
    verbatim, "c1" the regression slope, "c2" the quadratic-variation
    estimator.  A word whose control has exactly zero sample variance falls
    back to c = 0 and is reported in `fallback_words`.
    """
    if c_mode not in C_MODES:
        raise ValueError(f"unknown c_mode {c_mode!r}; expected one of {C_MODES}")
    if c_mode == "fixed" and c_fixed is None:
        raise ValueError("c_mode='fixed' requires c_fixed")
    words = list(words)
    for w in words:
        if len(w) == 0:
            raise ValueError("corrected estimator undefined for the empty word")
    inc = _as_increments(paths)
    if inc.shape[0] < 1:
        raise ValueError("empty path list")
    sig_vals, ctrl_vals = batch_control_terms(inc, words)
    n = sig_vals.shape[0]
    c_used = np.zeros(len(words))
    fallback: List[str] = []
    for j, w in enumerate(words):
        try:
            if c_mode == "fixed":
                if float(np.dot(ctrl_vals[:, j], ctrl_vals[:, j])) == 0.0 and c_fixed != 0.0:
                    raise DegenerateControlError("zero control")
                c_used[j] = float(c_fixed)
            elif c_mode == "c1":
                est = estimate_c1_centered if centered else estimate_c1
                c_used[j] = est(sig_vals[:, j], ctrl_vals[:, j])
            else:
                c_used[j] = estimate_c2(inc, w)
        except DegenerateControlError:
            c_used[j] = 0.0
            fallback.append(str(w))
    corrected = sig_vals - ctrl_vals * c_used[None, :]
    phi = corrected.mean(axis=0)
    var = corrected.var(axis=0, ddof=1) / n if n > 1 else np.zeros(len(words))
    naive_var = sig_vals.var(axis=0, ddof=1) if n > 1 else np.ones(len(words))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(naive_var > 0, corrected.var(axis=0, ddof=1) / naive_var, np.nan)
    return EstimateReport(
        words=[str(w) for w in words],
        phi_hat=phi,
        per_sample=corrected,
        variance=var,
        n=n,
        control_per_sample=ctrl_vals,
        c_used=c_used,
        c_mode=c_mode,
        variance_ratio=ratio,
        fallback_words=fallback,
        meta=meta or {},
    )


def mse_diff_diagnostic(paths, I: Word) -> float:
    """Sample statistic proportional to MSE(c2-estimator) - MSE(c1-estimator).

    A positive value recommends the regression estimator, a negative one the
    quadratic-variation estimator.  Built from the per-path numerator and
    denominator samples of the two ratio estimators and their pooled means.
    """
    inc = _as_increments(paths)
    n = inc.shape[0]
    if n < 2:
        raise ValueError("diagnostic needs at least two samples")
    if len(I) < 2:
        raise DegenerateControlError("diagnostic needs |I| >= 2")
    sig_vals, ctrl_vals = batch_control_terms(inc, [I])
    y1 = sig_vals[:, 0] * ctrl_vals[:, 0]
    z1 = ctrl_vals[:, 0] ** 2
    y2, z2 = c2_components(inc, I)
    mu_y = 0.5 * (y1.mean() + y2.mean())
    mu_z = 0.5 * (z1.mean() + z2.mean())
    if mu_z == 0.0:
        raise DegenerateControlError("pooled denominator mean is zero")
    per_sample = (mu_y / mu_z) * (z2**2 - z1**2) - (y1 + y2) * (z2 - z1)
    return float(per_sample.sum() / n**2)


def hac_long_run_cov(
    per_sample: np.ndarray,
    upsilon: float = 0.5,
    kernel: str = "truncation",
) -> Tuple[np.ndarray, Dict[str, object]]:
    """Long-run covariance of per-sample signature values in sample order.

    Lag-n cross-covariances pair the endpoints of consecutive non-overlapping
    blocks of length n+1, centered at the full-sample mean; negative lags
    enter as transposes, so the result is symmetric by construction.  The
    bandwidth is floor(N^(upsilon/2)) and lags n = 0..bandwidth-1 are kept
    (truncation kernel); "bartlett" reweights them by 1 - n/bandwidth.
    """
    per_sample = np.asarray(per_sample, dtype=float)
    if per_sample.ndim == 1:
        per_sample = per_sample[:, None]
    n_samples = per_sample.shape[0]
    if n_samples < 2:
        raise ValueError("HAC estimation needs at least two samples")
    if not 0 < upsilon < 1:
        raise ValueError(f"rate exponent must lie in (0, 1), got {upsilon}")
    if kernel not in ("truncation", "bartlett"):
        raise ValueError(f"unknown kernel {kernel!r}")
    bandwidth = int(np.floor(n_samples ** (upsilon / 2)))
    clipped = False
    if bandwidth < 1:
        bandwidth = 1
    if bandwidth >= n_samples:
        bandwidth = n_samples - 1
        clipped = True
    centered = per_sample - per_sample.mean(axis=0)
    sigma = centered.T @ centered / n_samples
    for lag in range(1, bandwidth):
        m = n_samples // (lag + 1)
        firsts = centered[0 : m * (lag + 1) : lag + 1]
        seconds = centered[lag : m * (lag + 1) : lag + 1]
        block = firsts.T @ seconds / m
        weight = 1.0 if kernel == "truncation" else 1.0 - lag / bandwidth
        sigma = sigma + weight * (block + block.T)
    sigma = 0.5 * (sigma + sigma.T)
    meta: Dict[str, object] = {
        "bandwidth": bandwidth,
        "upsilon": upsilon,
        "kernel": kernel,
        "bandwidth_clipped": clipped,
    }
    return sigma, meta


def cov0_via_shuffle(paths, words: Sequence[Word]) -> np.ndarray:
    """Lag-0 covariance through the pathwise shuffle identity.

    Entry (I, J) is sum over K in I shuffle J of phi_hat_K minus
    phi_hat_I phi_hat_J; equals the direct centered sample covariance when
    all samples share one partition.
    """
    inc = _as_increments(paths)
    words = list(words)
    expansions = [[shuffle(a, b) for b in words] for a in words]
    needed: Dict[Word, int] = {}
    for row in expansions:
        for poly in row:
            for w, _ in poly.words():
                needed.setdefault(w, len(needed))
    all_words = list(needed)
    values = batch_sig_words(inc, all_words + words)
    means = values.mean(axis=0)
    phi = means[len(all_words) :]
    out = np.empty((len(words), len(words)))
    for i, row in enumerate(expansions):
        for j, poly in enumerate(row):
            total = sum(c * means[needed[w]] for w, c in poly.words())
            out[i, j] = total - phi[i] * phi[j]
    return out


def with_hac(report: EstimateReport, upsilon: float = 0.5, kernel: str = "truncation") -> EstimateReport:
    sigma, meta = hac_long_run_cov(report.per_sample, upsilon=upsilon, kernel=kernel)
    report.hac = sigma
    report.hac_meta = meta
    return report


def words_from_strings(strings: Sequence[str], d: int) -> List[Word]:
    from .words import parse_word

    return [parse_word(s, d) for s in strings]


def per_sample_csv(report: EstimateReport) -> str:
    """Per-sample values, one row per path, for external analysis."""
    import io

    buf = io.StringIO()
    buf.write("sample," + ",".join(report.words) + "\n")
    for i in range(report.n):
        row = ",".join(repr(float(v)) for v in report.per_sample[i])
        buf.write(f"{i},{row}\n")
    return buf.getvalue()
