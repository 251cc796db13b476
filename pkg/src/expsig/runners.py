"""Experiment runners behind the CLI/service subcommands.

Every runner consumes one :class:`ExperimentConfig` and produces an
:class:`ExperimentResult` holding a JSON-able summary, a CSV sample table
and (for most kinds) a small SVG figure.  All randomness flows through
counter-based per-path streams, so a runner's output is a pure function of
its config.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.stats

from . import __version__
from .colreg import RmseExperimentConfig, rmse_experiment, theoretical_rmse_ratio
from .config import ExperimentConfig, ProcessSpec, words_of
from .estimators import (
    corrected_expected_signature,
    estimate_c1,
    estimate_c2,
    expected_signature,
    hac_long_run_cov,
    mse_diff_diagnostic,
)
from .paths import Partition, PiecewiseLinearPath, dyadic_partition
from .pricing import (
    PriceResult,
    PricingSpec,
    estimate_ll_expected_signature,
    hedge,
    lead_lag_paths,
    pnl_backtest,
    price,
)
from .processes import (
    CAR2Params,
    HestonParams,
    OUParams,
    fbm_covariance,
    gaussian_factor,
    simulate_bm_batch,
    simulate_heston_batch,
    simulate_ou_long_batch,
)
from .rng import stream
from .signatures import batch_control_terms, batch_sig_words
from .svgplot import histogram_plot, line_plot
from .tensor import Functional
from .words import Word, parse_word


@dataclass
class ExperimentResult:
    kind: str
    summary: Dict[str, object]
    samples_csv: str
    plot_svg: Optional[str] = None


class NumericFailure(RuntimeError):
    """Raised when an experiment cannot produce a valid numeric result."""


def _csv(
    config: ExperimentConfig, header: Sequence[str], rows: Sequence[Sequence[object]]
) -> str:
    buf = io.StringIO()
    buf.write(f"# config={config.config_hash()} version={__version__}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return buf.getvalue()


def _base_summary(config: ExperimentConfig) -> Dict[str, object]:
    return {
        "kind": config.kind,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "library": "expsig",
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# Simulation dispatch
# ---------------------------------------------------------------------------


def ou_params_from_spec(proc: ProcessSpec) -> OUParams:
    if proc.type == "ou":
        return OUParams(np.asarray(proc.A), np.asarray(proc.Sigma))
    car = CAR2Params(np.asarray(proc.A1), np.asarray(proc.A2))
    return OUParams(car.state_drift(), car.stationary_cov())


def simulate_increments(
    proc: ProcessSpec, partition: Partition, seed: int, n: int, offset: int = 0
) -> np.ndarray:
    """Independent-path increments of shape (n, M, d)."""
    dt = partition.step_widths()
    if proc.type == "bm":
        return simulate_bm_batch(proc.d, partition, seed, n, offset)
    if proc.type == "linear":
        inc = np.tile(dt[None, :, None] * proc.slope, (n, 1, proc.d))
        return inc
    if proc.type == "fbm":
        factor = gaussian_factor(fbm_covariance(proc.hurst), partition)
        out = np.empty((n, dt.size, proc.d))
        for i in range(n):
            z = stream(seed, offset + i).standard_normal((dt.size, proc.d))
            samples = factor @ z
            out[i, 0] = samples[0]
            out[i, 1:] = np.diff(samples, axis=0)
        return out
    if proc.type == "heston":
        params = HestonParams(proc.s0, proc.v0, proc.kappa, proc.theta, proc.xi, proc.rho)
        return simulate_heston_batch(params, partition, seed, n, offset, proc.substeps)
    if proc.type in ("ou", "car2"):
        if not np.allclose(dt, dt[0]):
            raise NumericFailure("OU-family batch simulation expects a uniform partition")
        params = ou_params_from_spec(proc)
        paths = simulate_ou_long_batch(params, dt.size, float(dt[0]), seed, n, offset)
        inc = np.diff(paths, axis=1)
        if proc.type == "car2":
            inc = inc[:, :, :2]
        return inc
    raise NumericFailure(f"no simulator for process type {proc.type!r}")


def simulate_chop_increments(
    proc: ProcessSpec,
    segment_partition: Partition,
    n_segments: int,
    seed: int,
    offset: int,
    n_reps: int = 1,
) -> np.ndarray:
    """Chopped-segment increments of shape (n_reps, n_segments, M, d).

    One long trajectory per replication, cut on segment boundaries; chop
    re-bases values, which leaves the per-segment increments unchanged.
    """
    dt = segment_partition.step_widths()
    m = dt.size
    if proc.type == "bm":
        out = np.empty((n_reps, n_segments, m, proc.d))
        for r in range(n_reps):
            z = stream(seed, offset + r).standard_normal((n_segments * m, proc.d))
            out[r] = (z * np.sqrt(np.tile(dt, n_segments))[:, None]).reshape(
                n_segments, m, proc.d
            )
        return out
    if proc.type in ("ou", "car2"):
        if not np.allclose(dt, dt[0]):
            raise NumericFailure("chop sampling expects a uniform segment partition")
        params = ou_params_from_spec(proc)
        paths = simulate_ou_long_batch(
            params, n_segments * m, float(dt[0]), seed, n_reps, offset
        )
        inc = np.diff(paths, axis=1)
        if proc.type == "car2":
            inc = inc[:, :, :2]
        return inc.reshape(n_reps, n_segments, m, inc.shape[-1])
    if proc.type == "fbm":
        total = n_segments * m
        if total + 1 > 4097:
            raise NumericFailure(
                "fBm chop grid exceeds the 4096-point Cholesky budget; "
                "reduce segments or the per-segment level"
            )
        t_end = n_segments * segment_partition.horizon
        long_part = Partition(np.linspace(0.0, t_end, total + 1))
        factor = gaussian_factor(fbm_covariance(proc.hurst), long_part)
        out = np.empty((n_reps, n_segments, m, proc.d))
        for r in range(n_reps):
            z = stream(seed, offset + r).standard_normal((total, proc.d))
            samples = factor @ z
            inc = np.empty((total, proc.d))
            inc[0] = samples[0]
            inc[1:] = np.diff(samples, axis=0)
            out[r] = inc.reshape(n_segments, m, proc.d)
        return out
    raise NumericFailure(f"chop sampling not available for process type {proc.type!r}")


def exact_expected_word(proc: ProcessSpec, word: Word, T: float) -> float:
    """Closed-form E[S^I(X^pi)] for the partition-exact words.

    Available for single letters (mean-zero increments), repeated-pair words
    (i, i) via the increment variance, and one-dimensional BM powers; these
    coefficients depend on the path only through its total increment, so the
    value is the same on every partition.
    """
    k = len(word)
    if k == 1:
        if proc.type in ("bm", "fbm", "ou", "car2"):
            return 0.0
        raise NumericFailure(f"no exact mean for {proc.type!r} level-1 words")
    if proc.type == "bm":
        letters = set(word.letters)
        if len(letters) == 1:
            # S^(i,...,i) = (B_T^(i))^k / k!
            if k % 2 == 1:
                return 0.0
            import math

            double_fact = float(np.prod(np.arange(k - 1, 0, -2))) if k > 1 else 1.0
            return T ** (k // 2) * double_fact / float(math.factorial(k))
        raise NumericFailure("exact BM reference limited to single-letter powers")
    if proc.type in ("ou", "car2") and k == 2 and word.letters[0] == word.letters[1]:
        params = ou_params_from_spec(proc)
        i = word.letters[0] - 1
        phi_t = scipy.linalg.expm(-params.A * T)
        var_inc = 2 * params.Sigma - phi_t @ params.Sigma - params.Sigma @ phi_t.T
        return 0.5 * float(var_inc[i, i])
    raise NumericFailure(f"no exact reference for word {word} under {proc.type!r}")


# ---------------------------------------------------------------------------
# infill
# ---------------------------------------------------------------------------


def run_infill(config: ExperimentConfig) -> ExperimentResult:
    """In-fill discretization error on dyadic coarsenings of common noise."""
    spec = config.infill
    proc = config.process
    if proc.type not in ("bm", "fbm", "linear"):
        raise NumericFailure(
            f"infill needs a process with an exact fine-grid reference; got {proc.type!r}"
        )
    ref_part = dyadic_partition(config.partition.T, spec.reference_level)
    words = words_of(config)
    n = config.n_paths
    inc_ref = simulate_increments(proc, ref_part, config.seed, n)
    samples = np.zeros((n, inc_ref.shape[1] + 1, inc_ref.shape[2]))
    samples[:, 1:] = np.cumsum(inc_ref, axis=1)

    def statistic(inc: np.ndarray) -> np.ndarray:
        if spec.statistic == "signature":
            return batch_sig_words(inc, words)
        return batch_control_terms(inc, words)[1]

    ref_vals = statistic(inc_ref)
    rows: List[List[object]] = []
    rms = np.empty((len(spec.levels), len(words)))
    for li, level in enumerate(spec.levels):
        stride = 2 ** (spec.reference_level - level)
        coarse = np.diff(samples[:, ::stride], axis=1)
        vals = statistic(coarse)
        err = np.sqrt(np.mean((vals - ref_vals) ** 2, axis=0))
        rms[li] = err
        for wi, w in enumerate(config.words):
            rows.append([level, w, float(err[wi])])

    slopes: Dict[str, Optional[float]] = {}
    for wi, w in enumerate(config.words):
        if np.all(rms[:, wi] < 1e-14):
            slopes[w] = None  # degenerate: statistic is partition-exact
        else:
            slopes[w] = float(np.polyfit(spec.levels, np.log2(rms[:, wi]), 1)[0])

    summary = _base_summary(config)
    summary.update(
        {
            "levels": list(spec.levels),
            "reference_level": spec.reference_level,
            "statistic": spec.statistic,
            "n_paths": n,
            "words": list(config.words),
            "rms_error": {w: [float(v) for v in rms[:, wi]] for wi, w in enumerate(config.words)},
            "slope": slopes,
            "expected_slope": spec.expected_slope,
        }
    )
    series = []
    for wi, w in enumerate(config.words):
        if slopes[w] is not None:
            series.append((w, [float(l) for l in spec.levels], list(np.log2(rms[:, wi]))))
    svg = None
    if series:
        svg = line_plot(
            f"in-fill error, {proc.type}",
            "dyadic level",
            "log2 RMS error",
            series,
            footnote=f"config {summary['config_hash']} v{__version__}",
        )
    return ExperimentResult("infill", summary, _csv(config, ["level", "word", "rms_error"], rows), svg)


# ---------------------------------------------------------------------------
# clt
# ---------------------------------------------------------------------------


def _rep_value_chunks(
    config: ExperimentConfig,
    words: Sequence[Word],
    partition: Partition,
):
    """Yield (rep_index, per_sample) pairs, simulating replications in fixed
    chunks; chunk size never affects values (per-path streams)."""
    n = config.n_paths
    reps = config.replications
    n_steps = partition.n_steps
    chunk = max(1, (1 << 21) // max(n * n_steps, 1))
    done = 0
    while done < reps:
        b = min(chunk, reps - done)
        if config.sampling == "ind":
            inc = simulate_increments(
                config.process, partition, config.seed, b * n, done * n
            )
            values = batch_sig_words(inc, list(words))
            for j in range(b):
                yield done + j, values[j * n : (j + 1) * n]
        else:
            inc = simulate_chop_increments(
                config.process, partition, n, config.seed, done, n_reps=b
            )
            for j in range(b):
                yield done + j, batch_sig_words(inc[j], list(words))
        done += b


def _reference_phi(
    config: ExperimentConfig, words: Sequence[Word], partition: Partition
) -> Tuple[np.ndarray, Dict[str, object]]:
    spec = config.clt
    if spec.reference == "exact":
        vals = np.array(
            [exact_expected_word(config.process, w, partition.horizon) for w in words]
        )
        return vals, {"reference": "exact"}
    factor = spec.reference_factor
    n = config.n_paths
    reps = config.replications
    total = np.zeros(len(words))
    count = 0
    if config.sampling == "ind":
        # stream indices continue past the replication block; chunk to bound memory
        chunk = max(1, (1 << 22) // max(n * partition.n_steps, 1))
        done = 0
        while done < factor:
            b = min(chunk, factor - done)
            inc = simulate_increments(
                config.process, partition, config.seed, b * n, reps * n + done * n
            )
            total += batch_sig_words(inc, list(words)).sum(axis=0)
            count += b * n
            done += b
    else:
        chunk = max(1, (1 << 21) // max(n * partition.n_steps, 1))
        done = 0
        while done < factor:
            b = min(chunk, factor - done)
            inc = simulate_chop_increments(
                config.process, partition, n, config.seed, reps + done, n_reps=b
            )
            total += batch_sig_words(
                inc.reshape(b * n, partition.n_steps, -1), list(words)
            ).sum(axis=0)
            count += b * n
            done += b
    return total / count, {"reference": "run", "reference_samples": count}


def run_clt(config: ExperimentConfig) -> ExperimentResult:
    """Normality of the standardized estimator across replications."""
    words = words_of(config)
    level = config.partition.resolve_level(config.n_paths)
    partition = dyadic_partition(config.partition.T, level)
    n = config.n_paths
    reps = config.replications
    phi_ref, ref_meta = _reference_phi(config, words, partition)

    z_rows = np.full((reps, len(words)), np.nan)
    excluded = 0
    for r, per_sample in _rep_value_chunks(config, words, partition):
        phi = per_sample.mean(axis=0)
        sigma, _ = hac_long_run_cov(per_sample, config.upsilon, config.hac_kernel)
        diag = np.diag(sigma)
        if np.any(diag <= 0):
            excluded += 1
            continue
        z_rows[r] = np.sqrt(n) * (phi - phi_ref) / np.sqrt(diag)
    valid = ~np.isnan(z_rows[:, 0])
    z = z_rows[valid]
    if z.shape[0] < 10:
        raise NumericFailure("too many replications excluded by degenerate covariance")

    stats: Dict[str, Dict[str, float]] = {}
    for wi, w in enumerate(config.words):
        col = z[:, wi]
        ks = scipy.stats.kstest(col, "norm")
        stats[w] = {
            "skewness": float(scipy.stats.skew(col)),
            "excess_kurtosis": float(scipy.stats.kurtosis(col)),
            "ks_statistic": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
            "mean": float(col.mean()),
            "std": float(col.std(ddof=1)),
        }

    summary = _base_summary(config)
    summary.update(
        {
            "sampling": config.sampling,
            "n_paths": n,
            "replications": reps,
            "partition_level": level,
            "excluded_replications": excluded,
            "phi_reference": {w: float(v) for w, v in zip(config.words, phi_ref)},
            "normality": stats,
            **ref_meta,
        }
    )
    rows = [
        [r, w, float(z_rows[r, wi])]
        for r in range(reps)
        if valid[r]
        for wi, w in enumerate(config.words)
    ]
    # histogram against the standard normal density
    edges = np.linspace(-4, 4, 33)
    series = []
    for wi, w in enumerate(config.words):
        counts, _ = np.histogram(z[:, wi], bins=edges, density=True)
        series.append((w, list(edges), list(counts)))
    grid = np.linspace(-4, 4, 81)
    series.append(("normal", list(grid), list(scipy.stats.norm.pdf(grid))[:-1]))
    svg = histogram_plot(
        f"standardized estimates, {config.process.type} ({config.sampling})",
        "z",
        series[:-1],
        footnote=f"config {summary['config_hash']} v{__version__}",
    )
    return ExperimentResult("clt", summary, _csv(config, ["replication", "word", "z"], rows), svg)


# ---------------------------------------------------------------------------
# density / variance comparison
# ---------------------------------------------------------------------------


def _pitman_morgan(a: np.ndarray, b: np.ndarray) -> float:
    """Paired variance comparison: one-sided p-value for Var(a) < Var(b).

    Equivalent to testing zero correlation between a+b and a-b."""
    s, d = a + b, a - b
    n = len(a)
    r = np.corrcoef(s, d)[0, 1]
    if abs(r) >= 1.0:
        return 0.0 if r < 0 else 1.0
    t = r * np.sqrt((n - 2) / (1 - r**2))
    return float(scipy.stats.t.cdf(t, df=n - 2))


def run_density(config: ExperimentConfig) -> ExperimentResult:
    """Replicated naive vs corrected estimates with MSEs against a reference."""
    words = words_of(config)
    level = config.partition.resolve_level(config.n_paths)
    partition = dyadic_partition(config.partition.T, level)
    n, reps = config.n_paths, config.replications
    proc = config.process

    naive = np.empty((reps, len(words)))
    corrected = np.empty((reps, len(words)))
    c_used = np.empty((reps, len(words)))
    for r in range(reps):
        inc = simulate_increments(proc, partition, config.seed, n, r * n)
        rep_naive = expected_signature(inc, words)
        rep_corr = corrected_expected_signature(
            inc, words, c_mode="c1" if config.estimator.mode == "naive" else config.estimator.mode,
            c_fixed=config.estimator.c, centered=config.estimator.centered,
        )
        naive[r] = rep_naive.phi_hat
        corrected[r] = rep_corr.phi_hat
        c_used[r] = rep_corr.c_used

    factor = config.density.reference_factor
    total = np.zeros(len(words))
    count = 0
    chunk = 8
    done = 0
    while done < factor:
        b = min(chunk, factor - done)
        inc = simulate_increments(proc, partition, config.seed, b * n, (reps + done) * n)
        total += batch_sig_words(inc, list(words)).sum(axis=0)
        count += b * n
        done += b
    phi_ref = total / count

    sq_naive = (naive - phi_ref) ** 2
    sq_corr = (corrected - phi_ref) ** 2
    word_stats: Dict[str, Dict[str, float]] = {}
    for wi, w in enumerate(config.words):
        test = scipy.stats.ttest_rel(sq_corr[:, wi], sq_naive[:, wi], alternative="less")
        f_test = _pitman_morgan(corrected[:, wi], naive[:, wi])
        word_stats[w] = {
            "phi_reference": float(phi_ref[wi]),
            "mse_naive": float(sq_naive[:, wi].mean()),
            "mse_corrected": float(sq_corr[:, wi].mean()),
            "mean_naive": float(naive[:, wi].mean()),
            "mean_corrected": float(corrected[:, wi].mean()),
            "se_naive": float(naive[:, wi].std(ddof=1) / np.sqrt(reps)),
            "se_corrected": float(corrected[:, wi].std(ddof=1) / np.sqrt(reps)),
            "var_naive": float(naive[:, wi].var(ddof=1)),
            "var_corrected": float(corrected[:, wi].var(ddof=1)),
            "paired_pvalue_mse_corr_lt_naive": float(test.pvalue),
            "paired_pvalue_var_corr_lt_naive": f_test,
            "mean_c_used": float(c_used[:, wi].mean()),
        }

    summary = _base_summary(config)
    summary.update(
        {
            "n_paths": n,
            "replications": reps,
            "partition_level": level,
            "mesh": float(partition.mesh()),
            "reference_samples": count,
            "words": word_stats,
        }
    )
    rows = []
    for r in range(reps):
        for wi, w in enumerate(config.words):
            rows.append([r, w, float(naive[r, wi]), float(corrected[r, wi])])
    series = []
    w0 = 0
    lo = float(min(naive[:, w0].min(), corrected[:, w0].min()))
    hi = float(max(naive[:, w0].max(), corrected[:, w0].max()))
    edges = np.linspace(lo, hi, config.density.bins + 1)
    for label, data in (("naive", naive[:, w0]), ("corrected", corrected[:, w0])):
        counts, _ = np.histogram(data, bins=edges, density=True)
        series.append((label, list(edges), list(counts)))
    svg = histogram_plot(
        f"estimator densities, {proc.type}, word {config.words[0]}",
        "estimate",
        series,
        log_y=True,
        footnote=f"config {summary['config_hash']} v{__version__}",
    )
    return ExperimentResult(
        "density",
        summary,
        _csv(config, ["replication", "word", "naive", "corrected"], rows),
        svg,
    )


def run_variance_reduction(config: ExperimentConfig) -> ExperimentResult:
    """Single-sample comparison of the naive and corrected estimators."""
    words = words_of(config)
    level = config.partition.resolve_level(config.n_paths)
    partition = dyadic_partition(config.partition.T, level)
    inc = simulate_increments(config.process, partition, config.seed, config.n_paths)
    mode = config.estimator.mode if config.estimator.mode != "naive" else "c1"
    naive = expected_signature(inc, words)
    corr = corrected_expected_signature(
        inc, words, c_mode=mode, c_fixed=config.estimator.c, centered=config.estimator.centered
    )
    sig_vals, ctrl_vals = batch_control_terms(inc, words)
    word_stats: Dict[str, Dict[str, object]] = {}
    for wi, w in enumerate(config.words):
        rho = float(np.corrcoef(sig_vals[:, wi], ctrl_vals[:, wi])[0, 1])
        entry: Dict[str, object] = {
            "phi_naive": float(naive.phi_hat[wi]),
            "phi_corrected": float(corr.phi_hat[wi]),
            "c_used": float(corr.c_used[wi]),
            "variance_ratio": float(corr.variance_ratio[wi]),
            "one_minus_rho_sq": 1.0 - rho**2,
            "control_mean_tstat": float(
                ctrl_vals[:, wi].mean()
                / (ctrl_vals[:, wi].std(ddof=1) / np.sqrt(len(ctrl_vals)))
            ),
        }
        if len(words[wi]) >= 2:
            try:
                entry["c1"] = estimate_c1(sig_vals[:, wi], ctrl_vals[:, wi])
                entry["c2"] = estimate_c2(inc, words[wi])
                entry["mse_diff_diagnostic"] = mse_diff_diagnostic(inc, words[wi])
            except Exception as exc:  # degenerate controls stay reportable
                entry["diagnostic_error"] = str(exc)
        word_stats[w] = entry
    summary = _base_summary(config)
    summary.update(
        {
            "n_paths": config.n_paths,
            "partition_level": level,
            "c_mode": mode,
            "fallback_words": corr.fallback_words,
            "words": word_stats,
        }
    )
    rows = [
        [w, word_stats[w]["variance_ratio"], word_stats[w]["one_minus_rho_sq"]]
        for w in config.words
    ]
    return ExperimentResult(
        "variance-reduction",
        summary,
        _csv(config, ["word", "variance_ratio", "one_minus_rho_sq"], rows),
        None,
    )


# ---------------------------------------------------------------------------
# consistency
# ---------------------------------------------------------------------------


def run_consistency(config: ExperimentConfig) -> ExperimentResult:
    """Estimator error against a larger, finer reference along an N ladder."""
    spec = config.consistency
    words = words_of(config)
    proc = config.process
    ladder = list(spec.n_ladder)
    reps = spec.reps

    def level_for(n: int) -> int:
        if config.sampling == "chop" and spec.segment_level is not None:
            return spec.segment_level
        if config.partition.scheme == "mesh_rule":
            return config.partition.resolve_level(n)
        return config.partition.level

    # reference: larger sample on a finer grid
    n_max = max(ladder)
    ref_level = level_for(n_max) + spec.reference_extra_levels
    if config.sampling == "chop" and proc.type == "fbm":
        ref_level = level_for(n_max)  # grid budget; word-level means are mesh-free
    ref_part = dyadic_partition(config.partition.T, ref_level)
    offset0 = reps * len(ladder) + 64
    total = np.zeros(len(words))
    count = 0
    if config.sampling == "ind":
        inc = simulate_increments(
            proc, ref_part, config.seed, spec.reference_factor * n_max, offset0 * n_max
        )
        vals = batch_sig_words(inc, list(words))
        total, count = vals.sum(axis=0), vals.shape[0]
        se_ref = float(np.max(vals.std(axis=0, ddof=1) / np.sqrt(count)))
    else:
        all_vals = []
        for r in range(spec.reference_factor):
            inc = simulate_chop_increments(proc, ref_part, n_max, config.seed, offset0 + r)[0]
            all_vals.append(batch_sig_words(inc, list(words)))
        vals = np.concatenate(all_vals, axis=0)
        total, count = vals.sum(axis=0), vals.shape[0]
        se_ref = float(np.max(vals.std(axis=0, ddof=1) / np.sqrt(count)))
    phi_ref = total / count

    rms = np.empty((len(ladder), len(words)))
    mean_err = np.empty((len(ladder), len(words)))
    rows: List[List[object]] = []
    for ni, n in enumerate(ladder):
        part = dyadic_partition(config.partition.T, level_for(n))
        errs = np.empty((reps, len(words)))
        for r in range(reps):
            if config.sampling == "ind":
                inc = simulate_increments(
                    proc, part, config.seed, n, (ni * reps + r) * n_max
                )
            else:
                inc = simulate_chop_increments(
                    proc, part, n, config.seed, ni * reps + r
                )[0]
            errs[r] = batch_sig_words(inc, list(words)).mean(axis=0) - phi_ref
        rms[ni] = np.sqrt((errs**2).mean(axis=0))
        mean_err[ni] = errs.mean(axis=0)
        for wi, w in enumerate(config.words):
            rows.append([n, w, float(rms[ni, wi]), float(mean_err[ni, wi])])

    monotone = {
        w: bool(np.all(np.diff(rms[:, wi]) < rms[:-1, wi] * 0.3 + 1e-15))
        for wi, w in enumerate(config.words)
    }
    final_ok = {
        w: bool(abs(mean_err[-1, wi]) < 3 * se_ref + 3 * rms[-1, wi] / np.sqrt(reps))
        for wi, w in enumerate(config.words)
    }
    summary = _base_summary(config)
    summary.update(
        {
            "n_ladder": ladder,
            "reps": reps,
            "sampling": config.sampling,
            "phi_reference": {w: float(v) for w, v in zip(config.words, phi_ref)},
            "se_reference": se_ref,
            "rms_error": {w: [float(v) for v in rms[:, wi]] for wi, w in enumerate(config.words)},
            "monotone_trend": monotone,
            "final_error_ok": final_ok,
        }
    )
    series = [
        (w, [float(np.log2(n)) for n in ladder], list(np.log2(np.maximum(rms[:, wi], 1e-300))))
        for wi, w in enumerate(config.words)
    ]
    svg = line_plot(
        f"consistency, {proc.type} ({config.sampling})",
        "log2 N",
        "log2 RMS error",
        series,
        footnote=f"config {summary['config_hash']} v{__version__}",
    )
    return ExperimentResult(
        "consistency", summary, _csv(config, ["n", "word", "rms_error", "mean_error"], rows), svg
    )


# ---------------------------------------------------------------------------
# pricing / hedging
# ---------------------------------------------------------------------------


def _price_sampler(config: ExperimentConfig, partition: Partition):
    proc = config.process

    def sample(seed: int, n: int, offset: int = 0) -> List[PiecewiseLinearPath]:
        inc = simulate_increments(proc, partition, seed, n, offset)
        if proc.type == "heston":
            inc = inc[:, :, :1]  # price coordinate only
            start = proc.s0
        elif proc.type == "bm":
            if proc.d != 1:
                raise NumericFailure("pricing expects a scalar price process")
            start = 0.0
        else:
            raise NumericFailure(f"pricing not supported for process {proc.type!r}")
        out = []
        for i in range(inc.shape[0]):
            samples = np.empty((inc.shape[1] + 1, 1))
            samples[0] = start
            samples[1:] = start + np.cumsum(inc[i], axis=0)
            out.append(PiecewiseLinearPath(partition, samples))
        return out

    return sample


def _payoff_functional(config: ExperimentConfig) -> Functional:
    coeffs = {
        parse_word(wstr, 4): float(v)
        for wstr, v in config.price_hedge.payoff.coeffs.items()
    }
    K = max([len(w) for w in coeffs] + [1])
    return Functional(4, K, coeffs)


def run_price(config: ExperimentConfig) -> ExperimentResult:
    """Monte-Carlo pricing with and without the martingale correction."""
    level = config.partition.resolve_level(config.n_paths)
    partition = dyadic_partition(config.partition.T, level)
    sampler = _price_sampler(config, partition)
    f = _payoff_functional(config)
    ph = config.price_hedge
    reps = ph.replications
    results: Dict[str, List[PriceResult]] = {"corrected": [], "naive": []}
    for r in range(reps):
        def sample_r(seed: int, n: int, _r=r) -> List[PiecewiseLinearPath]:
            return sampler(seed, n, offset=_r * config.n_paths)

        for label, corr in (("corrected", True), ("naive", False)):
            spec = PricingSpec(
                f=f, z_t=ph.payoff.z_t, K=f.K, n_paths=config.n_paths, correction=corr
            )
            results[label].append(price(spec, sample_r, config.seed))

    summary = _base_summary(config)
    rows = []
    for label in ("corrected", "naive"):
        prices = np.array([r.price for r in results[label]])
        ses = np.array([r.standard_error for r in results[label]])
        summary[label] = {
            "price_mean": float(prices.mean()),
            "price_std_across_reps": float(prices.std(ddof=1)) if reps > 1 else 0.0,
            "se_mean": float(ses.mean()),
        }
        for r_i, res in enumerate(results[label]):
            rows.append([label, r_i, res.price, res.standard_error])
    if reps > 1:
        se_c = np.array([r.standard_error for r in results["corrected"]])
        se_n = np.array([r.standard_error for r in results["naive"]])
        test = scipy.stats.ttest_rel(se_c, se_n, alternative="less")
        summary["paired_se_pvalue_corr_lt_naive"] = float(test.pvalue)
    summary["corrected_words"] = results["corrected"][0].corrected_words
    summary["z_t"] = ph.payoff.z_t
    return ExperimentResult(
        "price", summary, _csv(config, ["estimator", "replication", "price", "se"], rows), None
    )


def run_hedge(config: ExperimentConfig) -> ExperimentResult:
    """Fit the quadratic hedge, then verify it on out-of-sample paths."""
    level = config.partition.resolve_level(config.n_paths)
    partition = dyadic_partition(config.partition.T, level)
    sampler = _price_sampler(config, partition)
    f = _payoff_functional(config)
    ph = config.price_hedge
    K = config.K
    k_f = max([len(w) for w in f.coeffs] + [0])
    phi_level = max(2 * k_f, 2 * (K // 2 + 1))
    paths = sampler(config.seed, config.n_paths, 0)
    phi, _ = estimate_ll_expected_signature(paths, phi_level, correction=ph.correction)
    result = hedge(f, ph.payoff.p0, phi, K)

    oos = sampler(config.seed, ph.backtest_paths, config.n_paths)
    pnl = pnl_backtest(result.ell, oos)
    sig_mat = batch_sig_words(
        np.stack([p.increments() for p in lead_lag_paths(oos)]), list(f.coeffs)
    )
    weights = np.array([f.coeffs[w] for w in f.coeffs])
    payoff = sig_mat @ weights
    resid = payoff - ph.payoff.p0 - pnl
    var_payoff = float(payoff.var(ddof=1))
    var_resid = float(resid.var(ddof=1))

    summary = _base_summary(config)
    summary.update(
        {
            "ell": result.ell.to_strings(),
            "residual_objective": result.residual_objective,
            "oos_paths": ph.backtest_paths,
            "var_payoff": var_payoff,
            "var_residual": var_resid,
            "residual_variance_ratio": var_resid / var_payoff if var_payoff > 0 else None,
            "phi_level": phi_level,
        }
    )
    rows = [[i, float(payoff[i]), float(pnl[i]), float(resid[i])] for i in range(len(oos))]
    return ExperimentResult(
        "hedge", summary, _csv(config, ["path", "payoff", "pnl", "residual"], rows), None
    )


# ---------------------------------------------------------------------------
# colreg
# ---------------------------------------------------------------------------


def run_colreg(config: ExperimentConfig) -> ExperimentResult:
    """RMSE table for the controlled regression estimators."""
    spec = config.colreg
    rows: List[List[object]] = []
    cells_summary = []
    for cell in spec.cells:
        res = rmse_experiment(
            RmseExperimentConfig(
                sigma=cell.sigma,
                rho=cell.rho,
                dependence=cell.dependence,
                n=spec.n,
                reps=spec.reps,
                seed=config.seed,
            )
        )
        for row in res.to_rows():
            rows.append(
                [
                    cell.sigma,
                    cell.rho,
                    cell.dependence,
                    row["estimator"],
                    row["rmse"],
                    row["percent_of_ols"],
                    row["paired_tstat_vs_ols"],
                ]
            )
        cells_summary.append(
            {
                "sigma": cell.sigma,
                "rho": cell.rho,
                "dependence": cell.dependence,
                "rmse": res.rmse,
                "percent_of_ols": res.percent_of_ols,
                "theory_percent": 100.0 * theoretical_rmse_ratio(cell.rho),
            }
        )
    summary = _base_summary(config)
    summary.update({"n": spec.n, "reps": spec.reps, "cells": cells_summary})
    return ExperimentResult(
        "colreg",
        summary,
        _csv(
            config,
            [
                "sigma",
                "rho",
                "dependence",
                "estimator",
                "rmse",
                "percent_of_ols",
                "paired_tstat_vs_ols",
            ],
            rows,
        ),
        None,
    )


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_RUNNERS = {
    "infill": run_infill,
    "consistency": run_consistency,
    "clt": run_clt,
    "density": run_density,
    "variance-reduction": run_variance_reduction,
    "price": run_price,
    "hedge": run_hedge,
    "colreg": run_colreg,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    runner = _RUNNERS.get(config.kind)
    if runner is None:
        raise ValueError(f"unknown experiment kind {config.kind!r}")
    return runner(config)
