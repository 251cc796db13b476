import numpy as np
import pytest

from expsig.estimators import (
    DegenerateControlError,
    c2_components,
    corrected_expected_signature,
    cov0_via_shuffle,
    estimate_c1,
    estimate_c1_centered,
    estimate_c2,
    expected_signature,
    hac_long_run_cov,
    mse_diff_diagnostic,
    with_hac,
)
from expsig.paths import Partition, PiecewiseLinearPath, dyadic_partition, qv_augment
from expsig.processes import simulate_bm_batch
from expsig.signatures import batch_control_terms, sig_word
from expsig.words import Word, shuffle


def bm_increments(n, level=5, d=1, seed=101, offset=0):
    return simulate_bm_batch(d, dyadic_partition(1.0, level), seed, n, offset)


def test_expected_signature_single_path():
    inc = bm_increments(1)
    words = [Word((1,), 1), Word((1, 1), 1)]
    rep = expected_signature(inc, words)
    samples = np.zeros((inc.shape[1] + 1, 1))
    samples[1:] = np.cumsum(inc[0], axis=0)
    p = PiecewiseLinearPath(dyadic_partition(1.0, 5), samples)
    assert rep.phi_hat[0] == pytest.approx(sig_word(p, words[0]))
    assert rep.phi_hat[1] == pytest.approx(sig_word(p, words[1]))
    assert rep.n == 1


def test_expected_signature_bm_level_one_and_two():
    inc = bm_increments(10_000)
    rep = expected_signature(inc, [Word((1,), 1), Word((1, 1), 1)])
    se = rep.standard_errors()
    assert abs(rep.phi_hat[0] - 0.0) < 3 * se[0]
    assert abs(rep.phi_hat[1] - 0.5) < 3 * se[1]


def test_expected_signature_empty_input():
    with pytest.raises(ValueError):
        expected_signature(np.zeros((0, 4, 1)), [Word((1,), 1)])


def test_corrected_with_zero_c_matches_naive():
    inc = bm_increments(500)
    words = [Word((1, 1), 1)]
    naive = expected_signature(inc, words)
    corr = corrected_expected_signature(inc, words, c_mode="fixed", c_fixed=0.0)
    assert corr.phi_hat[0] == naive.phi_hat[0]
    assert np.array_equal(corr.per_sample, naive.per_sample)


def test_level_one_control_with_unit_c_vanishes():
    inc = bm_increments(200)
    corr = corrected_expected_signature(inc, [Word((1,), 1)], c_mode="fixed", c_fixed=1.0)
    assert np.max(np.abs(corr.per_sample)) == 0.0


def test_variance_ratio_matches_correlation():
    inc = bm_increments(10_000)
    w = Word((1, 1), 1)
    corr = corrected_expected_signature(inc, [w], c_mode="c1")
    sig_vals, ctrl_vals = batch_control_terms(inc, [w])
    rho = np.corrcoef(sig_vals[:, 0], ctrl_vals[:, 0])[0, 1]
    assert corr.variance_ratio[0] == pytest.approx(1 - rho**2, rel=0.05)


def test_variance_ratio_exact_with_centered_slope():
    inc = bm_increments(2_000)
    w = Word((1, 1), 1)
    corr = corrected_expected_signature(inc, [w], c_mode="c1", centered=True)
    sig_vals, ctrl_vals = batch_control_terms(inc, [w])
    rho = np.corrcoef(sig_vals[:, 0], ctrl_vals[:, 0])[0, 1]
    # algebraic identity when c is the centered sample-optimal slope
    assert corr.variance_ratio[0] == pytest.approx(1 - rho**2, abs=1e-12)


def test_bias_preservation_across_replications():
    w = Word((1, 1), 1)
    diffs = []
    for r in range(200):
        inc = bm_increments(200, offset=r * 200, seed=51)
        naive = expected_signature(inc, [w])
        corr = corrected_expected_signature(inc, [w], c_mode="c1")
        diffs.append(corr.phi_hat[0] - naive.phi_hat[0])
    diffs = np.array(diffs)
    se = diffs.std(ddof=1) / np.sqrt(len(diffs))
    assert abs(diffs.mean()) < 3 * se


def test_control_mean_zero_for_martingales():
    inc = bm_increments(5_000, d=2, seed=61)
    words = [Word((1, 2), 2), Word((2, 2), 2), Word((1, 1, 2), 2)]
    _, ctrl = batch_control_terms(inc, words)
    for j in range(len(words)):
        t = ctrl[:, j].mean() / (ctrl[:, j].std(ddof=1) / np.sqrt(len(ctrl)))
        assert abs(t) < 3


def test_estimate_c1_examples():
    assert estimate_c1(np.array([2.0, 4.0]), np.array([1.0, 2.0])) == pytest.approx(2.0)
    sc = np.array([0.5, -1.0, 2.0])
    assert estimate_c1(3.5 * sc, sc) == pytest.approx(3.5)
    with pytest.raises(DegenerateControlError):
        estimate_c1(np.array([1.0, 2.0]), np.zeros(2))
    with pytest.raises(DegenerateControlError):
        estimate_c1_centered(np.array([1.0, 2.0]), np.ones(2))


def test_zero_variance_control_falls_back():
    inc = np.zeros((5, 4, 1))  # constant paths: every control is identically zero
    corr = corrected_expected_signature(inc, [Word((1, 1), 1)], c_mode="c1")
    assert corr.c_used[0] == 0.0
    assert corr.fallback_words == ["1.1"]


def test_c2_agrees_with_c1_on_bm():
    inc = bm_increments(10_000, seed=71)
    w = Word((1, 1), 1)
    sig_vals, ctrl_vals = batch_control_terms(inc, [w])
    c1 = estimate_c1(sig_vals[:, 0], ctrl_vals[:, 0])
    c2 = estimate_c2(inc, w)
    assert abs(c2 - c1) < 0.1


def test_c2_deterministic_path_against_brute_force():
    # single path with increments [1, 2]; enumerate the shuffle sets by hand
    inc = np.array([[[1.0], [2.0]]])
    w = Word((1, 1), 1)
    y2, z2 = c2_components(inc, w)

    samples = np.zeros((3, 1))
    samples[1:] = np.cumsum(inc[0], axis=0)
    path = PiecewiseLinearPath(Partition(np.array([0.0, 1.0, 2.0])), samples)
    aug = qv_augment(path)  # dimension 2: letter 1 = X, letter 2 = <X>

    I = Word((1, 1), 2)
    qv_pair = Word((2,), 2)
    num = sum(c * sig_word(aug, u) for u, c in shuffle(I, I).words())
    num -= 0.5 * sum(c * sig_word(aug, u) for u, c in shuffle(I, qv_pair).words())
    I1 = Word((1,), 2)
    den = sum(
        c * sig_word(aug, u.concat(Word((2,), 2))) for u, c in shuffle(I1, I1).words()
    )
    assert y2[0] == pytest.approx(num, rel=1e-10)
    assert z2[0] == pytest.approx(den, rel=1e-10)
    assert estimate_c2(inc, w) == pytest.approx(num / den, rel=1e-10)


def test_c2_rejects_short_words():
    inc = bm_increments(10)
    with pytest.raises(DegenerateControlError):
        estimate_c2(inc, Word((1,), 1))


def test_mse_diff_duplicate_sample_ratio_law():
    inc = bm_increments(400, seed=81)
    w = Word((1, 1), 1)
    stat = mse_diff_diagnostic(inc, w)
    dup = np.concatenate([inc, inc], axis=0)
    stat_dup = mse_diff_diagnostic(dup, w)
    # per-sample content is unchanged; only the 1/N^2 prefactor rescales
    assert stat_dup == pytest.approx(stat / 2, rel=1e-12)


def test_mse_diff_single_sample_rejected():
    inc = bm_increments(1)
    with pytest.raises(ValueError):
        mse_diff_diagnostic(inc, Word((1, 1), 1))


def test_mse_diff_sign_tracks_empirical_mse():
    # oracle: c*_pi from a large independent run, then empirical MSEs of the
    # two estimators across replications; the diagnostic's sign should agree
    # with the empirically better estimator in a clear majority of cases
    w = Word((1, 1), 1)
    big = bm_increments(100_000, seed=91)
    s, sc = batch_control_terms(big, [w])
    c_star = np.cov(s[:, 0], sc[:, 0])[0, 1] / sc[:, 0].var()

    n, reps = 200, 50
    agreements = 0
    err1, err2, stats = [], [], []
    for r in range(reps):
        inc = bm_increments(n, seed=92, offset=r * n)
        sig_vals, ctrl_vals = batch_control_terms(inc, [w])
        c1 = estimate_c1(sig_vals[:, 0], ctrl_vals[:, 0])
        c2 = estimate_c2(inc, w)
        err1.append((c1 - c_star) ** 2)
        err2.append((c2 - c_star) ** 2)
        stats.append(mse_diff_diagnostic(inc, w))
    better_is_c1 = np.mean(err2) > np.mean(err1)
    for st in stats:
        if (st > 0) == better_is_c1:
            agreements += 1
    assert agreements >= 0.6 * reps


def test_hac_iid_recovers_variance():
    inc = bm_increments(4096, seed=111)
    rep = expected_signature(inc, [Word((1, 1), 1)])
    sigma, meta = hac_long_run_cov(rep.per_sample, upsilon=0.2)
    oracle = rep.per_sample[:, 0].var()
    assert abs(sigma[0, 0] / oracle - 1) < 0.15
    assert meta["bandwidth"] == 2


def test_hac_bandwidth_one_keeps_lag_zero_only():
    x = np.array([[1.0], [3.0]])
    sigma, meta = hac_long_run_cov(x, upsilon=0.01)
    assert meta["bandwidth"] == 1
    assert sigma[0, 0] == pytest.approx(np.array([1.0, 3.0]).var())


def test_hac_bandwidth_arithmetic():
    # floor(N^(upsilon/2)); with upsilon < 1 the bandwidth stays below N, so
    # the N-1 clip guard is purely defensive
    x = np.random.default_rng(0).standard_normal((4096, 1))
    _, meta = hac_long_run_cov(x, upsilon=0.5)
    assert meta["bandwidth"] == 8
    assert meta["bandwidth_clipped"] is False
    _, meta2 = hac_long_run_cov(x[:2], upsilon=0.9)
    assert meta2["bandwidth"] == 1


def test_hac_detects_autocorrelation():
    rng = np.random.default_rng(5)
    eps = rng.standard_normal(8192)
    x = eps[1:] + 0.9 * eps[:-1]  # MA(1), long-run var = (1 + 0.9)^2
    sigma, _ = hac_long_run_cov(x[:, None], upsilon=0.5)
    lag0 = x.var()
    assert sigma[0, 0] > lag0 * 1.3
    assert abs(sigma[0, 0] / (1 + 0.9) ** 2 - 1) < 0.25


def test_hac_symmetric_and_lag0_psd():
    inc = bm_increments(512, d=2, seed=121)
    rep = expected_signature(inc, [Word((1,), 2), Word((2,), 2), Word((1, 2), 2)])
    sigma, _ = hac_long_run_cov(rep.per_sample, upsilon=0.5)
    assert np.array_equal(sigma, sigma.T)
    lag0, _ = hac_long_run_cov(rep.per_sample, upsilon=0.01)
    assert np.min(np.linalg.eigvalsh(lag0)) > -1e-12


def test_shuffle_route_equals_direct_lag0():
    inc = bm_increments(1024, d=2, seed=131)
    words = [Word((1,), 2), Word((2,), 2), Word((1, 2), 2)]
    rep = expected_signature(inc, words)
    direct, _ = hac_long_run_cov(rep.per_sample, upsilon=0.01)
    via_shuffle = cov0_via_shuffle(inc, words)
    assert np.max(np.abs(direct - via_shuffle)) < 1e-10


def test_with_hac_attaches_matrix():
    inc = bm_increments(256)
    rep = with_hac(expected_signature(inc, [Word((1,), 1)]), upsilon=0.5)
    assert rep.hac is not None and rep.hac.shape == (1, 1)
    d = rep.to_dict()
    assert "hac" in d and d["n"] == 256


def test_invalid_inputs():
    inc = bm_increments(16)
    with pytest.raises(ValueError):
        corrected_expected_signature(inc, [Word((), 1)], c_mode="c1")
    with pytest.raises(ValueError):
        corrected_expected_signature(inc, [Word((1,), 1)], c_mode="bogus")
    with pytest.raises(ValueError):
        hac_long_run_cov(np.zeros((5, 1)), upsilon=1.5)
    with pytest.raises(ValueError):
        hac_long_run_cov(np.zeros((1, 1)), upsilon=0.5)
