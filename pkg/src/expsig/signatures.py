"""Truncated signatures of piecewise-linear paths.

The main entry point computes the full truncated signature once (streaming
Chen product of step exponentials) and extracts whatever words are needed;
estimators ask for many words of the same path, so this amortizes well.
`signature_causal` recomputes the same value through the level-by-level
causal sum and exists purely as an independent cross-check.
"""

from __future__ import annotations

from math import factorial
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .paths import PiecewiseLinearPath
from .tensor import (
    TensorSeries,
    batch_coeff,
    batch_mul_exp,
    batch_signature,
    batch_unit,
    series_from_batch,
)
from .words import Word


def signature(p: PiecewiseLinearPath, K: int) -> TensorSeries:
    """Signature of the path up to level K (unit series for an empty path)."""
    if K < 0:
        raise ValueError("truncation level must be >= 0")
    levels = batch_signature(p.increments()[None, :, :], K)
    return series_from_batch(levels, 0, p.d, K)


def prefix_signatures(p: PiecewiseLinearPath, K: int) -> List[TensorSeries]:
    """Signatures of the first m segments for m = 0..M (entry 0 is the unit)."""
    inc = p.increments()
    levels = batch_unit(1, p.d, K)
    out = [series_from_batch(levels, 0, p.d, K)]
    for step in range(inc.shape[0]):
        batch_mul_exp(levels, inc[None, step, :])
        out.append(series_from_batch(levels, 0, p.d, K))
    return out


def sig_word(p: PiecewiseLinearPath, I: Word) -> float:
    """The I-coefficient of the path signature."""
    return signature(p, len(I)).coeff(I)


def control_term(p: PiecewiseLinearPath, I: Word) -> float:
    """Ito-style control variate: left-point prefix coefficient at I minus its
    last letter, summed against the last-letter coordinate increments."""
    return float(batch_control_terms(p.increments()[None, :, :], [I])[1][0, 0])


def signature_causal(p: PiecewiseLinearPath, K: int) -> TensorSeries:
    """Signature via the causal level recursion; oracle for `signature`.

    Level k+1 over [0, tau] is the sum over steps [u, v] and i = 0..k of
    S^(k-i)_{[0,u]} (x) X_{u,v}^(x)(i+1) / (i+1)!, which never looks ahead of
    the left endpoint.
    """
    inc = p.increments()
    d = p.d
    m = inc.shape[0]
    # prefix[k][j] = level-k signature coefficient block over the first j steps
    prefix: List[np.ndarray] = [np.ones((m + 1, 1))]
    for k in range(1, K + 1):
        cur = np.zeros((m + 1, d**k))
        for j in range(1, m + 1):
            x = inc[j - 1]
            contrib = np.zeros(d**k)
            power = np.ones(1)
            for i in range(k):
                power = np.outer(power, x).ravel()
                low = prefix[k - 1 - i][j - 1]
                contrib += np.outer(low, power).ravel() / factorial(i + 1)
            cur[j] = cur[j - 1] + contrib
        prefix.append(cur)
    return TensorSeries(d, K, [prefix[k][m].copy() for k in range(K + 1)])


# ---------------------------------------------------------------------------
# Batched word / control extraction, one streaming sweep per batch.
# ---------------------------------------------------------------------------


def batch_sig_words(increments: np.ndarray, words: Sequence[Word]) -> np.ndarray:
    """Per-path signature coefficients for several words, shape (N, len(words))."""
    if len(words) == 0:
        return np.zeros((increments.shape[0], 0))
    K = max(len(w) for w in words)
    levels = batch_signature(increments, K)
    return np.column_stack([batch_coeff(levels, w) for w in words])


def batch_control_terms(
    increments: np.ndarray, words: Sequence[Word]
) -> Tuple[np.ndarray, np.ndarray]:
    """Signature and control coefficients for several words in one sweep.

    Returns (sig_values, control_values), each of shape (N, len(words)).
    The control for word I accumulates, over the steps, the left-endpoint
    prefix coefficient at I minus its last letter times the last-letter
    coordinate increment; for |I| = 1 this telescopes to the total increment.
    """
    increments = np.asarray(increments, dtype=float)
    n, m, d = increments.shape
    for w in words:
        if len(w) < 1:
            raise ValueError("control term undefined for the empty word")
        if w.d != d:
            raise ValueError(f"word over alphabet {w.d}, paths over {d}")
    K = max(len(w) for w in words)
    levels = batch_unit(n, d, K)
    controls = np.zeros((n, len(words)))
    prefix_words = [w.drop_last() for w in words]
    last_coord = [w.letters[-1] - 1 for w in words]
    for step in range(m):
        x = increments[:, step, :]
        for j, pw in enumerate(prefix_words):
            controls[:, j] += batch_coeff(levels, pw) * x[:, last_coord[j]]
        batch_mul_exp(levels, x)
    sigs = np.column_stack([batch_coeff(levels, w) for w in words])
    return sigs, controls


def path_batch_increments(paths: Sequence[PiecewiseLinearPath]) -> np.ndarray:
    """Stack same-shape paths into a (N, M, d) increment array."""
    if not paths:
        raise ValueError("empty path list")
    d = paths[0].d
    m = paths[0].n_steps
    for p in paths:
        if p.d != d or p.n_steps != m:
            raise ValueError("paths in a batch must share dimension and step count")
    return np.stack([p.increments() for p in paths])


def sig_words_of_paths(
    paths: Sequence[PiecewiseLinearPath], words: Sequence[Word]
) -> np.ndarray:
    return batch_sig_words(path_batch_increments(paths), words)


def signature_dict(p: PiecewiseLinearPath, K: int) -> Dict[str, float]:
    """Word-string to coefficient map, the report serialization."""
    from .words import WordTable

    table = WordTable(p.d, K)
    flat = signature(p, K).flat()
    return {str(w): float(flat[i]) for i, w in enumerate(table)}
