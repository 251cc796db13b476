"""Truncated tensor-series arithmetic.

A :class:`TensorSeries` holds the levels 0..K of an element of the truncated
tensor algebra over R^d as dense per-level vectors (level k has d^k entries
in lexicographic order, matching the word layout).  The batched kernels at
the bottom operate on arrays of shape (N, d^k) and are the hot path for
signature computation.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Dict, List, Sequence

import numpy as np

from .words import Word, WordTable, level_offsets, num_words


class ShapeMismatchError(ValueError):
    """Raised when combining tensor series over different (d, K)."""


@dataclass
class TensorSeries:
    """Levels 0..K of a truncated free-tensor-algebra element over R^d."""

    d: int
    K: int
    levels: List[np.ndarray]

    @classmethod
    def zero(cls, d: int, K: int) -> "TensorSeries":
        return cls(d, K, [np.zeros(d**k) for k in range(K + 1)])

    @classmethod
    def unit(cls, d: int, K: int) -> "TensorSeries":
        out = cls.zero(d, K)
        out.levels[0][0] = 1.0
        return out

    @classmethod
    def from_flat(cls, d: int, K: int, coeffs: np.ndarray) -> "TensorSeries":
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (num_words(d, K),):
            raise ShapeMismatchError(
                f"flat vector of length {coeffs.shape} does not match (d={d}, K={K})"
            )
        offs = level_offsets(d, K)
        levels = [coeffs[offs[k] : offs[k + 1]].copy() for k in range(K + 1)]
        return cls(d, K, levels)

    def flat(self) -> np.ndarray:
        """Dense coefficient vector in word-layout order."""
        return np.concatenate([lvl.ravel() for lvl in self.levels])

    def coeff(self, w: Word) -> float:
        if w.d != self.d:
            raise ShapeMismatchError(f"word over alphabet {w.d}, series over {self.d}")
        if len(w) > self.K:
            raise ValueError(f"word {w} exceeds truncation level {self.K}")
        rank = 0
        for x in w.letters:
            rank = rank * self.d + (x - 1)
        return float(self.levels[len(w)][rank])

    def scalar(self) -> float:
        return float(self.levels[0][0])

    def copy(self) -> "TensorSeries":
        return TensorSeries(self.d, self.K, [lvl.copy() for lvl in self.levels])

    def __add__(self, other: "TensorSeries") -> "TensorSeries":
        self._check(other)
        return TensorSeries(
            self.d, self.K, [a + b for a, b in zip(self.levels, other.levels)]
        )

    def __sub__(self, other: "TensorSeries") -> "TensorSeries":
        self._check(other)
        return TensorSeries(
            self.d, self.K, [a - b for a, b in zip(self.levels, other.levels)]
        )

    def __mul__(self, c: float) -> "TensorSeries":
        return TensorSeries(self.d, self.K, [lvl * c for lvl in self.levels])

    __rmul__ = __mul__

    def max_abs_diff(self, other: "TensorSeries") -> float:
        self._check(other)
        return max(
            float(np.max(np.abs(a - b))) for a, b in zip(self.levels, other.levels)
        )

    def _check(self, other: "TensorSeries") -> None:
        if (self.d, self.K) != (other.d, other.K):
            raise ShapeMismatchError(
                f"series over (d={self.d}, K={self.K}) vs (d={other.d}, K={other.K})"
            )


def tensor_product(A: TensorSeries, B: TensorSeries) -> TensorSeries:
    """Chen (truncated tensor-algebra) product of two series.

    Level k of the result is sum over i+j=k of level_i(A) (x) level_j(B),
    truncated at K.
    """
    A._check(B)
    d, K = A.d, A.K
    out = TensorSeries.zero(d, K)
    for k in range(K + 1):
        acc = out.levels[k]
        for i in range(k + 1):
            j = k - i
            block = np.outer(A.levels[i], B.levels[j]).ravel()
            acc += block
    return out


def tensor_exp(x: Sequence[float], K: int) -> TensorSeries:
    """Tensor exponential of a level-1 element: level k is x^(x)k / k!."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("tensor_exp expects a 1-d level-1 vector")
    d = x.shape[0]
    out = TensorSeries.unit(d, K)
    power = np.ones(1)
    for k in range(1, K + 1):
        power = np.outer(power, x).ravel()
        out.levels[k] = power / factorial(k)
    return out


@dataclass
class Functional:
    """Sparse linear functional on the truncated tensor algebra."""

    d: int
    K: int
    coeffs: Dict[Word, float]

    def __post_init__(self) -> None:
        for w in self.coeffs:
            if w.d != self.d:
                raise ShapeMismatchError(f"word {w} over alphabet {w.d}, functional over {self.d}")
            if len(w) > self.K:
                raise ValueError(f"word {w} exceeds truncation level {self.K}")

    @classmethod
    def from_strings(cls, d: int, K: int, coeffs: Dict[str, float]) -> "Functional":
        from .words import parse_word

        return cls(d, K, {parse_word(s, d): float(v) for s, v in coeffs.items()})

    def to_strings(self) -> Dict[str, float]:
        return {str(w): float(v) for w, v in self.coeffs.items()}

    def scale(self, c: float) -> "Functional":
        return Functional(self.d, self.K, {w: c * v for w, v in self.coeffs.items()})


def pair(f: Functional, S: TensorSeries) -> float:
    """Dual pairing <f, S> = sum over words of f(w) * S(w)."""
    if (f.d, S.d) != (f.d, f.d) or f.d != S.d:
        raise ShapeMismatchError(f"functional over d={f.d}, series over d={S.d}")
    total = 0.0
    for w, v in f.coeffs.items():
        if len(w) > S.K:
            raise ValueError(f"functional word {w} outside series truncation {S.K}")
        total += v * S.coeff(w)
    return total


# ---------------------------------------------------------------------------
# Batched kernels.  Levels are stored as a list of (N, d^k) arrays; the state
# is updated in place by right-multiplication with exp of per-path increments,
# which is the streaming form of the Chen product used for signatures.
# ---------------------------------------------------------------------------


def batch_unit(n: int, d: int, K: int) -> List[np.ndarray]:
    levels = [np.zeros((n, d**k)) for k in range(K + 1)]
    levels[0][:, 0] = 1.0
    return levels


def _increment_powers(x: np.ndarray, K: int) -> List[np.ndarray]:
    """x^(x)j / j! for j = 0..K, for a batch of level-1 increments (N, d)."""
    n, d = x.shape
    powers = [np.ones((n, 1))]
    for j in range(1, K + 1):
        prev = powers[-1]
        nxt = (prev[:, :, None] * x[:, None, :]).reshape(n, -1) / j
        powers.append(nxt)
    return powers


def batch_mul_exp(levels: List[np.ndarray], x: np.ndarray) -> None:
    """In-place right-multiplication S <- S (x) exp_(x)(x), batched over paths.

    Updates from the top level down so lower levels can be read before they
    are overwritten; no per-step allocation beyond the increment powers.
    """
    K = len(levels) - 1
    n, d = x.shape
    powers = _increment_powers(x, K)
    for k in range(K, 0, -1):
        acc = levels[k]
        for j in range(1, k + 1):
            low = levels[k - j]
            acc += (low[:, :, None] * powers[j][:, None, :]).reshape(n, -1)


def batch_signature(increments: np.ndarray, K: int) -> List[np.ndarray]:
    """Truncated signatures of a batch of piecewise-linear paths.

    `increments` has shape (N, M, d): per-path step vectors in time order.
    Returns per-level arrays of shape (N, d^k).
    """
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 3:
        raise ValueError("expected increments of shape (N, M, d)")
    n, m, d = increments.shape
    if n * d ** max(K, 0) > 200_000_000:
        raise OverflowError(
            f"batch of {n} signatures at level {K} over {d} letters exceeds the memory budget"
        )
    levels = batch_unit(n, d, K)
    for step in range(m):
        batch_mul_exp(levels, increments[:, step, :])
    return levels


def batch_coeff(levels: List[np.ndarray], w: Word) -> np.ndarray:
    """Per-path coefficient of one word from batched levels."""
    k = len(w)
    d = w.d
    rank = 0
    for x in w.letters:
        rank = rank * d + (x - 1)
    return levels[k][:, rank]


def batch_flat(levels: List[np.ndarray]) -> np.ndarray:
    return np.concatenate([lvl for lvl in levels], axis=1)


def series_from_batch(levels: List[np.ndarray], i: int, d: int, K: int) -> TensorSeries:
    return TensorSeries(d, K, [lvl[i].copy() for lvl in levels])
