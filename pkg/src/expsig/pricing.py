"""Signature-payoff pricing and linear quadratic hedging.

Letter convention on the lead-lag of the add-time price path (dimension 4
for a scalar price): 1 = time-lead, 2 = price-lead, 3 = time-lag,
4 = price-lag.  The leading block moves first on every interleaved step, so
the price-lead coordinate is the martingale component and the coordinate a
strategy trades against.

A strategy functional ell lives on the add-time alphabet (1 = time,
2 = price).  Its realized left-point PnL equals, pathwise, the signature
coefficient obtained by relabeling the strategy word into the lag block and
appending the price-lead letter: during a lead move the lag block is frozen
at exactly the information available at the trade time.  The hedge solve
assembles its Gram matrix and objective from these words.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .estimators import corrected_expected_signature, expected_signature
from .paths import PiecewiseLinearPath, add_time, lead_lag
from .signatures import path_batch_increments
from .tensor import Functional, TensorSeries
from .words import Word, WordTable, shuffle

TIME_LEAD, PRICE_LEAD, TIME_LAG, PRICE_LAG = 1, 2, 3, 4


class HedgeSolveError(RuntimeError):
    pass


@dataclass
class PricingSpec:
    """Payoff functional on the 4-letter alphabet plus Monte-Carlo settings."""

    f: Functional
    z_t: float = 1.0
    K: int = 2
    n_paths: int = 1000
    correction: bool = True

    def __post_init__(self) -> None:
        if self.z_t <= 0:
            raise ValueError("discount factor must be positive")
        if self.f.d != 4:
            raise ValueError("payoff functional must live on the 4-letter lead-lag alphabet")
        for w in self.f.coeffs:
            if len(w) > self.K:
                raise ValueError(f"payoff word {w} outside truncation {self.K}")


@dataclass
class PriceResult:
    price: float
    standard_error: float
    phi: Dict[str, float]
    c_used: Dict[str, float] = field(default_factory=dict)
    corrected_words: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "price": self.price,
            "standard_error": self.standard_error,
            "phi": self.phi,
            "c_used": self.c_used,
            "corrected_words": self.corrected_words,
        }


@dataclass
class HedgeResult:
    ell: Functional
    residual_objective: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "ell": self.ell.to_strings(),
            "residual_objective": self.residual_objective,
        }


def lead_lag_paths(price_paths: Sequence[PiecewiseLinearPath]) -> List[PiecewiseLinearPath]:
    return [lead_lag(add_time(p)) for p in price_paths]


def strategy_word_to_ll(w: Word) -> Word:
    """Relabel an add-time strategy word into the lag block and append the
    price-lead integration letter."""
    if w.d != 2:
        raise ValueError("strategy words live on the 2-letter add-time alphabet")
    return Word(tuple(x + 2 for x in w.letters) + (PRICE_LEAD,), 4)


def fit_payoff_functional(
    payoffs: np.ndarray,
    signatures: np.ndarray,
    K: int,
    ridge: float = 1e-8,
    drop_tol: float = 1e-9,
) -> Functional:
    """Least-squares payoff approximation on signature features up to level K.

    Features are orthogonalized in word-layout order and columns that are
    (numerically) linear combinations of earlier ones are dropped, so the
    coefficient of a redundant word lands on the earliest word spanning the
    same direction.  `ridge` regularizes the retained system; with ridge = 0
    a singular retained system raises.
    """
    payoffs = np.asarray(payoffs, dtype=float)
    signatures = np.asarray(signatures, dtype=float)
    table = WordTable(4, K)
    if signatures.shape[1] != len(table):
        raise ValueError(
            f"feature matrix has {signatures.shape[1]} columns, expected {len(table)}"
        )
    n = signatures.shape[0]
    retained: List[int] = []
    basis: List[np.ndarray] = []
    for j in range(signatures.shape[1]):
        col = signatures[:, j]
        v = col.copy()
        for q in basis:
            v -= (q @ v) * q
        norm0 = float(np.linalg.norm(col))
        if np.linalg.norm(v) <= drop_tol * max(norm0, 1.0):
            continue
        basis.append(v / np.linalg.norm(v))
        retained.append(j)
    if not retained:
        return Functional(4, K, {})
    if ridge == 0.0 and n < len(retained):
        raise np.linalg.LinAlgError(
            f"{len(retained)} retained features exceed {n} samples and ridge is zero"
        )
    sub = signatures[:, retained]
    gram = sub.T @ sub + ridge * np.eye(len(retained))
    beta = np.linalg.solve(gram, sub.T @ payoffs)
    coeffs = {
        table.word(j): float(b) for j, b in zip(retained, beta) if abs(b) > 0.0
    }
    return Functional(4, K, coeffs)


def price(
    spec: PricingSpec,
    sample_paths: Callable[[int, int], Sequence[PiecewiseLinearPath]],
    seed: int,
) -> PriceResult:
    """Monte-Carlo price <f, Z_T Phi> with optional martingale correction.

    `sample_paths(seed, n)` must return n scalar price paths on a common
    partition.  When correction is on, the control variate is applied to
    every payoff word ending in the price-lead letter (the martingale
    coordinate of the lead-lag embedding).
    """
    paths = sample_paths(seed, spec.n_paths)
    inc = path_batch_increments(lead_lag_paths(paths))
    words = list(spec.f.coeffs)
    weights = np.array([spec.f.coeffs[w] for w in words])
    correctable = [
        j
        for j, w in enumerate(words)
        if spec.correction and len(w) >= 1 and w.letters[-1] == PRICE_LEAD
    ]
    plain = expected_signature(inc, words)
    per_sample = plain.per_sample.copy()
    c_used: Dict[str, float] = {}
    corrected_words: List[str] = []
    if correctable:
        sub = [words[j] for j in correctable]
        corr = corrected_expected_signature(inc, sub, c_mode="c1")
        for col, j in enumerate(correctable):
            per_sample[:, j] = corr.per_sample[:, col]
            c_used[str(words[j])] = float(corr.c_used[col])
            corrected_words.append(str(words[j]))
    # scale by Z_T after averaging so degenerate payoffs stay exact
    per_path_value = per_sample @ weights
    n = per_path_value.size
    se = float(spec.z_t * per_path_value.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    phi = {str(w): float(per_sample[:, j].mean()) for j, w in enumerate(words)}
    return PriceResult(
        price=float(spec.z_t * per_path_value.mean()),
        standard_error=se,
        phi=phi,
        c_used=c_used,
        corrected_words=corrected_words,
    )


def _pair_poly(poly, phi: TensorSeries) -> float:
    total = 0.0
    for w, c in poly.words():
        if len(w) > phi.K:
            raise ValueError(
                f"hedge assembly needs Phi up to level {len(w)}, have {phi.K}"
            )
        total += c * phi.coeff(w)
    return total


def hedge(
    f: Functional,
    p0: float,
    phi: TensorSeries,
    K: int,
    ridge: float = 1e-8,
) -> HedgeResult:
    """Linear signature quadratic hedge against an expected signature Phi.

    Minimizes the shuffle-square objective of (payoff - initial capital -
    strategy PnL) over strategy functionals truncated at floor(K/2); the
    strategy's PnL words are the lag-block relabelings with the price-lead
    integration letter appended.  Phi must extend far enough to pair every
    shuffle (two words of length floor(K/2)+1 in the Gram matrix).
    """
    if phi.d != 4:
        raise ValueError("Phi must live on the 4-letter lead-lag alphabet")
    ell_level = K // 2
    table = WordTable(2, ell_level)
    pnl_words = [strategy_word_to_ll(w) for w in table]
    g = dict(f.coeffs)
    empty = Word((), 4)
    g[empty] = g.get(empty, 0.0) - p0
    g_fun = Functional(4, f.K, {w: v for w, v in g.items()})

    m = len(pnl_words)
    gram = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            val = _pair_poly(shuffle(pnl_words[a], pnl_words[b]), phi)
            gram[a, b] = val
            gram[b, a] = val
    rhs = np.zeros(m)
    for a in range(m):
        total = 0.0
        for u, cu in g_fun.coeffs.items():
            total += cu * _pair_poly(shuffle(pnl_words[a], u), phi)
        rhs[a] = total
    const = 0.0
    for u, cu in g_fun.coeffs.items():
        for v, cv in g_fun.coeffs.items():
            const += cu * cv * _pair_poly(shuffle(u, v), phi)

    coeffs = _solve_ridge(gram, rhs, ridge)
    objective = float(const - 2 * rhs @ coeffs + coeffs @ gram @ coeffs)
    ell = Functional(
        2, ell_level, {w: float(c) for w, c in zip(table, coeffs) if c != 0.0}
    )
    return HedgeResult(ell=ell, residual_objective=objective)


def _solve_ridge(gram: np.ndarray, rhs: np.ndarray, ridge: float) -> np.ndarray:
    eigmin = float(np.min(np.linalg.eigvalsh(0.5 * (gram + gram.T))))
    scale = max(float(np.max(np.abs(gram))), 1.0)
    if eigmin < -1e-6 * scale:
        raise HedgeSolveError(f"Gram matrix indefinite (min eigenvalue {eigmin:.3e})")
    lam = max(ridge, 0.0)
    for _ in range(6):
        try:
            chol = np.linalg.cholesky(gram + lam * np.eye(gram.shape[0]))
            y = np.linalg.solve(chol, rhs)
            return np.linalg.solve(chol.T, y)
        except np.linalg.LinAlgError:
            lam = max(lam * 100.0, 1e-12)
    raise HedgeSolveError("Gram solve failed beyond the ridge ladder")


def pnl_backtest(
    ell: Functional, paths: Sequence[PiecewiseLinearPath]
) -> np.ndarray:
    """Realized left-point PnL of a strategy on raw price paths.

    Per path: sum over steps of the strategy value at the left endpoint,
    read off the add-time prefix signature, times the price increment.
    """
    if ell.d != 2:
        raise ValueError("strategy functional must live on the add-time alphabet")
    if not paths:
        return np.zeros(0)
    if not ell.coeffs:
        return np.zeros(len(paths))
    from .tensor import batch_coeff, batch_mul_exp, batch_unit

    aug = [add_time(p) for p in paths]
    inc = path_batch_increments(aug)
    n, m, _ = inc.shape
    K = max(len(w) for w in ell.coeffs)
    levels = batch_unit(n, 2, K)
    pnl = np.zeros(n)
    ell_words = list(ell.coeffs.items())
    for step in range(m):
        value = np.zeros(n)
        for w, c in ell_words:
            value += c * batch_coeff(levels, w)
        pnl += value * inc[:, step, 1]
        batch_mul_exp(levels, inc[:, step, :])
    return pnl


def ll_signature_matrix(
    price_paths: Sequence[PiecewiseLinearPath], K: int
) -> np.ndarray:
    """Flat signature features of the add-time lead-lag transform, (N, W)."""
    from .tensor import batch_flat, batch_signature

    inc = path_batch_increments(lead_lag_paths(price_paths))
    return batch_flat(batch_signature(inc, K))


def estimate_ll_expected_signature(
    price_paths: Sequence[PiecewiseLinearPath],
    K: int,
    correction: bool = True,
) -> Tuple[TensorSeries, Dict[str, float]]:
    """Expected signature of the lead-lag embedding as a TensorSeries.

    Words ending in the price-lead letter get the control-variate estimator
    when correction is on; all other words use the plain sample mean.
    """
    inc = path_batch_increments(lead_lag_paths(price_paths))
    table = WordTable(4, K)
    words = list(table)
    plain = expected_signature(inc, words)
    values = plain.phi_hat.copy()
    c_used: Dict[str, float] = {}
    if correction:
        correctable = [
            (j, w) for j, w in enumerate(words) if len(w) >= 1 and w.letters[-1] == PRICE_LEAD
        ]
        corr = corrected_expected_signature(inc, [w for _, w in correctable], c_mode="c1")
        for col, (j, w) in enumerate(correctable):
            values[j] = corr.phi_hat[col]
            c_used[str(w)] = float(corr.c_used[col])
    return TensorSeries.from_flat(4, K, values), c_used
