import numpy as np
import pytest

from expsig.tensor import (
    Functional,
    ShapeMismatchError,
    TensorSeries,
    batch_coeff,
    batch_signature,
    pair,
    tensor_exp,
    tensor_product,
)
from expsig.words import Word


def random_series(rng, d, K):
    return TensorSeries(d, K, [rng.uniform(-1, 1, d**k) for k in range(K + 1)])


def test_unit_law():
    rng = np.random.default_rng(0)
    B = random_series(rng, 2, 3)
    unit = TensorSeries.unit(2, 3)
    assert tensor_product(unit, B).max_abs_diff(B) == 0.0
    assert tensor_product(B, unit).max_abs_diff(B) == 0.0


def test_one_dim_exponentials_multiply_like_exp():
    prod = tensor_product(tensor_exp([1.0], 2), tensor_exp([2.0], 2))
    assert [lvl.tolist() for lvl in prod.levels] == [[1.0], [3.0], [4.5]]


def test_two_dim_exponential_product_by_hand():
    prod = tensor_product(tensor_exp([1.0, 0.0], 2), tensor_exp([0.0, 1.0], 2))
    assert prod.coeff(Word((1, 2), 2)) == pytest.approx(1.0)
    assert prod.coeff(Word((2, 1), 2)) == pytest.approx(0.0)


def test_tensor_exp_values():
    s = tensor_exp([2.0], 3)
    assert s.flat().tolist() == [1.0, 2.0, 2.0, pytest.approx(4 / 3)]
    zero = tensor_exp([0.0, 0.0], 2)
    assert zero.max_abs_diff(TensorSeries.unit(2, 2)) == 0.0
    ones = tensor_exp([1.0, 1.0], 2)
    assert np.allclose(ones.levels[2], 0.5)


def test_pair_examples():
    unit_fun = Functional(2, 2, {Word((), 2): 1.0})
    sig = tensor_exp([0.3, -0.2], 2)
    assert pair(unit_fun, sig) == 1.0
    f = Functional(1, 1, {Word((1,), 1): 3.0})
    assert pair(f, tensor_exp([2.0], 1)) == pytest.approx(6.0)
    g = Functional(1, 2, {Word((1, 1), 1): 1.0, Word((1,), 1): -1.0})
    assert pair(g, tensor_exp([2.0], 2)) == pytest.approx(0.0)


def test_pair_word_outside_truncation():
    f = Functional(1, 3, {Word((1, 1, 1), 1): 1.0})
    with pytest.raises(ValueError):
        pair(f, tensor_exp([1.0], 2))


def test_associativity_random_triples():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = int(rng.integers(1, 4))
        K = int(rng.integers(0, 5))
        A, B, C = (random_series(rng, d, K) for _ in range(3))
        left = tensor_product(tensor_product(A, B), C)
        right = tensor_product(A, tensor_product(B, C))
        assert left.max_abs_diff(right) < 1e-12


def test_exp_inverse():
    rng = np.random.default_rng(4)
    for _ in range(10):
        d = int(rng.integers(1, 4))
        x = rng.uniform(-1, 1, d)
        prod = tensor_product(tensor_exp(x, 4), tensor_exp(-x, 4))
        assert prod.max_abs_diff(TensorSeries.unit(d, 4)) < 1e-12


def test_exp_agrees_with_power_series():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, 3)
    K = 4
    lvl1 = TensorSeries.zero(3, K)
    lvl1.levels[1] = x.copy()
    term = TensorSeries.unit(3, K)
    series = TensorSeries.unit(3, K)
    for k in range(1, K + 1):
        term = tensor_product(term, lvl1) * (1.0 / k)
        series = series + term
    assert series.max_abs_diff(tensor_exp(x, K)) < 1e-12


def test_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        tensor_product(TensorSeries.unit(2, 2), TensorSeries.unit(2, 3))
    with pytest.raises(ShapeMismatchError):
        tensor_product(TensorSeries.unit(2, 2), TensorSeries.unit(3, 2))


def test_flat_round_trip():
    rng = np.random.default_rng(6)
    s = random_series(rng, 2, 3)
    back = TensorSeries.from_flat(2, 3, s.flat())
    assert back.max_abs_diff(s) == 0.0


def test_batch_signature_matches_sequential_product():
    rng = np.random.default_rng(7)
    inc = rng.standard_normal((4, 6, 2))
    levels = batch_signature(inc, 3)
    for i in range(4):
        expected = TensorSeries.unit(2, 3)
        for m in range(6):
            expected = tensor_product(expected, tensor_exp(inc[i, m], 3))
        got = TensorSeries(2, 3, [lvl[i].copy() for lvl in levels])
        assert got.max_abs_diff(expected) < 1e-12
    w = Word((1, 2), 2)
    col = batch_coeff(levels, w)
    assert col.shape == (4,)
