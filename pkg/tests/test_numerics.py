import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dbnwp.numerics import (
    NonFiniteError,
    bernoulli_sample,
    check_finite,
    derive_seed,
    gaussian_init,
    make_rng,
    matmul,
    sigmoid,
)


def test_matmul_examples():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(np.eye(2), a), a)
    assert np.array_equal(matmul(a, [[0], [1]]), [[2], [4]])
    assert np.array_equal(matmul(np.zeros((2, 3)), np.ones((3, 4))), np.zeros((2, 4)))


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(np.ones((2, 3)), np.ones((2, 2)))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_matmul_rejects_non_finite():
    with pytest.raises(NonFiniteError):
        matmul([[1e308]], [[1e308]])


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(800.0) == 1.0
    assert sigmoid(-800.0) > 0.0 or sigmoid(-800.0) == 0.0
    assert abs(sigmoid(1.0) - 1 / (1 + np.exp(-1.0))) < 1e-16
    assert np.isscalar(sigmoid(2.0))


@given(st.floats(-700, 700))
def test_sigmoid_symmetry_and_range(x):
    s = sigmoid(x)
    assert 0.0 <= s <= 1.0
    assert abs(s + sigmoid(-x) - 1.0) < 1e-15


def test_sigmoid_never_warns():
    with np.errstate(over="raise", invalid="raise"):
        out = sigmoid(np.array([-1e6, -50.0, 0.0, 50.0, 1e6]))
    assert np.all(np.diff(out) >= 0)


def test_bernoulli_edges_and_errors():
    rng = make_rng(0)
    assert np.array_equal(bernoulli_sample(np.zeros(50), rng), np.zeros(50))
    assert np.array_equal(bernoulli_sample(np.ones(50), rng), np.ones(50))
    with pytest.raises(ValueError):
        bernoulli_sample([0.5, 1.2], rng)
    with pytest.raises(ValueError):
        bernoulli_sample([np.nan], rng)


def test_bernoulli_frequency():
    draws = bernoulli_sample(np.full(200_000, 0.3), make_rng(1))
    assert abs(draws.mean() - 0.3) < 0.005


def test_rng_determinism_and_frozen_stream():
    assert make_rng(42).random(3).tolist() == [0.7739560485559633, 0.4388784397520523, 0.8585979199113825]
    a = bernoulli_sample(np.full(20, 0.5), make_rng(9))
    b = bernoulli_sample(np.full(20, 0.5), make_rng(9))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        make_rng(-1)
    assert derive_seed(5, 3) == 8


def test_gaussian_init():
    assert np.array_equal(gaussian_init(3, 4, 0.0, make_rng(0)), np.zeros((3, 4)))
    w = gaussian_init(400, 500, 0.01, make_rng(0))
    assert w.shape == (400, 500)
    assert abs(w.std() - 0.01) < 2e-4
    assert abs(w.mean()) < 1e-4
    with pytest.raises(ValueError):
        gaussian_init(2, 2, -1.0, make_rng(0))


def test_check_finite():
    with pytest.raises(NonFiniteError):
        check_finite(np.array([1.0, np.inf]))
