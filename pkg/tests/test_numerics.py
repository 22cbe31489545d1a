import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lean_tvr.errors import DimensionError, NonFiniteError
from lean_tvr.numerics import (SeededRng, activation, as_matrix, finite_diff_grad, gaussian_sample,
                               l2_normalize_rows, leaky_relu, log_softmax, matmul, relative_error,
                               relu, sigmoid, softmax)

finite = st.floats(-50, 50, allow_nan=False)


class TestMatmul:
    def test_identity(self):
        np.testing.assert_array_equal(matmul([[1, 0], [0, 1]], [[5, 6], [7, 8]]), [[5, 6], [7, 8]])

    def test_row_times_column(self):
        np.testing.assert_array_equal(matmul([[1, 2]], [[3], [4]]), [[11]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.ones((2, 3)), np.ones((2, 2)))

    def test_as_matrix_rejects_nan(self):
        with pytest.raises(NonFiniteError):
            as_matrix([[1.0, np.nan]])


class TestActivations:
    def test_leaky(self):
        assert activation(np.array(-2.0), "leaky_relu", 0.01) == pytest.approx(-0.02)

    def test_relu_passthrough(self):
        assert activation(np.array(3.0), "relu") == 3.0

    def test_sigmoid_zero(self):
        assert activation(np.array([0.0]), "sigmoid")[0] == 0.5

    def test_sigmoid_tails_finite(self):
        out = sigmoid(np.array([-800.0, 800.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(0.0) and out[1] == 1.0

    def test_bad_slope(self):
        with pytest.raises(ValueError):
            activation(np.array([1.0]), "leaky_relu", 1.5)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            activation(np.array([1.0]), "tanh")

    @given(arrays(np.float64, st.integers(1, 20), elements=finite))
    def test_relu_nonnegative_and_leaky_sign(self, x):
        assert np.all(relu(x) >= 0)
        assert np.all(np.sign(leaky_relu(x)) == np.sign(x))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    def test_ln2(self):
        np.testing.assert_allclose(softmax([math.log(2), 0.0]), [2 / 3, 1 / 3], atol=1e-15)

    def test_large_inputs_no_overflow(self):
        np.testing.assert_allclose(softmax([1000.0, 1000.0]), [0.5, 0.5])

    def test_empty(self):
        with pytest.raises(ValueError):
            softmax([])

    @given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-500, 500)))
    def test_is_distribution(self, v):
        p = softmax(v)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) < 1e-12

    def test_log_softmax_matches(self, gen):
        v = gen.standard_normal((4, 5))
        np.testing.assert_allclose(np.exp(log_softmax(v, axis=1)).sum(axis=1), 1.0)
        np.testing.assert_allclose(log_softmax(v, axis=0), np.log(np.apply_along_axis(softmax, 0, v)))


class TestL2Normalize:
    def test_345(self):
        np.testing.assert_allclose(l2_normalize_rows([[3.0, 4.0]]), [[0.6, 0.8]])

    def test_zero_row(self):
        np.testing.assert_array_equal(l2_normalize_rows([[0.0, 0.0]]), [[0.0, 0.0]])

    def test_unit_row_unchanged(self):
        np.testing.assert_allclose(l2_normalize_rows([[0.0, 1.0, 0.0]]), [[0.0, 1.0, 0.0]])

    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
    def test_idempotent(self, m):
        once = l2_normalize_rows(m)
        np.testing.assert_allclose(l2_normalize_rows(once), once, atol=1e-12)


class TestSeededRng:
    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(gaussian_sample(SeededRng(4), 3, 5), gaussian_sample(SeededRng(4), 3, 5))

    def test_different_seeds_differ(self):
        assert not np.array_equal(gaussian_sample(SeededRng(1), 3, 3), gaussian_sample(SeededRng(2), 3, 3))

    def test_children_independent_and_stable(self):
        a = SeededRng(9)
        assert not np.array_equal(a.child(0).normal(4), a.child(1).normal(4))
        np.testing.assert_array_equal(a.child(3).normal(4), SeededRng(9).child(3).normal(4))

    def test_moments(self):
        x = gaussian_sample(SeededRng(11), 1, 100_000)
        assert abs(x.mean()) < 0.02
        assert abs(x.var() - 1.0) < 0.02


class TestFiniteDiff:
    def test_square(self):
        assert finite_diff_grad(lambda t: float(t[0] ** 2), np.array([3.0]), 1e-4)[0] == pytest.approx(6.0, abs=1e-6)

    def test_constant(self):
        np.testing.assert_array_equal(finite_diff_grad(lambda t: 7.0, np.ones(4)), np.zeros(4))

    def test_sum(self):
        np.testing.assert_allclose(finite_diff_grad(lambda t: float(t.sum()), np.arange(5.0)), np.ones(5))

    @settings(max_examples=25)
    @given(arrays(np.float64, st.integers(1, 32), elements=st.floats(-10, 10)))
    def test_half_norm(self, theta):
        g = finite_diff_grad(lambda t: 0.5 * float(t @ t), theta)
        np.testing.assert_allclose(g, theta, atol=1e-6)

    def test_nonfinite_raises(self):
        with pytest.raises(NonFiniteError):
            finite_diff_grad(lambda t: float("inf"), np.zeros(1))

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda t: 0.0, np.zeros(1), eps=0.0)

    def test_relative_error_floor(self):
        np.testing.assert_allclose(relative_error(np.array([0.0, 2.0]), np.array([1e-9, 1.0])), [0.1, 0.5])
