import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chlim.banded import BandedLU, BandedOperator, SolverFailure, banded_lu_solve
from conftest import random_banded


def test_from_dense_round_trip(rng):
    op, a = random_banded(rng, 9, 2, 1)
    np.testing.assert_array_equal(op.to_dense(), a)
    assert op.entry(3, 1) == a[3, 1]
    assert op.entry(0, 5) == 0.0


def test_from_diagonals_matches_dense():
    op = BandedOperator.from_diagonals({0: [1, 2, 3, 4], 1: [5, 6, 7], -2: [8, 9]})
    expected = np.diag([1.0, 2, 3, 4]) + np.diag([5.0, 6, 7], 1) + np.diag([8.0, 9], -2)
    np.testing.assert_array_equal(op.to_dense(), expected)
    with pytest.raises(ValueError):
        BandedOperator.from_diagonals({0: [1, 2, 3], 1: [1]})


def test_bands_are_read_only(rng):
    op, _ = random_banded(rng, 6)
    with pytest.raises(ValueError):
        op.bands[0, 0] = 1.0


def test_identity_matvec(rng):
    v = rng.standard_normal(7)
    np.testing.assert_array_equal(BandedOperator.identity(7) @ v, v)


@given(st.integers(1, 12), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_matvec_matches_dense(n, lower, upper, seed):
    rng = np.random.default_rng(seed)
    op, a = random_banded(rng, n, lower, upper)
    v = rng.standard_normal(n)
    np.testing.assert_allclose(op @ v, a @ v, rtol=1e-14, atol=1e-14 * np.abs(a).sum() * np.abs(v).max())


def test_bandwidth_wider_than_matrix(rng):
    a = rng.standard_normal((2, 2))
    op = BandedOperator.from_dense(a, 3, 3)
    v = rng.standard_normal(2)
    np.testing.assert_allclose(op @ v, a @ v, rtol=1e-15)
    np.testing.assert_array_equal(op.to_dense(), a)
    assert op.diag(-3).size == 0


def test_matvec_dimension_mismatch(rng):
    op, _ = random_banded(rng, 5)
    with pytest.raises(ValueError):
        op @ np.ones(4)


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_one_norm_is_exact_column_sum(n, seed):
    op, a = random_banded(np.random.default_rng(seed), n)
    assert op.one_norm == np.abs(a).sum(axis=0).max()


def test_arithmetic_matches_dense(rng):
    op, a = random_banded(rng, 8, 1, 2)
    other, b = random_banded(rng, 8, 2, 0)
    w = rng.standard_normal(8)
    np.testing.assert_allclose(op.scaled(-3.0).to_dense(), -3.0 * a)
    np.testing.assert_allclose(op.column_scaled(w).to_dense(), a @ np.diag(w))
    np.testing.assert_allclose(op.plus(other, 0.5).to_dense(), a + 0.5 * b)
    np.testing.assert_allclose(op.shifted(2.0).to_dense(), 2.0 * np.eye(8) + a)
    np.testing.assert_allclose(op.compose(other).to_dense(), a @ b, atol=1e-13)
    np.testing.assert_allclose(op.compose(op).to_dense(), a @ a, atol=1e-13)


def test_symmetric_flag_propagates(rng):
    a = rng.standard_normal((6, 6))
    a = np.triu(np.tril(a + a.T, 1), -1)
    op = BandedOperator.from_dense(a, 1, 1, symmetric=True)
    sq = op.compose(op)
    assert sq.symmetric
    d = sq.to_dense()
    np.testing.assert_array_equal(d, d.T)


def test_identity_solve():
    r = np.arange(5.0)
    np.testing.assert_array_equal(banded_lu_solve(BandedOperator.identity(5), r), r)


def test_pentadiagonal_solve_matches_dense(rng):
    m = rng.standard_normal((8, 8))
    spd = m @ m.T + 8 * np.eye(8)
    spd = np.triu(np.tril(spd, 2), -2)
    spd += np.diag(np.abs(spd).sum(axis=1))
    op = BandedOperator.from_dense(spd, 2, 2, symmetric=True)
    rhs = rng.standard_normal(8)
    np.testing.assert_allclose(banded_lu_solve(op, rhs), np.linalg.solve(spd, rhs), rtol=1e-12)


@settings(max_examples=60)
@given(st.integers(1, 40), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_solve_residual_contract(n, lower, upper, seed):
    rng = np.random.default_rng(seed)
    op, _ = random_banded(rng, n, lower, upper, dominant=True)
    rhs = rng.standard_normal(n)
    x = BandedLU(op).solve(rhs)
    bound = 1e-10 * (op.one_norm * np.abs(x).max() + np.abs(rhs).max())
    assert np.abs(op @ x - rhs).max() <= bound


def test_partial_pivoting_handles_zero_diagonal():
    # leading zero on the diagonal needs a row swap
    a = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    op = BandedOperator.from_dense(a, 1, 1)
    rhs = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(banded_lu_solve(op, rhs), np.linalg.solve(a, rhs), rtol=1e-14)


def test_singular_raises():
    a = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SolverFailure):
        BandedLU(BandedOperator.from_dense(a, 1, 1))


def test_nearly_singular_raises():
    a = np.diag([1.0, 1e-300, 1.0])
    with pytest.raises(SolverFailure):
        BandedLU(BandedOperator.from_dense(a, 0, 0))
