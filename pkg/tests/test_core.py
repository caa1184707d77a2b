import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chlim.core import (
    GridSpec,
    ModelParams,
    apply_operator,
    as_field,
    assemble_A,
    assemble_stabilized_operator,
    chemical_potential,
    d2F,
    dF,
    discrete_energy,
    double_well,
    epsilon_of_grid,
    rhs_eval,
    total_mass,
)
from conftest import dense_laplacian, random_banded

finite = st.floats(-3, 3, allow_nan=False)


def test_grid_basics():
    g = GridSpec(64)
    assert g.h * g.n_cells == 1.0
    np.testing.assert_allclose(g.nodes[[0, -1]], [0.5 / 64, 1 - 0.5 / 64])
    with pytest.raises(ValueError):
        GridSpec(3)


def test_model_params_lists_every_problem():
    with pytest.raises(ValueError) as err:
        ModelParams(epsilon=0.0, mobility=-1.0, final_time=0.0)
    for name in ("epsilon", "mobility", "final_time"):
        assert name in str(err.value)


def test_as_field_rejects_bad_input():
    with pytest.raises(ValueError):
        as_field([1.0, np.nan])
    with pytest.raises(ValueError):
        as_field(np.ones((2, 2)))
    with pytest.raises(ValueError):
        as_field(np.ones(3), 4)


def test_laplacian_small_example():
    A = assemble_A(GridSpec(4))
    np.testing.assert_array_equal(A @ np.array([1.0, 2, 4, 8]), [-16, -16, -32, 64])
    np.testing.assert_array_equal(A @ np.full(4, 3.7), 0.0)
    assert A.entry(0, 1) == A.entry(1, 0) == -16.0


@pytest.mark.parametrize("n", [4, 7, 32])
def test_laplacian_matches_ghost_cell_stencil(n):
    np.testing.assert_allclose(assemble_A(GridSpec(n)).to_dense(), dense_laplacian(n), rtol=1e-15)


@given(st.integers(4, 40), st.integers(0, 2**32 - 1))
def test_laplacian_conserves(n, seed):
    A = assemble_A(GridSpec(n))
    v = np.random.default_rng(seed).standard_normal(n)
    av = A @ v
    assert abs(av.sum()) <= 1e-10 * np.abs(av).sum() + 1e-300
    d = A.to_dense()
    np.testing.assert_array_equal(d.sum(axis=0), 0.0)
    np.testing.assert_array_equal(d.sum(axis=1), 0.0)


@pytest.mark.parametrize("n", [4, 9, 16])
def test_operators_are_positive_semidefinite(n):
    grid = GridSpec(n)
    A = assemble_A(grid)
    A_hat = assemble_stabilized_operator(A, ModelParams(epsilon_of_grid(grid.h)), "LSS")
    for op in (A, A_hat):
        d = op.to_dense()
        np.testing.assert_array_equal(d, d.T)
        assert np.linalg.eigvalsh(d).min() >= -1e-10 * op.one_norm


def test_apply_operator_counts(rng):
    op, a = random_banded(rng, 8)
    v = rng.standard_normal(8)
    counter = {}
    out = apply_operator(op, v, counter)
    apply_operator(op, v, counter)
    np.testing.assert_allclose(out, a @ v, rtol=1e-14)
    assert counter["matvecs"] == 2
    with pytest.raises(ValueError):
        apply_operator(op, np.ones(5))


def test_double_well_values():
    assert double_well(0.5) == (1 / 16, 0.0, -1.0)
    assert double_well(0.0) == (0.0, 0.0, 2.0)
    assert double_well(1.0) == (0.0, 0.0, 2.0)
    for root in ((3 - math.sqrt(3)) / 6, (3 + math.sqrt(3)) / 6):
        assert abs(double_well(root)[2]) <= 1e-12


@given(finite)
def test_double_well_derivatives_match_finite_differences(c):
    f, f1, f2 = double_well(c)
    step = 1e-5
    fp, fm = double_well(c + step), double_well(c - step)
    assert f1 == pytest.approx((fp[0] - fm[0]) / (2 * step), rel=1e-6, abs=1e-7)
    assert f2 == pytest.approx((fp[1] - fm[1]) / (2 * step), rel=1e-6, abs=1e-7)
    assert f >= 0
    assert dF(c) == f1 and d2F(c) == f2


def test_epsilon_rule():
    assert epsilon_of_grid(1 / 64) == pytest.approx(1.50095e-2, rel=1e-5)
    assert epsilon_of_grid(0.013, 8) == pytest.approx(2 * epsilon_of_grid(0.013, 4), rel=1e-15)
    ratio = 4 / (2 * math.sqrt(2) * math.log(19) / 2)  # atanh(0.9) = log(19)/2
    for h in (1 / 32, 1 / 512):
        assert epsilon_of_grid(h) / h == pytest.approx(ratio, rel=1e-14)
        assert epsilon_of_grid(h) / h == pytest.approx(0.9606, abs=1e-4)


def test_chemical_potential_and_rhs(rng):
    grid = GridSpec(8)
    params = ModelParams(0.07, mobility=1.5)
    A = assemble_A(grid)
    np.testing.assert_array_equal(chemical_potential(np.zeros(8), params, A), 0.0)
    np.testing.assert_array_equal(chemical_potential(np.full(8, 0.5), params, A), 0.0)
    np.testing.assert_array_equal(rhs_eval(np.full(8, 0.3), params, A), 0.0)
    c = rng.uniform(0, 1, 8)
    d = dense_laplacian(8)
    mu = dF(c) + 0.07**2 * d @ c
    np.testing.assert_allclose(chemical_potential(c, params, A), mu, rtol=1e-14, atol=1e-14 * np.abs(mu).max())
    rhs = -1.5 * d @ mu
    out = rhs_eval(c, params, A)
    np.testing.assert_allclose(out, rhs, rtol=1e-13, atol=1e-13 * np.abs(rhs).max())
    assert abs(out.sum()) <= 1e-10 * np.abs(out).sum()


def test_energy_examples():
    for n in (4, 10, 64):
        grid, params = GridSpec(n), ModelParams(0.1)
        assert discrete_energy(np.zeros(n), params, grid).total == 0.0
        assert discrete_energy(np.ones(n), params, grid).total == 0.0
        assert discrete_energy(np.full(n, 0.5), params, grid).total == pytest.approx(1 / 16, rel=1e-15)
    e = discrete_energy(np.array([0.0, 0, 1, 1]), ModelParams(1.0), GridSpec(4))
    assert (e.gradient_part, e.dividing_part, e.total) == (2.0, 0.0, 2.0)


@given(arrays(float, st.integers(4, 30), elements=finite), st.floats(1e-3, 1.0))
def test_energy_is_nonnegative(c, eps):
    e = discrete_energy(c, ModelParams(eps), GridSpec(len(c)))
    assert e.dividing_part >= 0 and e.gradient_part >= 0
    assert e.total == e.dividing_part + e.gradient_part


def test_literal_energy_variant_uses_first_derivative():
    c = np.array([0.2, 0.4, 0.9, 0.1])
    grid, params = GridSpec(4), ModelParams(0.3)
    lit = discrete_energy(c, params, grid, literal=True)
    assert lit.dividing_part == pytest.approx(grid.h * dF(c).sum(), rel=1e-15)
    assert lit.gradient_part == discrete_energy(c, params, grid).gradient_part


def test_total_mass():
    assert total_mass(np.ones(4), GridSpec(4)) == 1.0
    assert total_mass(np.zeros(6), GridSpec(6)) == 0.0
    assert total_mass(np.array([1.0, 2, 4, 8]), GridSpec(4)) == 15 / 4


def test_stabilized_operators_match_dense(rng):
    n = 9
    grid = GridSpec(n)
    params = ModelParams(epsilon_of_grid(grid.h))
    A = assemble_A(grid)
    d = dense_laplacian(n)
    eps2 = params.epsilon**2
    lss = assemble_stabilized_operator(A, params, "LSS")
    np.testing.assert_allclose(lss.to_dense(), 2 * d + eps2 * d @ d, rtol=1e-13, atol=1e-9)
    assert lss.symmetric and lss.lower == lss.upper == 2
    c = rng.uniform(0, 1, n)
    lie = assemble_stabilized_operator(A, params, "LIE", state=c)
    np.testing.assert_allclose(lie.to_dense(), d @ (np.diag(d2F(c)) + eps2 * d), rtol=1e-13, atol=1e-9)
    with pytest.raises(ValueError):
        assemble_stabilized_operator(A, params, "LIE")


def test_lie_operator_at_zero_state_is_lss_operator():
    grid = GridSpec(16)
    params = ModelParams(epsilon_of_grid(grid.h))
    A = assemble_A(grid)
    lss = assemble_stabilized_operator(A, params, "LSS")
    lie = assemble_stabilized_operator(A, params, "LIE", state=np.zeros(16))
    np.testing.assert_array_equal(lie.bands, lss.bands)


@pytest.mark.parametrize(
    "n, expected", [(32, 2.3e4), (64, 9.3e4), (128, 3.7e5), (256, 1.5e6), (512, 6.0e6)]
)
def test_spectral_bound_table_grid_rule(n, expected):
    grid = GridSpec(n)
    lam = assemble_stabilized_operator(assemble_A(grid), ModelParams(epsilon_of_grid(grid.h)), "LSS").one_norm
    assert float(f"{lam:.1e}") == expected


@pytest.mark.parametrize(
    "n, expected", [(32, 1.2e4), (64, 9.3e4), (128, 1.1e6), (256, 1.6e7), (512, 2.5e8)]
)
def test_spectral_bound_table_fixed_rule(n, expected):
    grid = GridSpec(n)
    lam = assemble_stabilized_operator(assemble_A(grid), ModelParams(epsilon_of_grid(1 / 64)), "LSS").one_norm
    assert float(f"{lam:.1e}") == expected


def test_spectral_bound_scaling():
    grid_rule, fixed_rule = [], []
    for n in (32, 64, 128, 256):
        grid = GridSpec(n)
        A = assemble_A(grid)
        grid_rule.append(assemble_stabilized_operator(A, ModelParams(epsilon_of_grid(grid.h)), "LSS").one_norm * grid.h**2)
        fixed_rule.append(assemble_stabilized_operator(A, ModelParams(epsilon_of_grid(1 / 64)), "LSS").one_norm)
    assert max(grid_rule) / min(grid_rule) <= 1.05
    for coarse, fine in zip(fixed_rule[2:], fixed_rule[3:]):
        assert fine / coarse == pytest.approx(16, rel=0.10)
    fine = assemble_stabilized_operator(
        assemble_A(GridSpec(512)), ModelParams(epsilon_of_grid(1 / 64)), "LSS"
    ).one_norm
    assert fine / fixed_rule[-1] == pytest.approx(16, rel=0.10)
