import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.interpolate import PchipInterpolator

from chlim.core import GridSpec
from chlim.lab import COARSE_N, random_ic, smoothed_ic
from chlim.pchip import pchip_eval, pchip_slopes

values = arrays(float, st.integers(2, 30), elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=80)
@given(values, st.integers(0, 2**32 - 1))
def test_matches_scipy(y, seed):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.uniform(0.1, 1.0, len(y)))
    xi = rng.uniform(x[0], x[-1], 50)
    with np.errstate(over="ignore"):  # scipy divides by subnormal secants
        ref = PchipInterpolator(x, y)
    np.testing.assert_allclose(pchip_slopes(x, y), ref.derivative()(x), rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(pchip_eval(x, y, xi), ref(xi), rtol=1e-10, atol=1e-10)


@given(values)
def test_reproduces_nodes_exactly(y):
    x = np.arange(len(y), dtype=float)
    np.testing.assert_array_equal(pchip_eval(x, y, x), y)


def test_linear_data_reproduced():
    x = np.linspace(0, 1, 9)
    xi = np.linspace(0, 1, 101)
    np.testing.assert_allclose(pchip_eval(x, 0.3 - 2.0 * x, xi), 0.3 - 2.0 * xi, rtol=1e-14, atol=1e-14)


def test_constant_extrapolation():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, 3.0, 2.0])
    np.testing.assert_array_equal(pchip_eval(x, y, [-5.0, -0.1, 2.1, 9.0]), [1.0, 1.0, 2.0, 2.0])
    cubic = pchip_eval(x, y, [-0.1], extrapolate="cubic")
    assert cubic[0] != 1.0
    with pytest.raises(ValueError):
        pchip_eval(x, y, [0.5], extrapolate="linear")
    with pytest.raises(ValueError):
        pchip_eval([0.0, 0.0, 1.0], y, [0.5])


def test_no_overshoot_on_monotone_segments():
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = np.cumsum(rng.uniform(0.1, 1.0, 6))
        y = np.cumsum(rng.uniform(0.0, 1.0, 6)) * rng.choice([-1, 1])
        xi = np.linspace(x[0], x[-1], 400)
        vals = pchip_eval(x, y, xi)
        steps = np.diff(vals) * np.sign(y[-1] - y[0])
        assert np.all(steps >= -1e-12)
        assert vals.min() >= y.min() - 1e-12 and vals.max() <= y.max() + 1e-12


def test_no_new_extrema_between_nodes():
    rng = np.random.default_rng(6)
    x = np.arange(20.0)
    y = rng.uniform(0, 1, 20)
    for k in range(19):
        xi = np.linspace(x[k], x[k + 1], 50)
        seg = pchip_eval(x, y, xi)
        lo, hi = min(y[k], y[k + 1]), max(y[k], y[k + 1])
        assert seg.min() >= lo - 1e-12 and seg.max() <= hi + 1e-12


def test_smoothed_ic():
    coarse = random_ic(GridSpec(COARSE_N), 4)
    np.testing.assert_array_equal(smoothed_ic(coarse, GridSpec(COARSE_N)), coarse)
    fine = smoothed_ic(coarse, GridSpec(256))
    assert fine.shape == (256,)
    assert fine.min() >= coarse.min() and fine.max() <= coarse.max()
    # fine nodes beyond the outermost coarse nodes take the end values
    assert fine[0] == coarse[0] and fine[-1] == coarse[-1]
    lin = 0.2 + 0.5 * GridSpec(COARSE_N).nodes
    np.testing.assert_allclose(smoothed_ic(lin, GridSpec(512))[4:-4], 0.2 + 0.5 * GridSpec(512).nodes[4:-4], rtol=1e-14)
    with pytest.raises(ValueError):
        smoothed_ic(coarse, GridSpec(32))
