import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oufpt import kernels as k
from oufpt.errors import InfiniteTime, InvalidParams

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def mp_phi(x, xp, b, sign):
    # sign=+1: forward in theta, sign=-1: backward in vartheta
    with mp.workdps(50):
        x, xp, b = mp.mpf(x), mp.mpf(xp), mp.mpf(b)
        s = 2 + sign * (x + xp)
        return float(2 * b / mp.sqrt(mp.pi) * mp.exp(-b * b * (x - xp) / s) * (1 + sign * xp) / s**1.5)


def mp_forcing(theta, z, b):
    with mp.workdps(50):
        th = mp.mpf(theta)
        q = (1 + th) ** 2 - 1
        return float(mp.exp(-((1 + th) * b - z) ** 2 / q) / mp.sqrt(mp.pi * q))


def test_phi_forward_examples():
    assert k.phi_forward(0.7, 0.2, 0.0) == 0.0
    assert k.phi_forward(0.0, 0.0, 1.0) == pytest.approx(INV_SQRT_2PI, rel=1e-15)
    assert k.phi_forward(0.5, 0.25, 1.0) == pytest.approx(mp_phi(0.5, 0.25, 1.0, +1), rel=1e-14)


def test_phi_backward_examples():
    assert k.phi_backward(0.7, 0.2, 0.0) == 0.0
    assert k.phi_backward(0.0, 0.0, 1.0) == pytest.approx(INV_SQRT_2PI, rel=1e-15)
    assert k.phi_backward(0.5, 0.25, 1.0) == pytest.approx(mp_phi(0.5, 0.25, 1.0, -1), rel=1e-14)
    with pytest.raises(InfiniteTime):
        k.phi_backward(1.0, 0.5, 1.0)


def test_forward_forcing_examples():
    assert k.forward_forcing(0.0, 2.0, 1.0) == 0.0
    assert k.forward_forcing(1e-6, 2.0, 1.0) == 0.0
    assert k.forward_forcing(1.0, 2.0, 0.0) == pytest.approx(math.exp(-4.0 / 3.0) / math.sqrt(3.0 * math.pi), rel=1e-15)
    assert k.forward_forcing(0.5, 2.0, 1.0) == pytest.approx(mp_forcing(0.5, 2.0, 1.0), rel=1e-14)
    with pytest.raises(InvalidParams):
        k.forward_forcing(0.5, 1.0, 2.0)


def test_forcing_accurate_for_tiny_theta():
    # (1+theta)^2 - 1 must not be formed by subtraction
    for th in (1e-9, 1e-7, 1e-5):
        assert k.forward_forcing(th, 1e-3, 0.0) == pytest.approx(mp_forcing(th, 1e-3, 0.0), rel=1e-12)


def test_spec_wiring():
    fs = k.forward_spec(2.0, 1.0, 3.0)
    assert fs.regular_kernel(0.5, 0.25) == pytest.approx(-k.phi_forward(0.5, 0.25, 1.0))
    assert fs.forcing(np.array([0.5]))[0] == pytest.approx(-k.forward_forcing(0.5, 2.0, 1.0))
    bs = k.backward_spec(0.0, 0.9)
    assert np.all(bs.regular_kernel(0.5, np.linspace(0.0, 0.5, 5)) == 0.0)
    assert np.all(bs.forcing(np.linspace(0.0, 0.9, 5)) == 1.0)
    f0 = k.forward_spec(2.0, 0.0, 3.0)
    theta = np.linspace(0.1, 3.0, 7)
    expected = -np.exp(-4.0 / ((1 + theta) ** 2 - 1)) / np.sqrt(np.pi * ((1 + theta) ** 2 - 1))
    np.testing.assert_allclose(f0.forcing(theta), expected, rtol=1e-12)
    with pytest.raises(InvalidParams):
        k.forward_spec(1.0, 1.0, 1.0)
    with pytest.raises(InvalidParams):
        k.backward_spec(0.5, 1.0)


@given(
    st.floats(0.0, 50.0), st.floats(0.0, 1.0), st.floats(-3.0, 3.0)
)
def test_forward_kernel_bounds(theta, frac, b):
    tp = theta * frac
    val = k.phi_forward(theta, tp, b)
    bound = 2 * abs(b) / math.sqrt(math.pi) * (1 + tp) / (2 + theta + tp) ** 1.5
    assert math.isfinite(val)
    assert abs(val) <= bound * (1 + 1e-14)


@given(st.floats(0.0, 100.0), st.floats(-3.0, 3.0))
def test_kernel_diagonal_is_finite(x, b):
    assert k.phi_forward(x, x, b) == pytest.approx(
        2 * b / math.sqrt(math.pi) * (1 + x) / (2 + 2 * x) ** 1.5, rel=1e-14, abs=1e-300
    )
    v = x / (1.0 + x)  # some point of [0, 1)
    assert math.isfinite(k.phi_backward(v, v, b))


@pytest.mark.parametrize("b", [-1.0, 0.5, 2.0])
def test_small_coordinate_limit_is_abel_kernel(b):
    eps = 1e-9
    assert k.phi_forward(eps, eps / 2, b) == pytest.approx(b * INV_SQRT_2PI, rel=1e-8)
    assert k.phi_backward(eps, eps / 2, b) == pytest.approx(b * INV_SQRT_2PI, rel=1e-8)
    assert k.abel_forward_spec(3.0, b, 1.0).regular_kernel(0.1, np.array([0.0]))[0] == pytest.approx(
        -b * INV_SQRT_2PI
    )
    assert k.abel_backward_spec(b, 0.5).regular_kernel(0.1, np.array([0.0]))[0] == pytest.approx(b * INV_SQRT_2PI)


def test_boundary_slope_identity():
    rng = np.random.default_rng(3)
    tau = rng.uniform(0.0, 50.0, 100)
    taup = tau * rng.uniform(0.0, 0.999, 100)
    b = 1.3

    def boundary(t):
        return b * np.sqrt(2.0 * t + 1.0)

    lhs = (boundary(tau) - boundary(taup)) / (tau - taup)
    rhs = 2.0 * b / (np.sqrt(2.0 * tau + 1.0) + np.sqrt(2.0 * taup + 1.0))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_lag_kernel_matches_vartheta_kernel():
    # the plain-time kernel is the vartheta kernel times the Jacobian of the substitution
    b = 0.7
    for t, tp in [(0.3, 0.1), (2.0, 0.5), (5.0, 4.9)]:
        v, vp = -math.expm1(-t), -math.expm1(-tp)
        via_vartheta = k.phi_backward(v, vp, b) * math.exp(-tp) * math.sqrt((t - tp) / (v - vp))
        assert k.backward_lag_kernel(t - tp, b) == pytest.approx(via_vartheta, rel=1e-12)
    assert k.backward_lag_kernel(0.0, b) == pytest.approx(b * INV_SQRT_2PI, rel=1e-15)
    with pytest.raises(InvalidParams):
        k.backward_time_spec(b, 0.0)
