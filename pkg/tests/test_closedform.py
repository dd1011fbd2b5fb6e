import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oufpt import closedform as cf


def mp_density_b0(t, z, gap=None, shift=0.0):
    gap = z if gap is None else gap
    with mp.workdps(50):
        t = mp.mpf(t)
        s = mp.sinh(t)
        val = gap * mp.exp(shift - mp.exp(-t) * gap**2 / (2 * s) + t / 2) / mp.sqrt(2 * mp.pi * s**3)
        return float(val)


def test_normal_cdf_symmetry_and_centre():
    assert cf.normal_cdf(0.0) == 0.5
    x = np.linspace(-8.0, 8.0, 1601)
    assert np.max(np.abs(cf.normal_cdf(-x) - (1.0 - cf.normal_cdf(x)))) <= 1e-15


def test_normal_cdf_against_high_precision():
    x = np.linspace(-8.0, 8.0, 321)
    with mp.workdps(40):
        ref = np.array([float(mp.ncdf(mp.mpf(v))) for v in x])
    assert np.max(np.abs(cf.normal_cdf(x) - ref)) <= 1e-15


def test_density_b0_examples():
    assert cf.density_b0(0.0, 2.0) == 0.0
    assert cf.density_b0(50.0, 2.0) < 1e-9
    assert cf.density_b0(1.0, 2.0) == pytest.approx(mp_density_b0(1.0, 2.0), rel=1e-14)


@pytest.mark.parametrize("t", [1e-3, 0.01, 0.3, 2.0, 7.5])
@pytest.mark.parametrize("z", [0.5, 2.0, 4.0])
def test_density_b0_high_precision_grid(t, z):
    assert cf.density_b0(t, z) == pytest.approx(mp_density_b0(t, z), rel=1e-13, abs=1e-300)


def test_density_b0_domain():
    with pytest.raises(ValueError):
        cf.density_b0(-1.0, 2.0)
    with pytest.raises(ValueError):
        cf.density_b0(1.0, 0.0)
    assert np.isfinite(cf.density_b0(1e-8, 2.0))


def test_cdf_b0_examples():
    assert cf.cdf_b0(0.0, 2.0) == 0.0
    assert cf.cdf_b0(1e-12, 2.0) == 0.0
    assert cf.cdf_b0(500.0, 2.0) == pytest.approx(1.0, abs=1e-12)
    h = 1e-4
    fd = (cf.cdf_b0(1.0 + h, 2.0) - cf.cdf_b0(1.0 - h, 2.0)) / (2.0 * h)
    assert fd == pytest.approx(cf.density_b0(1.0, 2.0), rel=1e-6)


@pytest.mark.parametrize("z", [1.0, 2.0, 4.0])
def test_density_is_cdf_derivative(z):
    t = np.linspace(0.1, 5.0, 50)
    # the onset exp(-z^2/2t) needs a small step for the difference itself to be accurate
    h = 1e-6
    fd = (cf.cdf_b0(t + h, z) - cf.cdf_b0(t - h, z)) / (2.0 * h)
    g = cf.density_b0(t, z)
    assert np.max(np.abs(fd - g) / g) <= 1e-6


@given(st.lists(st.floats(0.0, 100.0), min_size=2, max_size=30), st.floats(0.01, 6.0))
def test_cdf_b0_is_a_cdf(ts, z):
    t = np.sort(np.array(ts))
    G = cf.cdf_b0(t, z)
    assert np.all((G >= 0.0) & (G <= 1.0))
    assert np.all(np.diff(G) >= 0.0)


def test_leblanc_equals_closed_form_at_b0():
    t = np.linspace(0.02, 5.0, 100)
    for z in (0.5, 2.0):
        np.testing.assert_allclose(cf.leblanc_density(t, z, 0.0), cf.density_b0(t, z), rtol=1e-14)
        np.testing.assert_allclose(cf.leblanc_cdf(t, z, 0.0), cf.cdf_b0(t, z), rtol=1e-14)


def test_leblanc_cdf_exceeds_one_for_positive_barrier():
    assert cf.leblanc_cdf_limit(2.0, 1.0) == pytest.approx(math.e)
    assert cf.leblanc_cdf(200.0, 2.0, 1.0) == pytest.approx(math.e, rel=1e-12)
    assert cf.leblanc_cdf(3.0, 2.0, 1.0) > 1.0


def test_leblanc_density_direct_evaluation():
    z, b = 2.0, -1.0
    ref = mp_density_b0(1.0, z, gap=z - b, shift=b * (z - b))
    assert cf.leblanc_density(1.0, z, b) == pytest.approx(ref, rel=1e-13)


def test_image_solution_vanishes_on_barrier():
    rng = np.random.default_rng(7)
    for t, z in zip(rng.uniform(0.01, 5.0, 20), rng.uniform(0.1, 4.0, 20)):
        assert cf._image_solution(t, 0.0, z) == 0.0
