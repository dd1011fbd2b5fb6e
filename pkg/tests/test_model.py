import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oufpt import model
from oufpt.errors import ImmediateHit, InfiniteTime, InvalidParams
from oufpt.model import (
    BackwardCoords,
    ForwardCoords,
    NormalizedProblem,
    Orientation,
    OUParams,
    normalize,
)

finite = st.floats(-50, 50, allow_nan=False)
positive = st.floats(0.01, 20, allow_nan=False)


@pytest.mark.parametrize(
    "params, z, b, orientation",
    [
        ((1, 0, 1, 2, 1), 2.0, 1.0, Orientation.FROM_ABOVE),
        ((2, 1, 0.5, 2, 1), 2.0 * math.sqrt(2.0), 0.0, Orientation.FROM_ABOVE),
        ((1, 0, 1, -2, 0), 2.0, 0.0, Orientation.FROM_BELOW),
    ],
)
def test_normalize_examples(params, z, b, orientation):
    out = normalize(OUParams(*params))
    assert out.z == pytest.approx(z, rel=1e-15)
    assert out.b == pytest.approx(b, abs=1e-15)
    assert out.orientation is orientation


def test_rejects_degenerate_parameters():
    with pytest.raises(ImmediateHit):
        OUParams(1, 0, 1, 1.5, 1.5)
    with pytest.raises(InvalidParams):
        OUParams(0, 0, 1, 2, 1)
    with pytest.raises(InvalidParams):
        OUParams(1, 0, -1, 2, 1)
    with pytest.raises(ImmediateHit):
        NormalizedProblem(1.0, 1.0)
    with pytest.raises(InvalidParams):
        NormalizedProblem(0.0, 1.0)


@given(rate=positive, mean=finite, sigma=positive, start=finite, barrier=finite)
def test_normalized_start_is_above_barrier(rate, mean, sigma, start, barrier):
    if start == barrier:
        return
    try:
        out = normalize(OUParams(rate, mean, sigma, start, barrier))
    except ImmediateHit:
        return  # scaling can merge two nearby values
    assert out.z > out.b
    assert out.rate == rate


@given(z=finite, b=finite)
def test_normalize_idempotent_on_unit_parameters(z, b):
    if z <= b:
        return
    out = normalize(OUParams(1.0, 0.0, 1.0, z, b))
    assert (out.z, out.b, out.orientation) == (z, b, Orientation.FROM_ABOVE)


def test_time_rescaling_round_trip():
    prob = normalize(OUParams(3.0, 0.0, 1.0, 1.0, 0.0))
    assert prob.physical_time(6.0) == pytest.approx(2.0)
    assert prob.dimensionless_time(prob.physical_time(1.7)) == pytest.approx(1.7)


def test_coordinate_examples():
    ln2 = math.log(2.0)
    assert model.theta_of_t(0.0) == 0.0
    assert model.vartheta_of_t(0.0) == 0.0
    assert model.theta_of_t(ln2) == pytest.approx(1.0, rel=1e-15)
    assert model.vartheta_of_t(ln2) == pytest.approx(0.5, rel=1e-15)
    assert model.tau_of_t(ln2) == pytest.approx(1.5, rel=1e-15)


def test_vartheta_at_one_is_infinite_time():
    with pytest.raises(InfiniteTime):
        model.t_of_vartheta(1.0)
    with pytest.raises(InfiniteTime):
        model.vartheta_of_lambda(0.5)
    with pytest.raises(InvalidParams):
        model.theta_of_t(model.T_MAX + 1.0)


def test_round_trip_theta_on_wide_range():
    t = np.random.default_rng(1).uniform(0.0, 20.0, 1000)
    back = model.t_of_theta(model.theta_of_t(t))
    assert np.max(np.abs(back - t) / np.maximum(t, 1e-300)) <= 1e-12


@pytest.mark.xfail(strict=True, reason="t = -log(1 - vartheta) amplifies the rounding of vartheta by e^t")
def test_round_trip_vartheta_to_1e12_on_0_20():
    t = np.random.default_rng(1).uniform(0.0, 20.0, 1000)
    back = model.t_of_vartheta(model.vartheta_of_t(t))
    assert np.max(np.abs(back - t) / t) <= 1e-12


def test_round_trip_vartheta_within_conditioning():
    # half an ulp of vartheta near 1 becomes e^t * 2^-53 in t
    t = np.random.default_rng(1).uniform(0.0, 20.0, 1000)
    back = model.t_of_vartheta(model.vartheta_of_t(t))
    bound = 4.0 * np.finfo(float).eps * np.maximum(np.exp(t), 1.0)
    assert np.all(np.abs(back - t) <= bound * np.maximum(t, 1.0))
    small = t < 1.0
    assert np.max(np.abs(back[small] - t[small]) / t[small]) <= 1e-14


def test_small_times_keep_full_precision():
    t = np.array([1e-300, 1e-20, 1e-10, 1e-5])
    np.testing.assert_allclose(model.vartheta_of_t(t), t, rtol=1e-5)
    np.testing.assert_allclose(model.t_of_vartheta(model.vartheta_of_t(t)), t, rtol=1e-15)
    np.testing.assert_allclose(model.t_of_theta(model.theta_of_t(t)), t, rtol=1e-15)


def test_maps_strictly_increasing():
    # compact coordinates saturate in double precision well before t = 20
    t = np.linspace(0.0, 15.0, 3001)
    for f in (model.theta_of_t, model.tau_of_t, model.vartheta_of_t, model.lambda_of_t):
        assert np.all(np.diff(f(t)) > 0), f.__name__
    assert np.all(np.diff(model.t_of_theta(model.theta_of_t(t))) > 0)
    assert np.all(np.diff(model.t_of_vartheta(model.vartheta_of_t(t))) > 0)


@given(st.lists(st.floats(0.0, 60.0), min_size=2, max_size=20))
def test_maps_never_decrease(ts):
    t = np.sort(np.array(ts))
    for f in (model.theta_of_t, model.tau_of_t, model.vartheta_of_t, model.lambda_of_t):
        assert np.all(np.diff(f(t)) >= 0), f.__name__


@given(st.floats(0.0, 15.0))
def test_coordinate_records(t):
    fc = ForwardCoords.from_t(t, x=0.5)
    assert fc.theta == pytest.approx(model.theta_of_tau(fc.tau), rel=1e-14, abs=1e-300)
    assert fc.theta == pytest.approx(math.sqrt(2.0 * fc.tau + 1.0) - 1.0, rel=1e-12, abs=1e-15)
    assert fc.xi == pytest.approx(math.exp(t) * 0.5)
    bc = BackwardCoords.from_t(t, z=2.0)
    assert 0.0 <= bc.lambda_c < 0.5
    assert bc.vartheta == pytest.approx(1.0 - math.sqrt(1.0 - 2.0 * bc.lambda_c), rel=1e-9, abs=1e-15)
    assert bc.mu == pytest.approx(2.0 * math.exp(-t))


def test_backward_coords_reject_numerically_infinite_time():
    with pytest.raises(InfiniteTime):
        BackwardCoords.from_t(40.0)
