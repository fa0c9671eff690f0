import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import ConfigError, UnsupportedOperation

finite = st.floats(-50, 50, allow_nan=False)


def test_linear_examples():
    k = ClassKSpec("linear", gain=2.0)
    assert k(3.0) == 6.0
    assert k(-1.5) == -3.0
    assert k.deriv(100.0) == 2.0
    assert k.inverse(6.0) == 3.0


def test_odd_power_examples():
    k = ClassKSpec("odd_power", gain=1.0, exponent=3)
    assert k(2.0) == 8.0
    assert k(-2.0) == -8.0
    assert k.inverse(-8.0) == pytest.approx(-2.0)
    assert k.inverse(0.0) == 0.0
    assert k.deriv(2.0) == 12.0


def test_exp_affine_has_no_inverse():
    k = ClassKSpec("scaled_exp_affine", gain=0.5)
    assert k(0.0) == 0.0
    assert k(1.0) == pytest.approx(0.5 * (math.e - 1))
    assert not k.invertible
    with pytest.raises(UnsupportedOperation):
        k.inverse(1.0)


@pytest.mark.parametrize("bad", [dict(gain=0.0), dict(gain=-1.0), dict(gain=math.inf),
                                 dict(kind="odd_power", exponent=2), dict(kind="odd_power", exponent=0)])
def test_rejects_bad_parameters(bad):
    with pytest.raises(ConfigError):
        ClassKSpec(**bad)


def test_unknown_kind():
    with pytest.raises(ValueError):
        ClassKSpec("quadratic")


def test_dict_round_trip():
    for k in (ClassKSpec(), ClassKSpec("odd_power", 2.0, 5), ClassKSpec("scaled_exp_affine", 3.0)):
        assert ClassKSpec.from_dict(k.to_dict()) == k


specs = st.one_of(
    st.builds(ClassKSpec, st.just("linear"), st.floats(0.01, 100)),
    st.builds(ClassKSpec, st.just("odd_power"), st.floats(0.01, 10), st.sampled_from([1, 3, 5])),
    st.builds(ClassKSpec, st.just("scaled_exp_affine"), st.floats(0.01, 10)),
)


@given(specs, finite, finite)
def test_strictly_increasing_through_origin(k, a, b):
    assert k(0.0) == 0.0
    if a < b:
        assert k(a) <= k(b)
        if abs(a - b) > 1e-6 and max(abs(a), abs(b)) < 5:
            assert k(a) < k(b)


@given(specs, st.floats(-3, 3))
def test_derivative_matches_finite_difference(k, s):
    h = 1e-6
    fd = (k(s + h) - k(s - h)) / (2 * h)
    assert fd == pytest.approx(k.deriv(s), rel=1e-5, abs=1e-5)


@given(st.one_of(
    st.builds(ClassKSpec, st.just("linear"), st.floats(0.01, 100)),
    st.builds(ClassKSpec, st.just("odd_power"), st.floats(0.01, 10), st.sampled_from([1, 3, 5])),
), st.floats(-10, 10))
def test_inverse_round_trip(k, s):
    assert k.inverse(k(s)) == pytest.approx(s, rel=1e-9, abs=1e-9)
