import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import ConfigError, UnsupportedOperation
from hocbf_tissf.tissf import (
    EpsilonForm, TissfParams, check_tunable_condition, completion_gap, epsilon_gap, epsilon_of,
    issf_rhs, varrho_of,
)

LITERAL = TissfParams(epsilon0=0.06, varsigma=200.0, gamma=10.0, form="paper_reciprocal")
NEG = TissfParams(epsilon0=0.06, varsigma=200.0, gamma=10.0, form="reciprocal_negated")


def test_epsilon_examples():
    assert epsilon_of(LITERAL, 0.0) == pytest.approx(0.943396, abs=1e-6)
    assert epsilon_of(LITERAL, 0.05) == pytest.approx(4.54e-5, rel=1e-3)
    assert epsilon_of(NEG, -0.05) == epsilon_of(LITERAL, 0.05)
    flat = TissfParams(epsilon0=0.06, varsigma=0.0)
    assert epsilon_of(flat, -3.0) == epsilon_of(flat, 7.0) == pytest.approx(1 / 1.06)


def test_varrho_examples():
    assert varrho_of(LITERAL, ClassKSpec(), 0.0) == pytest.approx(23.585, abs=1e-3)
    assert varrho_of(LITERAL, ClassKSpec(gain=2.0), 0.0) == pytest.approx(11.792, abs=1e-3)
    assert varrho_of(TissfParams(gamma=0.0), ClassKSpec(), 0.0) == 0.0
    with pytest.raises(UnsupportedOperation):
        varrho_of(LITERAL, ClassKSpec("scaled_exp_affine"), 0.0)


def test_issf_rhs_example():
    assert issf_rhs(LITERAL, [4.0], 0.0) == pytest.approx(16.96)
    assert issf_rhs(LITERAL, [0.0, 0.0], 0.3) == 0.0


def test_extreme_arguments_stay_finite():
    for phi in (-1e9, -1.0, 0.0, 1.0, 1e9):
        for p in (LITERAL, NEG):
            e = epsilon_of(p, phi)
            assert 0 < e <= 1 / p.epsilon0
            assert math.isfinite(issf_rhs(p, [1.0], phi))


@pytest.mark.parametrize("kw", [dict(epsilon0=0.0), dict(varsigma=-1.0), dict(gamma=-0.1), dict(form="bogus")])
def test_rejects_bad_params(kw):
    with pytest.raises((ConfigError, ValueError)):
        TissfParams(**kw)


def test_tunability_report_by_form():
    grid = np.linspace(-0.5, 0.5, 2001)
    assert not check_tunable_condition(LITERAL, ClassKSpec(), grid).passed
    rep = check_tunable_condition(NEG, ClassKSpec(), grid)
    assert rep.passed and rep.min_margin >= 1.0 - 1e-6
    with pytest.raises(ConfigError):
        check_tunable_condition(NEG, ClassKSpec(), [])


params = st.builds(
    TissfParams,
    epsilon0=st.floats(1e-3, 10), varsigma=st.floats(0, 500), gamma=st.floats(0, 20),
    form=st.sampled_from(list(EpsilonForm)),
)


@given(params, st.floats(-1e3, 1e3))
def test_epsilon_range(p, phi):
    e = epsilon_of(p, phi)
    assert e > 0
    assert epsilon_gap(p, phi) > 0
    assert e <= 1 / p.epsilon0


@given(params, st.floats(-1, 1), st.floats(-1, 1))
def test_epsilon_monotone(p, a, b):
    a, b = sorted((a, b))
    if p.form is EpsilonForm.PAPER_RECIPROCAL:
        assert epsilon_of(p, a) >= epsilon_of(p, b)
    else:
        assert epsilon_of(p, a) <= epsilon_of(p, b)


@given(params, st.floats(-1, 1), st.sampled_from([ClassKSpec(), ClassKSpec("linear", 3.0), ClassKSpec("odd_power", 1.0, 3)]))
def test_varrho_nonnegative(p, phi, beta):
    assert varrho_of(p, beta, phi) >= 0


@given(st.floats(0, 1e3), params, st.floats(-1, 1))
def test_completion_gap_nonnegative(q, p, phi):
    eps = epsilon_of(p, phi)
    gap = completion_gap(q, eps, p.gamma)
    assert gap >= 0
    e = Fraction(eps)
    assert gap == (Fraction(q) - e * Fraction(p.gamma) / 2) ** 2 / e
