import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _toy import double_integrator
from hocbf_tissf.barrier import (
    BarrierSpec, affine_barrier, chain_set_margins, eval_chain, in_chain_set, lower_bound_barrier,
)
from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import ConfigError, UnsupportedOperation
from hocbf_tissf.plant import PendulumParams, pendulum_spring_cart

LIN = ClassKSpec()


def test_double_integrator_chain():
    spec = affine_barrier([1.0, 0.0], 0.3, [LIN, LIN])
    ev = eval_chain(spec, double_integrator(), np.array([0.0, 0.5]))
    assert ev.phi == pytest.approx((0.3, 0.8))
    np.testing.assert_allclose(ev.grad_top, [1.0, 1.0])
    assert ev.lf == pytest.approx(0.5)
    np.testing.assert_allclose(ev.lg1, [1.0])
    np.testing.assert_allclose(ev.lg2, [1.0])
    assert ev.gamma_b == pytest.approx(1.3)


def test_margins_outside_set():
    spec = affine_barrier([1.0, 0.0], 0.3, [LIN, LIN])
    m = chain_set_margins(spec, double_integrator(), np.array([0.0, -0.4]))
    assert m == pytest.approx([0.3, -0.1])
    assert not in_chain_set(m)
    assert in_chain_set(chain_set_margins(spec, double_integrator(), np.array([0.0, 0.5])))


def test_relative_degree_one():
    spec = affine_barrier([1.0, 1.0], 0.0, [ClassKSpec(gain=2.0)])
    ev = eval_chain(spec, double_integrator(), np.array([0.2, 0.1]))
    assert ev.phi == pytest.approx((0.3,))
    assert ev.gamma_b == pytest.approx(0.1 + 0.6)


def test_high_degree_needs_top():
    spec = affine_barrier([1.0, 0.0], 0.0, [LIN, LIN, LIN])
    with pytest.raises(UnsupportedOperation):
        eval_chain(spec, double_integrator(), np.zeros(2))
    with_top = BarrierSpec(3, spec.value, spec.grad, spec.hess, spec.betas,
                           top=lambda x: ((1.0, 2.0, 3.0), np.array([0.0, 2.0])))
    ev = eval_chain(with_top, double_integrator(), np.zeros(2))
    assert ev.phi_top == 3.0
    assert ev.gamma_b == pytest.approx(3.0)


def test_beta_count_checked():
    with pytest.raises(ConfigError):
        affine_barrier([1.0, 0.0], 0.0, [])
    with pytest.raises(ConfigError):
        BarrierSpec(2, lambda x: 0.0, lambda x: x, lambda x: x, (LIN,))


def test_pendulum_chain_values():
    plant = pendulum_spring_cart(PendulumParams())
    spec = lower_bound_barrier(0, -0.3, 4, [LIN, LIN])
    x = np.array([0.1, 0.2, 0.0, 0.0])
    ev = eval_chain(spec, plant, x)
    assert ev.phi[0] == pytest.approx(0.4)
    assert ev.phi[1] == pytest.approx(0.6)
    np.testing.assert_allclose(ev.lg1, [4.0, 0.0])


def _fd_grad(fn, x, h=1e-6):
    return np.array([(fn(x + h * e) - fn(x - h * e)) / (2 * h) for e in np.eye(x.size)])


betas = st.sampled_from([
    (LIN, LIN),
    (ClassKSpec("linear", 3.0), ClassKSpec("linear", 0.5)),
    (ClassKSpec("odd_power", 1.0, 3), LIN),
    (ClassKSpec("scaled_exp_affine", 0.7), LIN),
])


@given(arrays(np.float64, 4, elements=st.floats(-1, 1)), betas, st.sampled_from([0, 2]),
       st.sampled_from(["matched", "unmatched"]))
def test_top_gradient_matches_finite_difference(x, bs, idx, channel):
    plant = pendulum_spring_cart(PendulumParams(), channel)
    spec = lower_bound_barrier(idx, -0.3, 4, bs)
    g = eval_chain(spec, plant, x).grad_top
    fd = _fd_grad(lambda y: chain_set_margins(spec, plant, y)[-1], x)
    assert np.max(np.abs(g - fd)) <= 1e-5 * max(np.max(np.abs(g)), 1e-4)
