import copy
import math

import numpy as np
import pytest

from hocbf_tissf.errors import DivergenceError
from hocbf_tissf.plant import PendulumParams, PlantModel, paper_sine, pendulum_spring_cart
from hocbf_tissf.scenario import DisturbanceProfile, bundled_config, read_config, scenario_from_dict
from hocbf_tissf.sim import (
    TRAJECTORY_COLUMNS, ClosedLoop, backstepping_nominal, read_trajectory_csv, rk4_step, run_scenario,
)

ZERO1 = lambda t: np.zeros(1)
ZERO2 = lambda t: np.zeros(2)


def _doc(name="case1", **sim):
    doc = read_config(bundled_config(name))
    doc["simulation"].update(sim)
    return doc


def test_rk4_exponential_decay():
    plant = PlantModel(1, 1, 1, f=lambda x: -x, g1=lambda x: np.zeros((1, 1)), g2=lambda x: np.zeros((1, 1)),
                       jac_f=lambda x: -np.eye(1))
    x = rk4_step(plant, lambda x, t: np.zeros(1), ZERO1, np.array([1.0]), 0.0, 0.1)
    assert abs(x[0] - math.exp(-0.1)) < 1e-7


def test_rk4_pendulum_step_from_rest():
    plant = pendulum_spring_cart(PendulumParams())
    x = rk4_step(plant, lambda x, t: np.zeros(2), ZERO2, np.zeros(4), 0.0, 1e-3)
    assert x[1] == pytest.approx(0.004, rel=1e-4)
    assert x[3] == pytest.approx(0.004, rel=1e-4)
    with pytest.raises(ValueError):
        rk4_step(plant, lambda x, t: np.zeros(2), ZERO2, np.zeros(4), 0.0, 0.0)


def test_backstepping_on_reference_only_cancels_drift():
    p = PendulumParams()
    ref = paper_sine()
    t = 0.4
    x = np.array([ref.value(t)[0], ref.d1(t)[0], ref.value(t)[1], ref.d1(t)[1]])
    u = backstepping_nominal(5.0, 5.0, p, ref, x, t)
    plant = pendulum_spring_cart(p)
    xdot = plant.f(x) + plant.g1(x) @ u
    np.testing.assert_allclose(xdot[[1, 3]], ref.d2(t), atol=1e-9)


def test_backstepping_tracks_without_barrier():
    doc = _doc("case2", horizon=10.0, x0=[0.0, 0.0, 0.0, 0.0])
    doc["controller"]["kind"] = "nominal_only"
    doc["disturbance"] = {"profile": "zero"}
    rec = run_scenario(scenario_from_dict(doc))
    ref = paper_sine().value(rec.t[-1])
    assert rec.t[-1] == pytest.approx(10.0)
    assert np.linalg.norm(rec.x[-1, [0, 2]] - ref) < 0.05


def test_disturbance_profiles():
    assert np.array_equal(DisturbanceProfile()(3.0), [0.0, 0.0])
    c = DisturbanceProfile("constant", value=(-1.0, 2.0))
    assert np.array_equal(c(0.0), [-1.0, 2.0]) and c.bound() == 2.0
    s = DisturbanceProfile("sinusoid", amplitude=(1.0, 0.5), frequency=2.0, phase=0.1)
    np.testing.assert_allclose(s(1.0), np.array([1.0, 0.5]) * math.sin(2.1))
    assert s.bound() == 1.0


def test_random_phase_is_seeded():
    doc = _doc()
    doc["disturbance"] = {"profile": "sinusoid", "amplitude": [1.0, 1.0], "phase": "random"}
    a = scenario_from_dict(doc).disturbance.phase
    b = scenario_from_dict(copy.deepcopy(doc)).disturbance.phase
    doc["simulation"]["seed"] = 5
    c = scenario_from_dict(doc).disturbance.phase
    assert a == b != c


@pytest.fixture(scope="module")
def short_run():
    return run_scenario(scenario_from_dict(_doc(horizon=0.2)))


def test_record_shape_and_metrics(short_run):
    assert len(short_run) == 201
    assert short_run.t[-1] == pytest.approx(0.2)
    m = short_run.metrics
    for key in ("tracking_rmse", "min_phi0", "min_phi_issf", "min_chain_margin", "max_abs_u"):
        assert key in m
    assert m["steps"] == 200


def test_csv_round_trip(short_run, tmp_path):
    path = tmp_path / "traj.csv"
    short_run.write_csv(path)
    cols = read_trajectory_csv(path)
    assert tuple(cols) == TRAJECTORY_COLUMNS
    np.testing.assert_array_equal(cols["x12"], short_run.x[:, 1])
    np.testing.assert_array_equal(cols["u2"], short_run.u[:, 1])
    assert cols["region1"][0] == short_run.regions[0][0]
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_trajectory_csv(path)


def test_runs_are_deterministic(short_run, tmp_path):
    again = run_scenario(scenario_from_dict(_doc(horizon=0.2)))
    short_run.write_csv(tmp_path / "a.csv")
    again.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_divergence_keeps_partial_record():
    doc = _doc(horizon=2.0)
    doc["tissf"]["form"] = "paper_reciprocal"
    with pytest.raises(DivergenceError) as e:
        run_scenario(scenario_from_dict(doc))
    rec = e.value.record
    assert rec is not None and 0 < len(rec) < 2001
    assert np.all(np.isfinite(rec.x))


def test_closed_loop_step_info():
    loop = ClosedLoop(scenario_from_dict(_doc()))
    info = loop.evaluate(np.zeros(4), 0.0, record=True)
    assert info.phi.shape == (2, 2)
    assert info.phi[0, 0] == pytest.approx(0.3)
    assert np.all(info.varrho >= 0)
    np.testing.assert_array_equal(loop(np.zeros(4), 0.0), info.u)
