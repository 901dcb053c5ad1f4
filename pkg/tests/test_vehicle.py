import math

import numpy as np
import pytest

from apexgame import autodiff as ad
from apexgame import vehicle as veh
from apexgame.track import TrackNode
from helpers import fd_jacobian, rel_err

FLAT = TrackNode(s=0.0, gamma=0.0, alpha=0.0, v_max=95.0)


def params_with(**kw):
    base = veh.default_params().__dict__.copy()
    base.update(kw)
    return veh.AgentParams(**base)


def test_engine_power_zero_fuel_intercept():
    p = veh.default_params()
    assert veh.engine_power(p, 0.0) == -p.P_e0


def test_engine_power_hand_value():
    p = params_with(eta_e=0.5, P_e0=2.0e4)
    assert veh.engine_power(p, 5.0e5) == pytest.approx(2.3e5)


def test_engine_power_affine_slope():
    p = veh.default_params()
    vals = [veh.engine_power(p, pf) for pf in (0.0, 1e5, 2e5, 5e5)]
    diffs = np.diff(vals) / np.diff([0.0, 1e5, 2e5, 5e5])
    assert np.allclose(diffs, p.eta_e)


def test_propulsive_power_zero_input():
    p = veh.default_params()
    assert veh.propulsive_power(p, veh.AgentInput(0.0, 0.0, 0.0)) == -p.P_e0


def test_propulsive_power_hand_value():
    p = params_with(eta_e=0.5, P_e0=2.0e4)
    u = veh.AgentInput(P_k=1.2e5, P_f=5.0e5, P_brk=0.0)
    assert veh.propulsive_power(p, u) == pytest.approx(3.5e5)


def test_propulsive_power_brake_is_additive():
    p = veh.default_params()
    u0 = veh.AgentInput(5e4, 4e5, 0.0)
    u1 = veh.AgentInput(5e4, 4e5, 7.5e4)
    assert veh.propulsive_power(p, u1) == pytest.approx(
        veh.propulsive_power(p, u0) - 7.5e4)


def test_external_force_free_stream_flat():
    p = veh.default_params()
    v = 70.0
    f = veh.external_force(p, v, 0.0, 0.0, 0.0)
    assert f == pytest.approx(p.c_d1 * v ** 2 + p.c_roll * p.m * p.g)


def test_external_force_wake_scales_aero_only():
    p = veh.default_params()
    v, delta = 80.0, 0.116
    f0 = veh.external_force(p, v, 0.0, 0.0, 0.0)
    f1 = veh.external_force(p, v, 0.0, 0.0, delta)
    aero = p.c_d1 * v ** 2
    assert f1 == pytest.approx(f0 - delta * aero)
    assert f1 - p.c_roll * p.m * p.g == pytest.approx(aero * (1.0 - delta))


def test_external_force_hand_arithmetic():
    p = params_with(m=800.0, c_d1=1.2, c_roll=0.01, g=9.81)
    assert veh.external_force(p, 80.0, 0.0, 0.0, 0.0) == pytest.approx(7758.48)


def test_external_force_curvature_and_slope_terms():
    p = veh.default_params()
    v, gam, alp = 50.0, 0.01, 0.03
    f = veh.external_force(p, v, gam, alp, 0.0)
    expect = ((p.c_d1 + p.c_d2 * gam) * v ** 2 + p.c_roll * p.m * p.g
              + p.m * p.g * math.sin(alp))
    assert f == pytest.approx(expect)


def test_dynamics_power_balance_gives_zero_dv():
    p = veh.default_params()
    v = 60.0
    F = veh.external_force(p, v, FLAT.gamma, FLAT.alpha, 0.0)
    # choose fuel power so that P_p equals the external power exactly
    P_f = (F * v + p.P_e0) / p.eta_e
    u = veh.AgentInput(0.0, P_f, 0.0)
    x = veh.AgentState(v=v, E_f=0.0, E_b=2e6, t=0.0)
    rates = veh.dynamics_rhs(p, x, u, FLAT, 0.0)
    assert rates.dv_ds == pytest.approx(0.0, abs=1e-12)
    assert rates.dt_ds == pytest.approx(1.0 / v)
    assert rates.dEf_ds == pytest.approx(P_f / v)


def test_dynamics_hand_value():
    # dv/ds = (P_p - P_ext) / (m v^2) = 8e6 / (800 * 1e4) = 1.0
    p = params_with(m=800.0)
    v = 100.0
    F = veh.external_force(p, v, 0.0, 0.0, 0.0)
    P_f = (F * v + 8.0e6 + p.P_e0) / p.eta_e
    u = veh.AgentInput(0.0, P_f, 0.0)
    x = veh.AgentState(v=v, E_f=0.0, E_b=2e6, t=0.0)
    rates = veh.dynamics_rhs(p, x, u, FLAT, 0.0)
    assert rates.dv_ds == pytest.approx(1.0)


def test_generator_mode_charges_battery():
    p = veh.default_params()
    x = veh.AgentState(v=40.0, E_f=0.0, E_b=1e6, t=0.0)
    u = veh.AgentInput(P_k=-8e4, P_f=0.0, P_brk=0.0)
    rates = veh.dynamics_rhs(p, x, u, FLAT, 0.0)
    assert rates.dEb_ds > 0.0


def test_velocity_floor_raises():
    p = veh.default_params()
    x = veh.AgentState(v=veh.V_FLOOR, E_f=0.0, E_b=1e6, t=0.0)
    with pytest.raises(ValueError, match="floor"):
        veh.dynamics_rhs(p, x, u=veh.AgentInput(0.0, 0.0, 0.0), node=FLAT, delta=0.0)


def test_dv_monotone_in_inputs():
    p = veh.default_params()
    x = veh.AgentState(v=55.0, E_f=0.0, E_b=1e6, t=0.0)

    def dv(P_k, P_f, P_brk):
        return veh.dynamics_rhs(p, x, veh.AgentInput(P_k, P_f, P_brk), FLAT, 0.0).dv_ds

    rng = np.random.default_rng(2)
    for _ in range(20):
        pk, pf, pb = rng.uniform(0, 1e5, 3)
        step = rng.uniform(1e2, 1e4)
        assert dv(pk + step, pf, pb) > dv(pk, pf, pb)
        assert dv(pk, pf + step, pb) > dv(pk, pf, pb)
        assert dv(pk, pf, pb + step) < dv(pk, pf, pb)


def test_dynamics_smooth_c2_via_expressions():
    # second derivatives of dv/ds w.r.t. (v, inputs, delta) exist and match
    # finite differences of the AD gradient
    p = veh.default_params()
    g = ad.Graph()
    v, pk, pf, pb, delta = g.vars(5)
    x = veh.AgentState(v=v, E_f=None, E_b=None, t=None)
    u = veh.AgentInput(pk, pf, pb)
    node = TrackNode(0.0, 0.008, 0.01, 80.0)
    rates = veh.dynamics_rhs(p, x, u, node, delta)
    expr = rates.dv_ds
    x0 = np.array([63.0, 2e4, 6e5, 1e3, 0.2])
    H = ad.hessian(expr, x0).toarray()
    fd = fd_jacobian(lambda q: ad.gradient(expr, q), x0)
    assert rel_err(H, 0.5 * (fd + fd.T), floor=1e-6) < 1e-4
    # expression path agrees with the float path
    u_f = veh.AgentInput(2e4, 6e5, 1e3)
    x_f = veh.AgentState(63.0, 0.0, 1e6, 0.0)
    assert expr.eval(x0) == pytest.approx(
        veh.dynamics_rhs(p, x_f, u_f, node, 0.2).dv_ds)


def test_params_invariants():
    with pytest.raises(ValueError):
        params_with(m=-1.0)
    with pytest.raises(ValueError):
        params_with(eta_e=1.5)
    with pytest.raises(ValueError):
        params_with(P_k_min=1e4)  # must be <= 0
    with pytest.raises(ValueError):
        params_with(E_b_max=0.0)


def test_default_params_top_speed_near_95():
    # full power on a flat straight balances drag at ~95 m/s
    p = veh.default_params()
    P_max = p.eta_e * p.P_f_max - p.P_e0 + p.P_k_max
    v = 95.0
    F = veh.external_force(p, v, 0.0, 0.0, 0.0)
    assert abs(P_max - F * v) / P_max < 0.01
