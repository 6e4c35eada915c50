import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dobcgrid.control import controller_preset
from dobcgrid.plant_models import (
    AvrParams,
    PlantPreset,
    PowerSystemParams,
    PvChainParams,
    ThermalParams,
    avr_closed_loop,
    avr_forward_plant,
    lfc_open_loop,
    plant_preset,
    power_system_tf,
    pv_chain_tf,
    swing_step,
)
from dobcgrid.tf_core import InvalidParameterError, discretize_bilinear


def test_power_system_constants_from_physical_data():
    ps = PowerSystemParams()
    assert ps.K_p == pytest.approx(120.0, rel=1e-3)
    assert ps.T_p == pytest.approx(20.0, rel=1e-3)


def test_power_system_constants_other_grid():
    ps = PowerSystemParams(D=0.01, H=4.0, f0=50.0)
    assert ps.K_p == pytest.approx(100.0, rel=1e-12)
    assert ps.T_p == pytest.approx(16.0, rel=1e-12)


@pytest.mark.parametrize("field", ["D", "H", "f0"])
def test_power_system_rejects_non_positive(field):
    with pytest.raises(InvalidParameterError):
        PowerSystemParams(**{field: 0.0})


def test_thermal_defaults():
    th = ThermalParams()
    assert (th.K_g, th.T_g, th.K_t, th.T_t, th.R) == (1.0, 0.08, 1.0, 0.3, 2.4)


def test_lfc_open_loop_poles_and_gain():
    tf = lfc_open_loop(ThermalParams(), PowerSystemParams())
    poles = np.sort(tf.poles().real)
    assert np.allclose(poles, np.sort([-1 / 0.08, -1 / 0.3, -(60 * 0.00833) / 10.0]), rtol=1e-9)
    assert tf.dc_gain() == pytest.approx(1 / 0.00833, rel=1e-12)
    assert tf.relative_degree == 3


def test_pv_chain_step_rise_time():
    # 10-90 % rise time of 1/((1+0.04 s)(1+0.004 s)) from the analytic step response,
    # solved independently with a root finder
    from scipy.optimize import brentq

    a, b = 0.04, 0.004

    def y(t):
        return 1 - (a * np.exp(-t / a) - b * np.exp(-t / b)) / (a - b)

    t10 = brentq(lambda t: y(t) - 0.1, 0, 1)
    t90 = brentq(lambda t: y(t) - 0.9, 0, 1)
    assert t90 - t10 == pytest.approx(0.0885998, abs=1e-6)

    dt = 1e-5
    ss = discretize_bilinear(pv_chain_tf(PvChainParams()), dt)
    u = np.ones(30000)
    u[0] = 0.5
    out = ss.simulate(u)
    t = np.arange(out.size) * dt
    rise = np.interp(0.9, out, t) - np.interp(0.1, out, t)
    assert rise == pytest.approx(t90 - t10, rel=1e-3)
    assert pv_chain_tf(PvChainParams()).dc_gain() == 1.0


def test_pv_operating_point_check():
    PlantPreset().check_pv_operating_point()
    with pytest.raises(InvalidParameterError):
        PlantPreset(pv=PvChainParams(operating_point_pu=1.5)).check_pv_operating_point()


def test_plant_preset_lookup():
    assert plant_preset("paper-appendix") == PlantPreset()
    with pytest.raises(KeyError):
        plant_preset("nope")


def test_avr_forward_plant_expanded():
    avr = AvrParams()
    tf = avr_forward_plant(avr)
    # (1 + 0.1 s)(1 + 0.4 s)(1 + s) = 1 + 1.5 s + 0.54 s^2 + 0.04 s^3
    assert np.allclose(tf.den.coeffs, [1.0, 1.5, 0.54, 0.04], atol=1e-12)
    assert tf.num.coeffs.tolist() == [10.0]


def test_avr_closed_loop_nlta():
    avr = AvrParams()
    g = controller_preset("avr", "nlta").gains
    tf = avr_closed_loop(avr, g)
    assert np.all(tf.poles().real < 0)
    assert tf.dc_gain() == pytest.approx(1.0, abs=1e-12)
    # hand-expanded characteristic polynomial
    # s (1 + T_A s)(1 + T_E s)(1 + T_G s)(1 + T_S s) + K (k_d s^2 + k_p s + k_i)
    K = avr.K_A * avr.K_E * avr.K_G * avr.K_S
    ol = np.polynomial.polynomial.polyfromroots([0.0])
    for T in (avr.T_A, avr.T_E, avr.T_G, avr.T_S):
        ol = np.polynomial.polynomial.polymul(ol, [1.0, T])
    expected = np.polynomial.polynomial.polyadd(ol, K * np.array([g.k_i, g.k_p, g.k_d]))
    den = tf.den.coeffs / tf.den.coeffs[0] * expected[0]
    assert np.allclose(den, expected, rtol=1e-9, atol=1e-12)


def test_swing_step_balanced_is_stationary():
    ps = PowerSystemParams()
    assert swing_step(0.0, 0.1, 0.1, ps, 0.01) == 0.0


def test_swing_step_equilibrium():
    ps = PowerSystemParams()
    df = 0.1 / ps.D
    assert swing_step(df, 0.1, 0.0, ps, 0.01) == pytest.approx(df, abs=1e-12)


def test_swing_step_single_update():
    ps = PowerSystemParams()
    # (0.1 - 0 - 0.00833*0.5) * 60/10 * 0.01 + 0.5
    assert swing_step(0.5, 0.1, 0.0, ps, 0.01) == pytest.approx(0.5 + 0.01 * 6 * (0.1 - 0.004165), rel=1e-12)


def test_swing_euler_matches_transfer_function():
    ps = PowerSystemParams()
    dt, n = 1e-3, 40000
    df = 0.0
    out = np.empty(n)
    for k in range(n):
        out[k] = df
        df = swing_step(df, 0.0, 0.01, ps, dt)
    t = np.arange(n) * dt
    analytic = -0.01 * ps.K_p * (1 - np.exp(-t / ps.T_p))
    assert np.max(np.abs(out - analytic)) < 5e-3 * np.max(np.abs(analytic))
    assert power_system_tf(ps).dc_gain() == pytest.approx(ps.K_p)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.001, 0.1), st.floats(1.0, 10.0), st.sampled_from([50.0, 60.0]))
def test_power_system_tf_is_swing_equation(D, H, f0):
    # 2H/f0 * s + D == D * (1 + T_p s)
    ps = PowerSystemParams(D=D, H=H, f0=f0)
    assert ps.K_p * ps.D == pytest.approx(1.0, rel=1e-12)
    assert ps.T_p * ps.D == pytest.approx(2 * H / f0, rel=1e-12)
