import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import dobc_error_ratio, lfc, TEST12
from dobcgrid.config import ControllerSpec
from dobcgrid.control import (
    AVR_PRESETS,
    LFC_PRESETS,
    DobcConfig,
    PidGains,
    controller_preset,
    dobc_augmented_control,
    dobc_estimate,
    lumped_disturbance_lfc,
    make_filter,
    pid_discrete,
    pid_output,
)
from dobcgrid.plant_models import PlantPreset, lfc_open_loop
from dobcgrid.sim_engine import run
from dobcgrid.tf_core import (
    InvalidParameterError,
    RealizabilityError,
    TransferFunction,
    discretize_bilinear,
    tf_first_order,
)

gains = st.floats(0.0, 10.0)


def pid_reference(g, e, dt):
    """Direct recursion of the trapezoidal-integral, filtered-derivative PID."""
    N = g.derivative_filter_N
    u = np.empty_like(e)
    integ, d, prev = 0.0, 0.0, 0.0
    for k, ek in enumerate(e):
        integ += 0.5 * g.k_i * dt * (ek + prev)
        d = (d + g.k_d * N * (ek - prev)) / (1 + N * dt)
        u[k] = g.k_p * ek + integ + d
        prev = ek
    return u


class TestPid:
    def test_zero_error_gives_zero_output(self):
        g = controller_preset("lfc", "ipso").gains
        state = None
        for _ in range(50):
            u, state = pid_output(g, 0.0, state, 0.001)
            assert u == 0.0

    def test_integral_ramp(self):
        g = PidGains(0.0, 2.0, 0.0)
        dt, state = 0.01, None
        for k in range(101):
            u, state = pid_output(g, 1.0, state, dt)
        # error held at 1 from sample 0 with zero before it: k_i * (k dt + dt/2)
        assert u == pytest.approx(2.0 * (1.0 + 0.005), rel=1e-12)

    def test_proportional_only(self):
        g = PidGains(3.0, 0.0, 0.0)
        u, _ = pid_output(g, 0.25, None, 0.01)
        assert u == 0.75

    @settings(max_examples=30, deadline=None)
    @given(gains, gains, gains, st.sampled_from([1e-3, 1e-2]), st.integers(0, 2**31 - 1))
    def test_matches_direct_recursion(self, kp, ki, kd, dt, seed):
        g = PidGains(kp, ki, kd)
        e = np.random.default_rng(seed).standard_normal(200)
        got = pid_discrete(g, dt).simulate(e)
        ref = pid_reference(g, e, dt)
        assert np.allclose(got, ref, rtol=1e-9, atol=1e-9)

    def test_stateful_stepping_equals_batch(self):
        g = controller_preset("avr", "nlta").gains
        e = np.sin(np.arange(300) * 0.05)
        state, out = None, []
        for ek in e:
            u, state = pid_output(g, ek, state, 0.001)
            out.append(u)
        assert np.allclose(out, pid_discrete(g, 0.001).simulate(e), rtol=0, atol=1e-12)

    def test_rejects_bad_derivative_filter(self):
        with pytest.raises(InvalidParameterError):
            PidGains(1.0, 0.0, 0.5, derivative_filter_N=0.0)
        PidGains(1.0, 0.0, 0.0, derivative_filter_N=0.0)


class TestPresets:
    @pytest.mark.parametrize("name, k", [
        ("ziegler-nichols", (3.872, 8.031, 0.466)),
        ("bfoa", (3.185, 4.672, 0.655)),
        ("imc", (0.666, 1.018, 0.223)),
        ("ipso", (3.935, 8.147, 1.576)),
        ("mabc", (0.486, 1.0, 0.154)),
    ])
    def test_lfc_gains(self, name, k):
        g = controller_preset("lfc", name).gains
        assert (g.k_p, g.k_i, g.k_d) == k

    @pytest.mark.parametrize("name, k", [
        ("ziegler-nichols", (1.021, 1.874, 0.139)),
        ("abc", (1.652, 0.408, 0.365)),
        ("pso", (1.777, 0.382, 0.318)),
        ("dea", (1.949, 0.443, 0.342)),
        ("nlta", (1.299, 1.379, 0.788)),
        ("bfoa", (0.788, 0.608, 0.335)),
    ])
    def test_avr_gains(self, name, k):
        g = controller_preset("avr", name).gains
        assert (g.k_p, g.k_i, g.k_d) == k

    def test_dobc_variants_share_gains(self):
        assert LFC_PRESETS["ipso-dobc"].gains == LFC_PRESETS["ipso"].gains
        assert AVR_PRESETS["nlta-dobc"].gains == AVR_PRESETS["nlta"].gains
        assert LFC_PRESETS["ipso-dobc"].dobc and not LFC_PRESETS["ipso"].dobc

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            controller_preset("lfc", "nlta")


class TestFilter:
    def test_shape(self):
        B = make_filter(0.01, 3)
        assert B.relative_degree == 3
        assert B.dc_gain() == 1.0
        assert np.allclose(B.den.coeffs, [1.0, 0.03, 3e-4, 1e-6])

    @pytest.mark.parametrize("lam, order", [(0.0, 3), (-1.0, 3), (0.1, 0)])
    def test_invalid(self, lam, order):
        with pytest.raises(InvalidParameterError):
            make_filter(lam, order)


class TestDobc:
    def plant(self):
        p = PlantPreset()
        return lfc_open_loop(p.thermal, p.power)

    def test_properness_guard(self):
        with pytest.raises(RealizabilityError):
            DobcConfig(self.plant(), 0.01, 2)

    def test_inverse_branch_proper(self):
        cfg = DobcConfig(self.plant(), 0.01, 3)
        assert cfg.inverse_branch().is_proper
        assert cfg.inverse_branch().dc_gain() == pytest.approx(0.00833, rel=1e-12)

    def test_biproper_plant_allows_first_order_filter(self):
        DobcConfig(TransferFunction([1.0, 1.0], [1.0, 2.0]), 0.1, 1)

    def test_constant_disturbance_recovered(self):
        # plant y = U (u + e) with u = 0 and a constant e: the estimate converges to e
        cfg = DobcConfig(tf_first_order(2.0, 0.5), 0.05, 1)
        dt, e = 0.001, -0.0438
        plant = discretize_bilinear(cfg.nominal_plant, dt)
        u_in = np.full(8000, e)
        u_in[0] = 0.5 * e
        y = plant.simulate(u_in)
        state, d = None, 0.0
        for yk in y:
            d, state = dobc_estimate(cfg, state, yk, 0.0, dt)
        assert d == pytest.approx(e, rel=1e-6)

    def test_helpers(self):
        assert dobc_augmented_control(0.3, 0.1) == pytest.approx(0.2)
        assert lumped_disturbance_lfc(-0.05625, 0.1) == pytest.approx(-0.15625)

    @pytest.mark.parametrize("omega", [0.1, 1.0])
    def test_error_follows_one_minus_filter(self, omega):
        got, expected = dobc_error_ratio(omega)
        assert got == pytest.approx(expected, rel=1e-2)

    def test_disabled_dobc_is_bit_identical_to_pid(self):
        base = run(lfc("ipso", TEST12, t_end=5.0))
        off = run(lfc("ipso-dobc", TEST12, t_end=5.0).evolve(
            controller=ControllerSpec(preset="ipso-dobc", compensate=False)))
        assert np.array_equal(base["delta_f"], off["delta_f"])
        assert np.array_equal(base["u_pid"], off["u_pid"])
        # the observer still runs and sees the disturbance
        assert np.max(np.abs(off["d_hat"])) > 0.05

    def test_compensation_improves_every_index(self):
        pid = run(lfc("ipso", TEST12, t_end=10.0)).indices
        dobc = run(lfc("ipso-dobc", TEST12, t_end=10.0)).indices
        for k in ("ise", "itse", "iae", "itae", "mo"):
            assert getattr(dobc, k) < getattr(pid, k)

    def test_smaller_lambda_tracks_better(self):
        mo = [run(lfc("ipso-dobc", TEST12, t_end=5.0).evolve(
            controller=ControllerSpec(preset="ipso-dobc", lam=lam))).indices.mo for lam in (0.1, 0.03, 0.01)]
        assert mo[0] > mo[1] > mo[2]
