import pytest

from dobcgrid.config import DisturbanceEvent, DisturbanceProgram, LoopSettings, ScenarioConfig, ControllerSpec

ACCEPTANCE_LINES = []

# Test 12 of the budget table: PV drops 15 % of 0.375 pu, load rises 20 % of 0.5 pu.
TEST12 = DisturbanceProgram.steps(pv=-0.05625, load=0.1)
VREF_STEP = DisturbanceProgram((DisturbanceEvent(0.0, "vref", "step", 1.0),))

# printed budget table: (dP_pv, dP_load, df_max) per test, four decimals as published
PRINTED_BUDGET_ROWS = (
    (0.0187, 0.025, 0.005), (0.0375, 0.050, 0.01), (0.0562, 0.075, 0.015), (0.0187, 0.100, 0.016),
    (0.0375, 0.025, 0.006), (0.0562, 0.050, 0.012), (0.0187, 0.075, 0.012), (0.0375, 0.100, 0.017),
    (0.0562, 0.025, 0.008), (0.0187, 0.050, 0.008), (0.0375, 0.075, 0.014), (0.0562, 0.100, 0.019),
)


def lfc(preset="ipso-dobc", program=TEST12, **loop):
    return ScenarioConfig(system="lfc", controller=ControllerSpec(preset=preset), disturbances=program,
                          loop=LoopSettings(**loop))


def avr(preset="nlta-dobc", program=VREF_STEP, **loop):
    return ScenarioConfig(system="avr", controller=ControllerSpec(preset=preset), disturbances=program,
                          loop=LoopSettings(**loop))


@pytest.fixture
def acceptance_report():
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def dobc_error_ratio(omega, lam=0.01, dt=0.01, periods=3):
    """Amplitude of ``d_hat - e_l`` over that of ``e_l`` for a sinusoidal input disturbance.

    The plant equals its nominal model and the observer runs open loop on an
    independent control signal, so only the filter shapes the estimate.
    """
    import numpy as np

    from dobcgrid.control import DobcConfig
    from dobcgrid.plant_models import PlantPreset, lfc_open_loop
    from dobcgrid.sim_engine import Network

    plant = PlantPreset()
    cfg = DobcConfig(lfc_open_loop(plant.thermal, plant.power), lam, 3)
    net = Network(["u", "e"], dt)
    net.add("y", cfg.nominal_plant, {"u": 1.0, "e": 1.0})
    net.add("inv", cfg.inverse_branch(), {"y": 1.0})
    net.add("filt", cfg.filter, {"u": 1.0})
    net.add("d_hat", 1.0, {"inv": 1.0, "filt": -1.0})
    comp = net.compile()
    period = 2 * np.pi / omega
    t = np.arange(int(round(max(periods * period, 10.0) / dt)) + 1) * dt
    e = np.sin(omega * t)
    u = 0.3 * np.cos(2.3 * omega * t)
    y, _ = comp.run(np.column_stack([u, e]))
    err = y[:, comp.outputs.index("d_hat")] - e
    tail = t >= t[-1] - 2 * period
    X = np.column_stack([np.sin(omega * t[tail]), np.cos(omega * t[tail]), np.ones(tail.sum())])
    coef, *_ = np.linalg.lstsq(X, err[tail], rcond=None)
    return float(np.hypot(coef[0], coef[1])), abs(complex(cfg.filter(1j * omega)) - 1)
