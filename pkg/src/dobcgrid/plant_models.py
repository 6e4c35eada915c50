"""LFC and AVR block diagrams of a PV-integrated single-area thermal system."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

from .tf_core import (
    InvalidParameterError,
    TransferFunction,
    feedback,
    series,
    tf_first_order,
)


def _positive(obj, *names):
    for n in names:
        v = getattr(obj, n)
        if not v > 0:
            raise InvalidParameterError(f"{type(obj).__name__}.{n} must be positive, got {v}")


@dataclass(frozen=True)
class ThermalParams:
    K_g: float = 1.0
    T_g: float = 0.08
    K_t: float = 1.0
    T_t: float = 0.3
    R: float = 2.4
    rated_power_MW: float = 2000.0
    nominal_load_MW: float = 1000.0

    def __post_init__(self):
        _positive(self, "T_g", "T_t", "R", "rated_power_MW")


@dataclass(frozen=True)
class PowerSystemParams:
    """Swing-dynamics parameters; ``D`` in pu MW/Hz, ``H`` in s, ``f0`` in Hz."""

    D: float = 0.00833
    H: float = 5.0
    f0: float = 60.0

    def __post_init__(self):
        _positive(self, "D", "H", "f0")

    @property
    def K_p(self) -> float:
        return 1.0 / self.D

    @property
    def T_p(self) -> float:
        return 2.0 * self.H / (self.f0 * self.D)


@dataclass(frozen=True)
class PvChainParams:
    T_IN: float = 0.04
    T_LC: float = 0.004
    rated_power_MW: float = 1000.0
    operating_point_pu: float = 0.375

    def __post_init__(self):
        _positive(self, "T_IN", "T_LC", "rated_power_MW")
        if self.operating_point_pu < 0:
            raise InvalidParameterError("operating_point_pu must be >= 0")


@dataclass(frozen=True)
class AvrParams:
    K_A: float = 10.0
    T_A: float = 0.1
    K_E: float = 1.0
    T_E: float = 0.4
    K_G: float = 1.0
    T_G: float = 1.0
    K_S: float = 1.0
    T_S: float = 0.01

    def __post_init__(self):
        _positive(self, "T_A", "T_E", "T_G", "T_S")


@dataclass(frozen=True)
class PlantPreset:
    thermal: ThermalParams = field(default_factory=ThermalParams)
    power: PowerSystemParams = field(default_factory=PowerSystemParams)
    pv: PvChainParams = field(default_factory=PvChainParams)
    avr: AvrParams = field(default_factory=AvrParams)
    load_base_pu: float = 0.5

    def check_pv_operating_point(self) -> None:
        limit = self.pv.rated_power_MW / self.thermal.rated_power_MW
        if self.pv.operating_point_pu > limit + 1e-12:
            raise InvalidParameterError(
                f"PV operating point {self.pv.operating_point_pu} pu exceeds rated ratio {limit}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


PLANT_PRESETS = {
    "paper-appendix": PlantPreset(),
}


def plant_preset(name: str) -> PlantPreset:
    try:
        return PLANT_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown plant preset {name!r}; known: {sorted(PLANT_PRESETS)}") from None


def power_system_tf(p: PowerSystemParams) -> TransferFunction:
    return tf_first_order(p.K_p, p.T_p)


def governor_tf(th: ThermalParams) -> TransferFunction:
    return tf_first_order(th.K_g, th.T_g)


def turbine_tf(th: ThermalParams) -> TransferFunction:
    return tf_first_order(th.K_t, th.T_t)


def lfc_open_loop(th: ThermalParams, ps: PowerSystemParams) -> TransferFunction:
    """Governor input to frequency deviation: the nominal plant seen by the observer."""
    return series(series(power_system_tf(ps), turbine_tf(th)), governor_tf(th))


def pv_chain_tf(pv: PvChainParams) -> TransferFunction:
    return series(tf_first_order(1.0, pv.T_IN), tf_first_order(1.0, pv.T_LC))


def avr_forward_plant(avr: AvrParams) -> TransferFunction:
    """Amplifier, exciter and generator in series (controller output to terminal voltage)."""
    return series(
        series(tf_first_order(avr.K_A, avr.T_A), tf_first_order(avr.K_E, avr.T_E)),
        tf_first_order(avr.K_G, avr.T_G),
    )


def avr_sensor_tf(avr: AvrParams) -> TransferFunction:
    return tf_first_order(avr.K_S, avr.T_S)


def ideal_pid_tf(k_p: float, k_i: float, k_d: float) -> TransferFunction:
    """``(k_d s^2 + k_p s + k_i) / s``; improper whenever ``k_d != 0``."""
    return TransferFunction([k_i, k_p, k_d], [0.0, 1.0])


def avr_closed_loop(avr: AvrParams, pid) -> TransferFunction:
    """Terminal voltage over reference with an ideal PID in the forward path."""
    forward = series(ideal_pid_tf(pid.k_p, pid.k_i, pid.k_d), avr_forward_plant(avr))
    return feedback(forward, avr_sensor_tf(avr), +1)


def swing_step(delta_f: float, dP_gen: float, dP_load: float, ps: PowerSystemParams, dt: float) -> float:
    """One explicit-Euler step of the swing equation with frequency in Hz.

    The inertia term carries ``2H/f0`` so that the equation is the time-domain
    form of ``K_p / (1 + s T_p)``.
    """
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    dfdt = (dP_gen - dP_load - ps.D * delta_f) * ps.f0 / (2.0 * ps.H)
    return delta_f + dt * dfdt
