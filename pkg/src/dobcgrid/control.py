"""PID controllers with tabulated gain presets, and the disturbance-observer feed-forward."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .tf_core import (
    InvalidParameterError,
    RealizabilityError,
    StateSpaceModel,
    TransferFunction,
    discretize_bilinear,
    realize_discrete,
    series,
)

DEFAULT_DERIVATIVE_N = 100.0
DEFAULT_LAMBDA = 0.01


@dataclass(frozen=True)
class PidGains:
    k_p: float
    k_i: float
    k_d: float
    derivative_filter_N: float = DEFAULT_DERIVATIVE_N

    def __post_init__(self):
        if self.k_d != 0 and not self.derivative_filter_N > 0:
            raise InvalidParameterError("derivative_filter_N must be positive when k_d != 0")


@dataclass(frozen=True)
class ControllerPreset:
    name: str
    gains: PidGains
    dobc: bool = False


def _preset_table(rows, system):
    out = {}
    for name, kp, ki, kd in rows:
        out[name] = ControllerPreset(name, PidGains(kp, ki, kd), dobc=name.endswith("-dobc"))
    return out


LFC_PRESETS = _preset_table(
    [
        ("ziegler-nichols", 3.872, 8.031, 0.466),
        ("bfoa", 3.185, 4.672, 0.655),
        ("imc", 0.666, 1.018, 0.223),
        ("ipso", 3.935, 8.147, 1.576),
        ("mabc", 0.486, 1.0, 0.154),
        ("ipso-dobc", 3.935, 8.147, 1.576),
    ],
    "lfc",
)

AVR_PRESETS = _preset_table(
    [
        ("ziegler-nichols", 1.021, 1.874, 0.139),
        ("abc", 1.652, 0.408, 0.365),
        ("pso", 1.777, 0.382, 0.318),
        ("dea", 1.949, 0.443, 0.342),
        ("nlta", 1.299, 1.379, 0.788),
        ("bfoa", 0.788, 0.608, 0.335),
        ("nlta-dobc", 1.299, 1.379, 0.788),
    ],
    "avr",
)


def controller_preset(system: str, name: str) -> ControllerPreset:
    table = {"lfc": LFC_PRESETS, "avr": AVR_PRESETS}.get(system)
    if table is None:
        raise KeyError(f"unknown system {system!r}")
    try:
        return table[name.lower()]
    except KeyError:
        raise KeyError(f"unknown {system} controller preset {name!r}; known: {list(table)}") from None


def pid_discrete(g: PidGains, dt: float) -> StateSpaceModel:
    """Discrete PID: trapezoidal integral, backward-difference derivative behind a first-order filter.

    Integral:   I(z) = k_i dt/2 (1 + z^-1) / (1 - z^-1)
    Derivative: D(z) = k_d N (1 - z^-1) / ((1 + N dt) - z^-1)
    """
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    terms = [([g.k_p], [1.0])]
    if g.k_i != 0:
        terms.append(([0.5 * g.k_i * dt, 0.5 * g.k_i * dt], [1.0, -1.0]))
    if g.k_d != 0:
        N = g.derivative_filter_N
        terms.append(([g.k_d * N, -g.k_d * N], [1.0 + N * dt, -1.0]))
    num, den = np.array([0.0]), np.array([1.0])
    for b, a in terms:
        num = P.polyadd(P.polymul(num, a), P.polymul(b, den))
        den = P.polymul(den, a)
    return realize_discrete(num, den, dt)


@dataclass
class PidState:
    model: StateSpaceModel
    x: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.x is None:
            self.x = np.zeros(self.model.n_states)


def pid_output(g: PidGains, error: float, state: PidState | None, dt: float) -> tuple[float, PidState]:
    """Advance the PID one sample and return ``(u, state)``; pass ``state=None`` to start."""
    if state is None:
        state = PidState(pid_discrete(g, dt))
    m = state.model
    u = float(m.C[0] @ state.x + m.D * error)
    state.x = m.A @ state.x + m.B[:, 0] * error
    return u, state


def make_filter(lam: float, order: int = 3) -> TransferFunction:
    """Unity-DC-gain low-pass ``1 / (lam*s + 1)**order``."""
    if not lam > 0:
        raise InvalidParameterError("lambda must be positive")
    if order < 1:
        raise InvalidParameterError("filter order must be >= 1")
    return TransferFunction([1.0], P.polypow([1.0, lam], order))


@dataclass(frozen=True)
class DobcConfig:
    nominal_plant: TransferFunction
    lam: float = DEFAULT_LAMBDA
    filter_order: int = 3

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParameterError("lambda must be positive")
        rd = self.nominal_plant.relative_degree
        if self.filter_order < rd:
            raise RealizabilityError(
                f"filter order {self.filter_order} below plant relative degree {rd}: "
                "filter times inverse plant would be improper"
            )

    @property
    def filter(self) -> TransferFunction:
        return make_filter(self.lam, self.filter_order)

    def inverse_branch(self) -> TransferFunction:
        """Filter times inverse nominal plant, composed into one proper rational function."""
        return series(self.filter, self.nominal_plant.inverse())


@dataclass
class DobcState:
    """Realized estimator branches and their states at a fixed sample time."""

    inverse_model: StateSpaceModel
    filter_model: StateSpaceModel
    x_inv: np.ndarray
    x_filt: np.ndarray
    d_hat: float = 0.0

    @classmethod
    def initial(cls, cfg: DobcConfig, dt: float) -> "DobcState":
        inv = discretize_bilinear(cfg.inverse_branch(), dt)
        flt = discretize_bilinear(cfg.filter, dt)
        return cls(inv, flt, np.zeros(inv.n_states), np.zeros(flt.n_states))


def dobc_estimate(cfg: DobcConfig, state: DobcState | None, measured_output: float,
                  control_input: float, dt: float) -> tuple[float, DobcState]:
    """Advance both branches one sample; returns ``(d_hat, state)``.

    ``d_hat = B U_n^-1 C - B A``, which tends to the lumped input disturbance
    when the plant matches its nominal model.
    """
    if state is None:
        state = DobcState.initial(cfg, dt)
    inv, flt = state.inverse_model, state.filter_model
    y1 = float(inv.C[0] @ state.x_inv + inv.D * measured_output)
    y2 = float(flt.C[0] @ state.x_filt + flt.D * control_input)
    state.x_inv = inv.A @ state.x_inv + inv.B[:, 0] * measured_output
    state.x_filt = flt.A @ state.x_filt + flt.B[:, 0] * control_input
    state.d_hat = y1 - y2
    return state.d_hat, state


def dobc_augmented_control(pid_u: float, d_hat: float) -> float:
    """Cancel the estimated input disturbance at the plant input."""
    return pid_u - d_hat


def lumped_disturbance_lfc(dP_pv: float, dP_load: float) -> float:
    """Net power injection: PV adds, load subtracts."""
    return dP_pv - dP_load
