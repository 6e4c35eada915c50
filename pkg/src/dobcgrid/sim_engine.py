"""Fixed-step closed-loop execution of the LFC and AVR diagrams.

Every block is a discrete SISO state-space model. A diagram is compiled into one
global linear recurrence, which resolves the direct-feedthrough algebraic loops
created by the bilinear discretization exactly.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import DisturbanceProgram, LoopSettings, ScenarioConfig
from .control import DobcConfig, pid_discrete
from .metrics import PerformanceIndices, compute_indices, overshoot
from .plant_models import (
    avr_forward_plant,
    avr_sensor_tf,
    governor_tf,
    lfc_open_loop,
    power_system_tf,
    pv_chain_tf,
    turbine_tf,
)
from .tf_core import StateSpaceModel, TransferFunction, delay_line, discretize_bilinear, tf_first_order

log = logging.getLogger(__name__)

LFC_DIVERGENCE_HZ = 10.0
AVR_DIVERGENCE_PU = 10.0


@dataclass
class SimResult:
    t: np.ndarray
    channels: dict
    indices: PerformanceIndices | None = None
    stable: bool = True
    diagnostics: str = ""

    def __post_init__(self):
        n = len(self.t)
        for name, v in self.channels.items():
            if len(v) != n:
                raise ValueError(f"channel {name!r} has length {len(v)}, expected {n}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]


# ------------------------------------------------------------------ network


@dataclass
class _Block:
    name: str
    model: StateSpaceModel
    inputs: dict


class Network:
    """Interconnection of discrete SISO blocks driven by named external inputs.

    Each block input is a linear combination of external inputs and block
    outputs. ``compile()`` solves the instantaneous output equations once, so
    stepping is two matrix-vector products.
    """

    def __init__(self, externals, dt: float):
        self.externals = list(externals)
        self.dt = dt
        self.blocks: list[_Block] = []

    def add(self, name: str, model, inputs: dict) -> None:
        if isinstance(model, TransferFunction):
            model = discretize_bilinear(model, self.dt)
        elif isinstance(model, (int, float)):
            model = StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), float(model), self.dt)
        if name in self.externals or any(b.name == name for b in self.blocks):
            raise ValueError(f"duplicate signal name {name!r}")
        self.blocks.append(_Block(name, model, dict(inputs)))

    def compile(self) -> "CompiledNetwork":
        nb, ne = len(self.blocks), len(self.externals)
        index = {b.name: i for i, b in enumerate(self.blocks)}
        ext = {n: i for i, n in enumerate(self.externals)}
        M = np.zeros((nb, nb))
        N = np.zeros((nb, ne))
        for i, b in enumerate(self.blocks):
            for sig, coef in b.inputs.items():
                if sig in index:
                    M[i, index[sig]] += coef
                elif sig in ext:
                    N[i, ext[sig]] += coef
                else:
                    raise ValueError(f"block {b.name!r} reads unknown signal {sig!r}")
        sizes = [b.model.n_states for b in self.blocks]
        offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        ns = int(offs[-1])
        A = np.zeros((ns, ns))
        B = np.zeros((ns, nb))
        C = np.zeros((nb, ns))
        D = np.diag([b.model.D for b in self.blocks])
        for i, b in enumerate(self.blocks):
            sl = slice(offs[i], offs[i + 1])
            A[sl, sl] = b.model.A
            B[sl, i] = b.model.B[:, 0]
            C[i, sl] = b.model.C[0]
        loop = np.eye(nb) - D @ M
        if abs(np.linalg.det(loop)) < 1e-12:
            raise ValueError("singular algebraic loop in block diagram")
        Psi = np.linalg.solve(loop, C)
        Xi = np.linalg.solve(loop, D @ N)
        Phi = A + B @ M @ Psi
        Gamma = B @ (M @ Xi + N)
        return CompiledNetwork([b.name for b in self.blocks], self.externals, Phi, Gamma, Psi, Xi)


@dataclass
class CompiledNetwork:
    outputs: list
    externals: list
    Phi: np.ndarray
    Gamma: np.ndarray
    Psi: np.ndarray
    Xi: np.ndarray

    def run(self, w: np.ndarray, watch: str | None = None, limit: float = np.inf):
        """Simulate from rest; ``w`` is (n_steps, n_externals).

        Returns ``(y, k_stop)`` where ``k_stop`` is the first sample at which
        ``|watch|`` exceeded ``limit`` (or None).
        """
        w = np.asarray(w, dtype=float)
        n = w.shape[0]
        y = np.zeros((n, len(self.outputs)))
        x = np.zeros(self.Phi.shape[0])
        Phi, Gamma, Psi, Xi = self.Phi, self.Gamma, self.Psi, self.Xi
        wi = self.outputs.index(watch) if watch is not None else None
        for k in range(n):
            wk = w[k]
            yk = Psi @ x + Xi @ wk
            y[k] = yk
            if wi is not None and not abs(yk[wi]) <= limit:
                return y[: k + 1], k
            x = Phi @ x + Gamma @ wk
        return y, None


# ------------------------------------------------------------------ signals


def delay_samples(comm_delay: float, dt: float) -> int:
    k = int(round(comm_delay / dt))
    if abs(k * dt - comm_delay) > 1e-9 * max(1.0, comm_delay):
        warnings.warn(f"communication delay {comm_delay} s rounded to {k} samples of {dt} s", stacklevel=2)
    return k


def apply_delay(samples, comm_delay: float, dt: float) -> np.ndarray:
    """Shift by ``comm_delay/dt`` samples, zero-filled at the start."""
    x = np.asarray(samples, dtype=float)
    k = delay_samples(comm_delay, dt)
    if k == 0:
        return x.copy()
    out = np.zeros_like(x)
    if k < len(x):
        out[k:] = x[: len(x) - k]
    return out


def white_noise(sigma: float, seed, n: int) -> np.ndarray:
    """Zero-mean Gaussian samples, one per step (held over each step)."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.zeros(n)
    return sigma * np.random.default_rng(seed).standard_normal(n)


def sample_program(program: DisturbanceProgram, loop: LoopSettings) -> dict:
    """Per-channel input sequences on the simulation grid.

    A step landing exactly on a sample takes half its magnitude there, the
    trapezoid-consistent value of a discontinuity.
    """
    n = loop.n_samples
    t = np.arange(n) * loop.dt
    out = {ch: np.zeros(n) for ch in ("pv", "load", "vref")}
    for i, ev in enumerate(program.events):
        if ev.kind == "step":
            pos = ev.time / loop.dt
            k0 = int(np.ceil(pos - 1e-9))
            if k0 >= n:
                continue
            seg = np.full(n - k0, ev.magnitude)
            if abs(pos - k0) < 1e-9:
                seg[0] *= 0.5
            out[ev.channel][k0:] += seg
        else:
            on = t >= ev.time - 1e-12
            noise = white_noise(ev.noise_sigma, [loop.noise_seed, i], n)
            out[ev.channel] += np.where(on, noise, 0.0)
    return out


# ------------------------------------------------------------------ diagrams


def _dobc_blocks(net: Network, dobc: DobcConfig, measured: str, control: str) -> None:
    net.add("dobc_inv", dobc.inverse_branch(), {measured: 1.0})
    net.add("dobc_filt", dobc.filter, {control: 1.0})
    net.add("d_hat", 1.0, {"dobc_inv": 1.0, "dobc_filt": -1.0})


def _observer_network(dobc: DobcConfig, dt: float) -> CompiledNetwork:
    net = Network(["measured", "control"], dt)
    _dobc_blocks(net, dobc, "measured", "control")
    return net.compile()


def build_lfc_network(cfg: ScenarioConfig, with_observer: bool) -> Network:
    plant = cfg.plant
    th, ps, pv = plant.thermal, plant.power, plant.pv
    gains, _ = cfg.controller.resolve("lfc")
    dt = cfg.loop.dt
    k = delay_samples(cfg.loop.comm_delay, dt)
    meas_delay = k if cfg.loop.delay_location == "measurement" else 0
    ctrl_delay = k if cfg.loop.delay_location == "control" else 0

    net = Network(["pv_cmd", "load"], dt)
    net.add("delta_Ppv", pv_chain_tf(pv), {"pv_cmd": 1.0})
    net.add("delta_f", power_system_tf(ps), {"delta_Pg": 1.0, "delta_Ppv": 1.0, "load": -1.0})
    net.add("measured", delay_line(meas_delay, dt), {"delta_f": 1.0})
    net.add("u_pid", pid_discrete(gains, dt), {"measured": -1.0})
    ctrl_inputs = {"u_pid": 1.0}
    if with_observer:
        ctrl_inputs["d_hat"] = -1.0
    net.add("u_ctrl", 1.0, ctrl_inputs)
    net.add("u_plant", delay_line(ctrl_delay, dt), {"u_ctrl": 1.0})
    net.add("gov_in", 1.0, {"u_plant": 1.0, "delta_f": -1.0 / th.R})
    net.add("gov_out", governor_tf(th), {"gov_in": 1.0})
    net.add("delta_Pg", turbine_tf(th), {"gov_out": 1.0})
    # the observer's view of the plant input: its own command plus droop on the measured frequency
    net.add("gov_in_est", 1.0, {"u_ctrl": 1.0, "measured": -1.0 / th.R})
    if with_observer:
        _dobc_blocks(net, lfc_dobc_config(cfg), "measured", "gov_in_est")
    return net


def lfc_dobc_config(cfg: ScenarioConfig) -> DobcConfig:
    c = cfg.controller
    return DobcConfig(lfc_open_loop(cfg.plant.thermal, cfg.plant.power), c.lam, c.filter_order)


def avr_dobc_config(cfg: ScenarioConfig) -> DobcConfig:
    c = cfg.controller
    return DobcConfig(avr_forward_plant(cfg.plant.avr), c.lam, c.filter_order)


def build_avr_network(cfg: ScenarioConfig, with_observer: bool) -> Network:
    avr = cfg.plant.avr
    gains, _ = cfg.controller.resolve("avr")
    dt = cfg.loop.dt
    k = delay_samples(cfg.loop.comm_delay, dt)
    meas_delay = k if cfg.loop.delay_location == "measurement" else 0
    ctrl_delay = k if cfg.loop.delay_location == "control" else 0

    net = Network(["vref", "dist"], dt)
    net.add("u_pid", pid_discrete(gains, dt), {"vref": 1.0, "measured": -1.0})
    ctrl_inputs = {"u_pid": 1.0}
    if with_observer:
        ctrl_inputs["d_hat"] = -1.0
    net.add("u_ctrl", 1.0, ctrl_inputs)
    net.add("u_plant", delay_line(ctrl_delay, dt), {"u_ctrl": 1.0})
    net.add("amplifier", tf_first_order(avr.K_A, avr.T_A), {"u_plant": 1.0})
    net.add("exciter", tf_first_order(avr.K_E, avr.T_E), {"amplifier": 1.0})
    net.add("generator", tf_first_order(avr.K_G, avr.T_G), {"exciter": 1.0})
    net.add("v_terminal", 1.0, {"generator": 1.0, "dist": 1.0})
    net.add("v_sensor", avr_sensor_tf(avr), {"v_terminal": 1.0})
    net.add("measured", delay_line(meas_delay, dt), {"v_sensor": 1.0})
    if with_observer:
        _dobc_blocks(net, avr_dobc_config(cfg), "measured", "u_ctrl")
    return net


def _finish(t, y, names, keep, extra, k_stop, limit, label):
    channels = {}
    n_done = y.shape[0]
    for out_name, sig in keep.items():
        channels[out_name] = y[:, names.index(sig)].copy()
    for out_name, arr in extra.items():
        channels[out_name] = np.asarray(arr[:n_done], dtype=float)
    stable = k_stop is None
    diag = "" if stable else f"{label} exceeded {limit} at t={t[k_stop]:.6g} s; run aborted"
    if not stable:
        log.warning(diag)
    return SimResult(t[:n_done].copy(), channels, None, stable, diag)


def _observer_only(cfg, dobc, measured, control):
    obs = _observer_network(dobc, cfg.loop.dt)
    y, _ = obs.run(np.column_stack([measured, control]))
    return y[:, obs.outputs.index("d_hat")]


def run_lfc(cfg: ScenarioConfig) -> SimResult:
    """Simulate the LFC loop; the frequency deviation is the error signal for the indices."""
    if cfg.system != "lfc":
        raise ValueError("run_lfc needs an lfc scenario")
    _, dobc_on = cfg.controller.resolve("lfc")
    feed = dobc_on and cfg.controller.compensate
    net = build_lfc_network(cfg, with_observer=feed)
    if dobc_on:
        lfc_dobc_config(cfg)  # realizability is checked even when not fed forward
    comp = net.compile()
    loop = cfg.loop
    sig = sample_program(cfg.disturbances, loop)
    w = np.column_stack([sig["pv"], sig["load"]])
    y, k_stop = comp.run(w, watch="delta_f", limit=LFC_DIVERGENCE_HZ)
    t = np.arange(loop.n_samples) * loop.dt
    names = comp.outputs
    keep = {"delta_f": "delta_f", "delta_Pg": "delta_Pg", "delta_Ppv": "delta_Ppv",
            "u_pid": "u_pid"}
    extra = {"delta_Pl": sig["load"], "dP_pv_cmd": sig["pv"]}
    if feed:
        keep["d_hat"] = "d_hat"
    elif dobc_on:
        extra["d_hat"] = _observer_only(cfg, lfc_dobc_config(cfg), y[:, names.index("measured")],
                                        y[:, names.index("gov_in_est")])
    else:
        extra["d_hat"] = np.zeros(len(t))
    res = _finish(t, y, names, keep, extra, k_stop, LFC_DIVERGENCE_HZ, "|delta_f| (Hz)")
    res.indices = compute_indices(res["delta_f"], loop.dt)
    return res


def run_avr(cfg: ScenarioConfig) -> SimResult:
    """Simulate the AVR loop; channel ``vref`` drives the reference, ``load`` a disturbance at the generator output."""
    if cfg.system != "avr":
        raise ValueError("run_avr needs an avr scenario")
    _, dobc_on = cfg.controller.resolve("avr")
    feed = dobc_on and cfg.controller.compensate
    comp = build_avr_network(cfg, with_observer=feed).compile()
    loop = cfg.loop
    sig = sample_program(cfg.disturbances, loop)
    w = np.column_stack([sig["vref"], sig["load"]])
    y, k_stop = comp.run(w, watch="v_terminal", limit=AVR_DIVERGENCE_PU)
    t = np.arange(loop.n_samples) * loop.dt
    names = comp.outputs
    keep = {"v_terminal": "v_terminal", "v_sensor": "v_sensor", "u_pid": "u_pid"}
    extra = {"v_ref": sig["vref"], "v_dist": sig["load"]}
    if feed:
        keep["d_hat"] = "d_hat"
    elif dobc_on:
        extra["d_hat"] = _observer_only(cfg, avr_dobc_config(cfg), y[:, names.index("measured")],
                                        y[:, names.index("u_ctrl")])
    else:
        extra["d_hat"] = np.zeros(len(t))
    res = _finish(t, y, names, keep, extra, k_stop, AVR_DIVERGENCE_PU, "|v_terminal| (pu)")
    v = res["v_terminal"]
    final = float(sig["vref"][len(v) - 1])
    res.indices = compute_indices(v - final, loop.dt)
    res.indices = res.indices.with_mo(overshoot(v, final))
    return res


def run(cfg: ScenarioConfig) -> SimResult:
    return run_lfc(cfg) if cfg.system == "lfc" else run_avr(cfg)


def run_batch(configs, workers: int | None = 1) -> list[SimResult]:
    """Run independent scenarios, optionally across processes; order is preserved."""
    configs = list(configs)
    if workers == 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))
