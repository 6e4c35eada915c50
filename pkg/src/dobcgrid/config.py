"""Scenario configuration records and their YAML (de)serialization.

Schema (``schema_version: 1``)::

    schema_version: 1
    system: lfc                      # lfc | avr
    plant:
      preset: paper-appendix
      thermal: {R: 2.4}              # any field override, per parameter group
    controller:
      preset: ipso-dobc
      dobc: null                     # null = follow the preset name
      compensate: true               # false = observer runs but is not fed forward
      lambda: 0.01
      filter_order: 3
      derivative_filter_N: 100
      gains: null                    # {k_p, k_i, k_d} overrides the preset gains
    disturbances:
      - {time: 0.0, channel: pv, kind: step, magnitude: -0.0562}
      - {time: 0.0, channel: load, kind: white-noise-on, noise_sigma: 0.01}
    loop: {dt: 0.001, t_end: 20.0, comm_delay: 0.0, noise_seed: 0, delay_location: measurement}
    output: {dir: out, svg: false}
    compare: {controllers: [...], condition: clean}
    worstcase: {test: 12, budgets: null}
    stochastic: {n_samples: 200, n_reduced: 10, seed: 0, ...}
    bode: {lambdas: [...], omega: 0.1, filter_order: 3, plant: true}
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional

import yaml

from .control import DEFAULT_DERIVATIVE_N, DEFAULT_LAMBDA, PidGains, controller_preset
from .plant_models import (
    AvrParams,
    PlantPreset,
    PowerSystemParams,
    PvChainParams,
    ThermalParams,
    plant_preset,
)

SCHEMA_VERSION = 1
CHANNELS = ("pv", "load", "vref")
KINDS = ("step", "white-noise-on")
CONDITIONS = ("clean", "delay", "noise")
DEFAULT_CONTROLLER = {"lfc": "ipso-dobc", "avr": "nlta-dobc"}


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the offending field or line."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class DisturbanceEvent:
    time: float
    channel: str
    kind: str = "step"
    magnitude: float = 0.0
    noise_sigma: float = 0.0


@dataclass(frozen=True)
class DisturbanceProgram:
    events: tuple = ()

    def __post_init__(self):
        times = [e.time for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ConfigError("event times must be non-decreasing", "disturbances")
        for i, e in enumerate(self.events):
            where = f"disturbances[{i}]"
            if e.channel not in CHANNELS:
                raise ConfigError(f"channel must be one of {CHANNELS}, got {e.channel!r}", where)
            if e.kind not in KINDS:
                raise ConfigError(f"kind must be one of {KINDS}, got {e.kind!r}", where)
            if e.time < 0:
                raise ConfigError("time must be >= 0", where)
            if e.noise_sigma < 0:
                raise ConfigError("noise_sigma must be >= 0", where)
            for v in (e.magnitude, e.noise_sigma, e.time):
                if v != v or v in (float("inf"), float("-inf")):
                    raise ConfigError("values must be finite", where)

    @classmethod
    def steps(cls, **magnitudes: float) -> "DisturbanceProgram":
        """Steps at t=0, e.g. ``DisturbanceProgram.steps(pv=-0.0562, load=0.1)``."""
        return cls(tuple(DisturbanceEvent(0.0, ch, "step", float(m)) for ch, m in magnitudes.items() if m))

    def with_noise(self, channel: str, sigma: float, time: float = 0.0) -> "DisturbanceProgram":
        ev = sorted(self.events + (DisturbanceEvent(time, channel, "white-noise-on", 0.0, sigma),),
                    key=lambda e: e.time)
        return DisturbanceProgram(tuple(ev))


@dataclass(frozen=True)
class LoopSettings:
    dt: float = 0.001
    t_end: float = 20.0
    comm_delay: float = 0.0
    noise_seed: int = 0
    delay_location: str = "measurement"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive", "loop.dt")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive", "loop.t_end")
        if self.comm_delay < 0:
            raise ConfigError("comm_delay must be >= 0", "loop.comm_delay")
        if self.delay_location not in ("measurement", "control"):
            raise ConfigError("delay_location must be 'measurement' or 'control'", "loop.delay_location")

    @property
    def n_samples(self) -> int:
        return int(round(self.t_end / self.dt)) + 1


@dataclass(frozen=True)
class ControllerSpec:
    preset: Optional[str] = None  # None = system default (ipso-dobc / nlta-dobc)
    dobc: Optional[bool] = None
    compensate: bool = True
    lam: float = DEFAULT_LAMBDA
    filter_order: int = 3
    derivative_filter_N: float = DEFAULT_DERIVATIVE_N
    gains: Optional[tuple] = None  # (k_p, k_i, k_d)

    def resolve(self, system: str) -> tuple[PidGains, bool]:
        p = controller_preset(system, self.preset or DEFAULT_CONTROLLER[system])
        kp, ki, kd = self.gains if self.gains is not None else (p.gains.k_p, p.gains.k_i, p.gains.k_d)
        enabled = p.dobc if self.dobc is None else self.dobc
        return PidGains(kp, ki, kd, self.derivative_filter_N), enabled


@dataclass(frozen=True)
class CompareSpec:
    controllers: tuple = ()
    condition: str = "clean"
    delay: float = 0.02
    noise_sigma: float = 0.01


@dataclass(frozen=True)
class StochasticSpec:
    n_samples: int = 200
    n_reduced: int = 10
    seed: int = 0
    beta_alpha: float = 2.0
    beta_beta: float = 5.0
    load_sigma_frac: float = 0.03
    budget_test: int = 12
    band_hz: float = 3.0


@dataclass(frozen=True)
class BodeSpec:
    lambdas: tuple = (5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.2, 0.15, 0.1, 0.05, 0.01)
    omega: float = 0.1
    filter_order: int = 3
    plant: bool = False
    sweep_decades: tuple = (-3.0, 3.0)
    points_per_decade: int = 20


@dataclass(frozen=True)
class ScenarioConfig:
    system: str = "lfc"
    plant_name: str = "paper-appendix"
    plant: PlantPreset = field(default_factory=PlantPreset)
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    disturbances: DisturbanceProgram = field(default_factory=DisturbanceProgram)
    loop: LoopSettings = field(default_factory=LoopSettings)
    out_dir: str = "out"
    svg: bool = False
    compare: CompareSpec = field(default_factory=CompareSpec)
    stochastic: StochasticSpec = field(default_factory=StochasticSpec)
    bode: BodeSpec = field(default_factory=BodeSpec)
    worstcase_test: int = 12
    worstcase_budgets: Optional[tuple] = None  # rows of (pv_lo, pv_hi, load_lo, load_hi)

    def __post_init__(self):
        if self.system not in ("lfc", "avr"):
            raise ConfigError("system must be 'lfc' or 'avr'", "system")
        if self.controller.preset is None:
            default = DEFAULT_CONTROLLER[self.system]
            object.__setattr__(self, "controller", replace(self.controller, preset=default))
        try:
            controller_preset(self.system, self.controller.preset)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), "controller.preset") from None
        self.plant.check_pv_operating_point()

    def evolve(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------- serialization

_PLANT_GROUPS = {"thermal": ThermalParams, "power": PowerSystemParams, "pv": PvChainParams, "avr": AvrParams}
_CONTROLLER_KEYS = {"lambda": "lam"}


def _build(cls, data: dict, where: str, rename: dict | None = None):
    rename = rename or {}
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping, got {type(data).__name__}", where)
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, val in data.items():
        attr = rename.get(key, key)
        if attr not in names:
            raise ConfigError(f"unknown field {key!r}", f"{where}.{key}")
        kwargs[attr] = val
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where) from None


def _num(x, where, kind=float):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"expected a number, got {x!r}", where)
    return kind(x)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}", "schema_version")
    known = {"system", "plant", "controller", "disturbances", "loop", "output",
             "compare", "stochastic", "bode", "worstcase"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown section {key!r}", key)
    kw: dict[str, Any] = {}
    if "system" in data:
        kw["system"] = str(data["system"]).lower()

    plant = data.get("plant") or {}
    if isinstance(plant, str):
        plant = {"preset": plant}
    if not isinstance(plant, dict):
        raise ConfigError("expected a preset name or mapping", "plant")
    name = plant.get("preset", "paper-appendix")
    try:
        base = plant_preset(name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), "plant.preset") from None
    groups = {}
    for key, val in plant.items():
        if key == "preset":
            continue
        if key == "load_base_pu":
            groups[key] = _num(val, "plant.load_base_pu")
            continue
        if key not in _PLANT_GROUPS:
            raise ConfigError(f"unknown plant group {key!r}", f"plant.{key}")
        cur = dataclasses.asdict(getattr(base, key))
        cur.update(val or {})
        groups[key] = _build(_PLANT_GROUPS[key], cur, f"plant.{key}")
    kw["plant_name"] = name
    kw["plant"] = replace(base, **groups)

    if "controller" in data:
        c = data["controller"]
        if isinstance(c, str):
            c = {"preset": c}
        c = dict(c or {})
        if c.get("gains") is not None:
            g = c["gains"]
            if isinstance(g, dict):
                try:
                    g = (g["k_p"], g["k_i"], g["k_d"])
                except KeyError as exc:
                    raise ConfigError(f"missing gain {exc.args[0]}", "controller.gains") from None
            c["gains"] = tuple(_num(v, "controller.gains") for v in g)
        kw["controller"] = _build(ControllerSpec, c, "controller", _CONTROLLER_KEYS)

    if "disturbances" in data:
        evs = data["disturbances"] or []
        if not isinstance(evs, list):
            raise ConfigError("expected a list of events", "disturbances")
        events = tuple(_build(DisturbanceEvent, e, f"disturbances[{i}]") for i, e in enumerate(evs))
        kw["disturbances"] = DisturbanceProgram(events)

    if "loop" in data:
        kw["loop"] = _build(LoopSettings, data["loop"] or {}, "loop")
    if "output" in data:
        out = data["output"] or {}
        if not isinstance(out, dict):
            raise ConfigError("expected a mapping", "output")
        for key in out:
            if key not in ("dir", "svg"):
                raise ConfigError(f"unknown field {key!r}", f"output.{key}")
        if "dir" in out:
            kw["out_dir"] = str(out["dir"])
        if "svg" in out:
            kw["svg"] = bool(out["svg"])
    if "compare" in data:
        c = dict(data["compare"] or {})
        if "controllers" in c:
            c["controllers"] = tuple(str(x).lower() for x in c["controllers"])
        if c.get("condition", "clean") not in CONDITIONS:
            raise ConfigError(f"condition must be one of {CONDITIONS}", "compare.condition")
        kw["compare"] = _build(CompareSpec, c, "compare")
    if "stochastic" in data:
        kw["stochastic"] = _build(StochasticSpec, data["stochastic"] or {}, "stochastic")
    if "bode" in data:
        b = dict(data["bode"] or {})
        for key in ("lambdas", "sweep_decades"):
            if key in b:
                b[key] = tuple(_num(v, f"bode.{key}") for v in b[key])
        kw["bode"] = _build(BodeSpec, b, "bode")
    if "worstcase" in data:
        w = data["worstcase"] or {}
        for key in w:
            if key not in ("test", "budgets"):
                raise ConfigError(f"unknown field {key!r}", f"worstcase.{key}")
        kw["worstcase_test"] = int(_num(w.get("test", 12), "worstcase.test", int))
        if w.get("budgets") is not None:
            rows = []
            for i, row in enumerate(w["budgets"]):
                if not isinstance(row, (list, tuple)) or len(row) != 4:
                    raise ConfigError("expected [pv_lo, pv_hi, load_lo, load_hi]", f"worstcase.budgets[{i}]")
                rows.append(tuple(_num(v, f"worstcase.budgets[{i}]") for v in row))
            kw["worstcase_budgets"] = tuple(rows)

    try:
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg: ScenarioConfig) -> dict:
    ctrl = dataclasses.asdict(cfg.controller)
    ctrl["lambda"] = ctrl.pop("lam")
    ctrl["gains"] = list(ctrl["gains"]) if ctrl["gains"] is not None else None
    plant = {"preset": cfg.plant_name, "load_base_pu": cfg.plant.load_base_pu}
    for key in _PLANT_GROUPS:
        plant[key] = dataclasses.asdict(getattr(cfg.plant, key))
    compare = dataclasses.asdict(cfg.compare)
    compare["controllers"] = list(compare["controllers"])
    bode = dataclasses.asdict(cfg.bode)
    bode["lambdas"] = list(bode["lambdas"])
    bode["sweep_decades"] = list(bode["sweep_decades"])
    return {
        "schema_version": SCHEMA_VERSION,
        "system": cfg.system,
        "plant": plant,
        "controller": ctrl,
        "disturbances": [dataclasses.asdict(e) for e in cfg.disturbances.events],
        "loop": dataclasses.asdict(cfg.loop),
        "output": {"dir": cfg.out_dir, "svg": cfg.svg},
        "compare": compare,
        "stochastic": dataclasses.asdict(cfg.stochastic),
        "bode": bode,
        "worstcase": {
            "test": cfg.worstcase_test,
            "budgets": [list(r) for r in cfg.worstcase_budgets] if cfg.worstcase_budgets is not None else None,
        },
    }


def loads_config(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}", where) from None
    return config_from_dict(data if data is not None else {})


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read())


def dumps_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
