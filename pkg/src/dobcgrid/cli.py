"""Command-line front end: ``dobcgrid {simulate,worstcase,stochastic,bode,compare}``.

Exit codes: 0 success, 2 configuration error, 3 unstable run.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    DisturbanceEvent,
    DisturbanceProgram,
    ScenarioConfig,
    load_config,
)
from .control import AVR_PRESETS, LFC_PRESETS, controller_preset, make_filter
from .metrics import INDEX_NAMES, PerformanceIndices, rank_positions, write_indices_csv
from .plant_models import lfc_open_loop
from .sim_engine import SimResult, run, run_batch
from .svgplot import write_svg
from .tf_core import cutoff_frequency, freq_response
from .uncertainty import (
    BUDGET_TESTS,
    BetaParams,
    NormalParams,
    UncertaintyBudget,
    backward_reduce,
    generate_scenarios,
    worst_case_select,
    write_scenarios_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE = 0, 2, 3

log = logging.getLogger("dobcgrid")


# ---------------------------------------------------------------- csv helpers


def write_timeseries_csv(path, res: SimResult) -> None:
    names = list(res.channels)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names])
        cols = [res.t, *(res.channels[n] for n in names)]
        for row in zip(*cols):
            w.writerow([f"{v:.12g}" for v in row])


def read_timeseries_csv(path) -> tuple[np.ndarray, dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return data[:, 0], {name: data[:, i + 1] for i, name in enumerate(header[1:])}


def _write_status(out: Path, stable: bool, diagnostics: str) -> None:
    (out / "status.json").write_text(json.dumps({"stable": stable, "diagnostics": diagnostics}, indent=2) + "\n")


# ---------------------------------------------------------------- experiments


def default_program(cfg: ScenarioConfig) -> DisturbanceProgram:
    """The configured program, or the reference test when none is given."""
    if cfg.disturbances.events:
        return cfg.disturbances
    if cfg.system == "avr":
        return DisturbanceProgram((DisturbanceEvent(0.0, "vref", "step", 1.0),))
    budget = UncertaintyBudget(*BUDGET_TESTS[cfg.worstcase_test - 1])
    return worst_case_select(budget, cfg.plant.pv.operating_point_pu, cfg.plant.load_base_pu).program()


def condition_config(cfg: ScenarioConfig, condition: str, delay: float = 0.02,
                     noise_sigma: float = 0.01) -> ScenarioConfig:
    """Apply a comparison condition (clean, delay, noise) to a scenario."""
    prog = default_program(cfg)
    loop = cfg.loop
    if condition == "delay":
        loop = replace(loop, comm_delay=delay)
    elif condition == "noise":
        prog = prog.with_noise("load", noise_sigma)
    elif condition != "clean":
        raise ConfigError(f"unknown condition {condition!r}", "compare.condition")
    return replace(cfg, disturbances=prog, loop=loop)


def compare_controllers(cfg: ScenarioConfig, controllers=None, condition: str | None = None,
                        workers: int = 1) -> tuple[dict, list[SimResult]]:
    table = LFC_PRESETS if cfg.system == "lfc" else AVR_PRESETS
    names = list(controllers or cfg.compare.controllers or table)
    for n in names:
        try:
            controller_preset(cfg.system, n)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), "compare.controllers") from None
    base = condition_config(cfg, condition or cfg.compare.condition, cfg.compare.delay, cfg.compare.noise_sigma)
    configs = [replace(base, controller=replace(base.controller, preset=n, dobc=None)) for n in names]
    results = run_batch(configs, workers)
    return {n: r.indices for n, r in zip(names, results)}, results


@dataclass
class WorstCaseRow:
    test: int
    budget: UncertaintyBudget
    dP_pv: float
    dP_load: float
    df_max: float
    result: SimResult


def worstcase_grid(cfg: ScenarioConfig, workers: int = 1) -> list[WorstCaseRow]:
    rows = cfg.worstcase_budgets if cfg.worstcase_budgets is not None else BUDGET_TESTS
    pv0, load0 = cfg.plant.pv.operating_point_pu, cfg.plant.load_base_pu
    steps = [worst_case_select(UncertaintyBudget(*r), pv0, load0, label=i + 1) for i, r in enumerate(rows)]
    results = run_batch([replace(cfg, disturbances=s.program()) for s in steps], workers)
    return [WorstCaseRow(s.label, s.budget, s.dP_pv, s.dP_load, float(np.max(np.abs(r["delta_f"]))), r)
            for s, r in zip(steps, results)]


@dataclass
class StochasticStudy:
    scenarios: object
    reduced: object
    results: list
    worst_case: SimResult
    envelope_lo: np.ndarray
    envelope_hi: np.ndarray
    band_hz: float

    @property
    def worst_case_df_max(self) -> float:
        return float(np.max(np.abs(self.worst_case["delta_f"])))

    @property
    def within_band(self) -> bool:
        return all(float(np.max(np.abs(r["delta_f"]))) <= self.band_hz for r in self.results)

    @property
    def within_worst_case(self) -> bool:
        b = self.worst_case_df_max
        return bool(np.all(self.envelope_hi <= b) and np.all(self.envelope_lo >= -b))


def stochastic_study(cfg: ScenarioConfig, workers: int = 1, budget: UncertaintyBudget | None = None) -> StochasticStudy:
    sp = cfg.stochastic
    budget = budget or UncertaintyBudget(*BUDGET_TESTS[sp.budget_test - 1])
    pv0, load0 = cfg.plant.pv.operating_point_pu, cfg.plant.load_base_pu
    load = NormalParams(load0, sp.load_sigma_frac * load0) if sp.load_sigma_frac > 0 else None
    full = generate_scenarios(sp.n_samples, sp.seed, budget, BetaParams(sp.beta_alpha, sp.beta_beta),
                              load, pv0, load0, constant_load=sp.load_sigma_frac == 0)
    reduced = backward_reduce(full, min(sp.n_reduced, len(full)))
    configs = [replace(cfg, disturbances=p) for p in reduced.programs()]
    wc = replace(cfg, disturbances=worst_case_select(budget, pv0, load0).program())
    results = run_batch(configs + [wc], workers)
    wc_res, results = results[-1], results[:-1]
    n = min(len(r.t) for r in results)
    stack = np.vstack([r["delta_f"][:n] for r in results])
    return StochasticStudy(full, reduced, results, wc_res, stack.min(axis=0), stack.max(axis=0), sp.band_hz)


def filter_table(lambdas, omega: float = 0.1, order: int = 3) -> list[dict]:
    """Gain and phase at ``omega`` and the -3 dB cutoff of ``1/(lam s + 1)^order`` per lambda."""
    rows = []
    for lam in lambdas:
        B = make_filter(lam, order)
        fp = freq_response(B, [omega])[0]
        rows.append({
            "lambda": lam,
            "gain_db": fp.gain_db,
            "phase_deg": fp.phase_deg,
            "cutoff_rad_s": cutoff_frequency(B),
            "gain_closed_form_db": -10.0 * order * np.log10(1 + (lam * omega) ** 2),
            "phase_closed_form_deg": -order * np.degrees(np.arctan(lam * omega)),
        })
    return rows


# ---------------------------------------------------------------- commands


def _prepare(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.system and args.system != cfg.system:
        table = LFC_PRESETS if args.system == "lfc" else AVR_PRESETS
        preset = cfg.controller.preset if cfg.controller.preset in table else None
        cfg = replace(cfg, system=args.system, controller=replace(cfg.controller, preset=preset))
    loop = cfg.loop
    if args.seed is not None:
        loop = replace(loop, noise_seed=args.seed)
        cfg = replace(cfg, stochastic=replace(cfg.stochastic, seed=args.seed))
    if args.dt is not None:
        loop = replace(loop, dt=args.dt)
    if args.t_end is not None:
        loop = replace(loop, t_end=args.t_end)
    cfg = replace(cfg, loop=loop)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.svg:
        cfg = replace(cfg, svg=True)
    return cfg


def _outdir(cfg: ScenarioConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", "output.dir") from None
    return out


def cmd_simulate(args) -> int:
    cfg = _prepare(args)
    out = _outdir(cfg)
    res = run(cfg)
    write_timeseries_csv(out / "timeseries.csv", res)
    name = cfg.controller.preset
    write_indices_csv(out / "indices.csv", {name: res.indices})
    _write_status(out, res.stable, res.diagnostics)
    if cfg.svg:
        ch = "delta_f" if cfg.system == "lfc" else "v_terminal"
        write_svg(out / "plot.svg", res.t, {name: res[ch]}, title=f"{cfg.system.upper()} response", ylabel=ch)
    pi = res.indices
    print(f"{name}: " + "  ".join(f"{k.upper()}={getattr(pi, k):.6g}" for k in INDEX_NAMES))
    if not res.stable:
        print(f"UNSTABLE: {res.diagnostics}", file=sys.stderr)
        return EXIT_UNSTABLE
    return EXIT_OK


def cmd_worstcase(args) -> int:
    cfg = _prepare(args)
    if cfg.system != "lfc":
        raise ConfigError("worstcase needs an lfc configuration", "system")
    out = _outdir(cfg)
    rows = worstcase_grid(cfg, args.workers)
    with open(out / "worstcase.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["test", "gamma_pv_lo", "gamma_pv_hi", "dP_pv_pu", "gamma_l_lo", "gamma_l_hi", "dP_load_pu", "df_max_hz"])
        for r in rows:
            b = r.budget
            w.writerow([r.test, b.gamma_pv_lo, b.gamma_pv_hi, f"{r.dP_pv:.12g}", b.gamma_l_lo, b.gamma_l_hi,
                        f"{r.dP_load:.12g}", f"{r.df_max:.12g}"])
    dfm = [r.df_max for r in rows]
    arg = rows[int(np.argmax(dfm))].test
    for r in rows:
        print(f"test {r.test:2d}: dP_pv={r.dP_pv:.4f} dP_load={r.dP_load:.4f} df_max={r.df_max:.5f} Hz")
    print(f"worst case: test {arg}")
    stable = all(r.result.stable for r in rows)
    _write_status(out, stable, "; ".join(r.result.diagnostics for r in rows if not r.result.stable))
    if cfg.svg:
        write_svg(out / "worstcase.svg", rows[0].result.t, {f"test {r.test}": r.result["delta_f"] for r in rows},
                  title="Frequency deviation per test condition", ylabel="delta_f (Hz)")
    return EXIT_OK if stable else EXIT_UNSTABLE


def cmd_stochastic(args) -> int:
    cfg = _prepare(args)
    if cfg.system != "lfc":
        raise ConfigError("stochastic needs an lfc configuration", "system")
    out = _outdir(cfg)
    st = stochastic_study(cfg, args.workers)
    write_scenarios_csv(out / "scenarios.csv", st.reduced)
    with open(out / "stochastic_indices.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario_id", "probability", "dP_pv_pu", "dP_load_pu", *INDEX_NAMES, "df_max_hz"])
        for sid, p, pt, r in zip(st.reduced.ids, st.reduced.probabilities, st.reduced.points, st.results):
            w.writerow([int(sid), f"{p:.12g}", f"{pt[0]:.12g}", f"{pt[1]:.12g}",
                        *(f"{getattr(r.indices, k):.12g}" for k in INDEX_NAMES),
                        f"{np.max(np.abs(r['delta_f'])):.12g}"])
    t = st.results[0].t[: len(st.envelope_lo)]
    with open(out / "envelope.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "df_min_hz", "df_max_hz"])
        for row in zip(t, st.envelope_lo, st.envelope_hi):
            w.writerow([f"{v:.12g}" for v in row])
    if cfg.svg:
        write_svg(out / "stochastic.svg", t, {f"scenario {i}": r["delta_f"] for i, r in zip(st.reduced.ids, st.results)},
                  title="Frequency deviation, reduced stochastic scenarios", ylabel="delta_f (Hz)")
    peak = max(float(np.max(np.abs(r["delta_f"]))) for r in st.results)
    print(f"{len(st.scenarios)} samples reduced to {len(st.reduced)} scenarios")
    print(f"max |delta_f| over scenarios: {peak:.5f} Hz (band {st.band_hz} Hz: {'ok' if st.within_band else 'EXCEEDED'})")
    print(f"worst-case |delta_f|: {st.worst_case_df_max:.5f} Hz; envelope contained: {st.within_worst_case}")
    stable = all(r.stable for r in st.results)
    _write_status(out, stable, "; ".join(r.diagnostics for r in st.results if not r.stable))
    return EXIT_OK if stable else EXIT_UNSTABLE


def cmd_bode(args) -> int:
    cfg = _prepare(args)
    out = _outdir(cfg)
    bs = cfg.bode
    lambdas = [float(x) for x in args.lambdas.split(",")] if args.lambdas else list(bs.lambdas)
    if any(not lam > 0 for lam in lambdas):
        raise ConfigError("lambda values must be positive", "bode.lambdas")
    rows = filter_table(lambdas, bs.omega, bs.filter_order)
    with open(out / "filter_table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: f"{v:.12g}" for k, v in r.items()})
    print(f"{'lambda':>8} {'gain_dB':>12} {'phase_deg':>11} {'cutoff':>10}")
    for r in rows:
        print(f"{r['lambda']:>8g} {r['gain_db']:>12.5g} {r['phase_deg']:>11.4g} {r['cutoff_rad_s']:>10.5g}")
    lo, hi = bs.sweep_decades
    omegas = np.logspace(lo, hi, int((hi - lo) * bs.points_per_decade) + 1)
    curves = {f"B lambda={lam:g}": make_filter(lam, bs.filter_order) for lam in lambdas}
    if args.plant or bs.plant:
        curves["U plant"] = lfc_open_loop(cfg.plant.thermal, cfg.plant.power)
    with open(out / "bode_sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["curve", "omega_rad_s", "gain_db", "phase_deg"])
        for name, tf in curves.items():
            for p in freq_response(tf, omegas):
                w.writerow([name, f"{p.omega:.12g}", f"{p.gain_db:.12g}", f"{p.phase_deg:.12g}"])
    if cfg.svg:
        gains = {n: [p.gain_db for p in freq_response(tf, omegas)] for n, tf in curves.items()}
        write_svg(out / "bode_gain.svg", np.log10(omegas), gains, title="Gain", xlabel="log10 omega (rad/s)",
                  ylabel="dB")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _prepare(args)
    out = _outdir(cfg)
    controllers = args.controllers.split(",") if args.controllers else None
    condition = args.condition or cfg.compare.condition
    table, results = compare_controllers(cfg, controllers, condition, args.workers)
    write_indices_csv(out / "compare.csv", table, with_rank=True)
    ranks = rank_positions(table)
    print(f"condition: {condition}")
    print(f"{'controller':>16} " + " ".join(f"{k.upper():>11}" for k in INDEX_NAMES) + "  ranks")
    for name, pi in table.items():
        print(f"{name:>16} " + " ".join(f"{getattr(pi, k):>11.4g}" for k in INDEX_NAMES)
              + "  " + ",".join(str(ranks[name][k]) for k in INDEX_NAMES))
    if cfg.svg:
        ch = "delta_f" if cfg.system == "lfc" else "v_terminal"
        write_svg(out / "compare.svg", results[0].t, {n: r[ch] for n, r in zip(table, results)},
                  title=f"{cfg.system.upper()} comparison ({condition})", ylabel=ch)
    stable = all(r.stable for r in results)
    _write_status(out, stable, "; ".join(r.diagnostics for r in results if not r.stable))
    return EXIT_OK if stable else EXIT_UNSTABLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dobcgrid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML scenario file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="noise / sampling seed")
        p.add_argument("--dt", type=float, help="time step (s)")
        p.add_argument("--t-end", dest="t_end", type=float, help="horizon (s)")
        p.add_argument("--svg", action="store_true", help="also write SVG plots")
        p.add_argument("--system", choices=("lfc", "avr"), help="override the configured system")
        p.add_argument("--workers", type=int, default=1, help="parallel processes for batches")
        return p

    common(sub.add_parser("simulate", help="run one scenario")).set_defaults(func=cmd_simulate)
    common(sub.add_parser("worstcase", help="run the 12 budget test conditions")).set_defaults(func=cmd_worstcase)
    common(sub.add_parser("stochastic", help="Monte Carlo + backward reduction batch")).set_defaults(func=cmd_stochastic)
    p = common(sub.add_parser("bode", help="filter table and frequency sweeps"))
    p.add_argument("--lambdas", help="comma-separated filter parameters")
    p.add_argument("--plant", action="store_true", help="include the LFC plant sweep")
    p.set_defaults(func=cmd_bode)
    p = common(sub.add_parser("compare", help="controller comparison table"))
    p.add_argument("--controllers", help="comma-separated preset names")
    p.add_argument("--condition", choices=("clean", "delay", "noise"))
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
