"""Integral performance indices and controller ranking."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

INDEX_NAMES = ("ise", "itse", "iae", "itae", "mo")


@dataclass(frozen=True)
class PerformanceIndices:
    ise: float
    itse: float
    iae: float
    itae: float
    mo: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in INDEX_NAMES}

    def with_mo(self, mo: float) -> "PerformanceIndices":
        return replace(self, mo=float(mo))


def _trapz(y, dt):
    if len(y) < 2:
        return 0.0
    return float(dt * (y.sum() - 0.5 * (y[0] + y[-1])))


def compute_indices(error, dt: float, t0: float = 0.0) -> PerformanceIndices:
    """ISE, ITSE, IAE, ITAE by the trapezoid rule, and MO as the peak ``|error|``."""
    e = np.asarray(error, dtype=float)
    if e.size == 0:
        raise ValueError("empty error signal")
    if not dt > 0:
        raise ValueError("dt must be positive")
    t = t0 + np.arange(e.size) * dt
    sq, ab = e * e, np.abs(e)
    return PerformanceIndices(
        ise=_trapz(sq, dt),
        itse=_trapz(t * sq, dt),
        iae=_trapz(ab, dt),
        itae=_trapz(t * ab, dt),
        mo=float(ab.max()),
    )


def overshoot(signal, final: float) -> float:
    """Peak excursion above the final value (0 when the response never exceeds it)."""
    s = np.asarray(signal, dtype=float)
    return float(max(0.0, s.max() - final))


def rank_controllers(results: dict) -> dict:
    """Per-index ascending ranking: ``{index: [name, ...]}``; ties broken by name."""
    if len(results) < 1:
        raise ValueError("need at least one controller")
    out = {}
    for idx in INDEX_NAMES:
        out[idx] = sorted(results, key=lambda name: (getattr(results[name], idx), name))
    return out


def rank_positions(results: dict) -> dict:
    """``{name: {index: 1-based rank}}``."""
    ranking = rank_controllers(results)
    return {name: {idx: ranking[idx].index(name) + 1 for idx in INDEX_NAMES} for name in results}


def write_indices_csv(path, results: dict, with_rank: bool = False) -> None:
    """Controller rows, index columns (optionally ``rank_<index>`` columns too)."""
    ranks = rank_positions(results) if with_rank else None
    header = ["controller", *INDEX_NAMES]
    if with_rank:
        header += [f"rank_{i}" for i in INDEX_NAMES]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for name, pi in results.items():
            row = [name, *(f"{getattr(pi, i):.12g}" for i in INDEX_NAMES)]
            if with_rank:
                row += [ranks[name][i] for i in INDEX_NAMES]
            w.writerow(row)


def read_indices_csv(path) -> dict:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[row["controller"]] = PerformanceIndices(**{i: float(row[i]) for i in INDEX_NAMES})
    return out
