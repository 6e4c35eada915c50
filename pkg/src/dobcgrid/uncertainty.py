"""Worst-case (polyhedral budget) steps and stochastic PV/load scenarios with backward reduction."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .config import DisturbanceProgram
from .plant_models import PlantPreset

P_PV0 = 0.375
P_L0 = 0.5


@dataclass(frozen=True)
class UncertaintyBudget:
    """Interval multipliers on the PV and load forecasts.

    ``mu_lo``/``mu_hi`` bound the time-aggregated ratio to forecast; with a
    single-period step they never bind.
    """

    gamma_pv_lo: float = 1.0
    gamma_pv_hi: float = 1.0
    gamma_l_lo: float = 1.0
    gamma_l_hi: float = 1.0
    mu_lo: float = 0.0
    mu_hi: float = float("inf")

    def __post_init__(self):
        for lo, hi, name in ((self.gamma_pv_lo, self.gamma_pv_hi, "pv"), (self.gamma_l_lo, self.gamma_l_hi, "load")):
            if not lo <= 1.0 <= hi:
                raise ValueError(f"{name} budget must satisfy lo <= 1 <= hi, got ({lo}, {hi})")
        if self.mu_lo > self.mu_hi:
            raise ValueError("mu_lo must not exceed mu_hi")


@dataclass(frozen=True)
class WorstCaseStep:
    """Step magnitudes: ``dP_pv`` is the PV drop, ``dP_load`` the load rise (both >= 0)."""

    dP_pv: float
    dP_load: float
    label: int = 0
    budget: UncertaintyBudget | None = None

    def program(self) -> DisturbanceProgram:
        return DisturbanceProgram.steps(pv=-self.dP_pv, load=self.dP_load)


# (gamma_pv_lo, gamma_pv_hi, gamma_l_lo, gamma_l_hi) per test condition
BUDGET_TESTS = (
    (0.95, 1.05, 0.95, 1.05),
    (0.90, 1.10, 0.90, 1.10),
    (0.85, 1.15, 0.85, 1.15),
    (0.95, 1.05, 0.80, 1.20),
    (0.90, 1.10, 0.95, 1.05),
    (0.85, 1.15, 0.90, 1.10),
    (0.95, 1.05, 0.85, 1.15),
    (0.90, 1.10, 0.80, 1.20),
    (0.85, 1.15, 0.95, 1.05),
    (0.95, 1.05, 0.90, 1.10),
    (0.90, 1.10, 0.85, 1.15),
    (0.85, 1.15, 0.80, 1.20),
)


def worst_case_select(budget: UncertaintyBudget, pv0: float = P_PV0, load0: float = P_L0,
                      label: int = 0) -> WorstCaseStep:
    """Vertex with PV at its lower and load at its upper bound.

    The frequency excursion grows with the net power deficit, so this vertex
    maximizes it over the box.
    """
    return WorstCaseStep((1.0 - budget.gamma_pv_lo) * pv0, (budget.gamma_l_hi - 1.0) * load0, label, budget)


def budget_vertices(budget: UncertaintyBudget, pv0: float = P_PV0, load0: float = P_L0):
    """Signed ``(dP_pv, dP_load)`` at the four corners of the box."""
    pvs = ((budget.gamma_pv_lo - 1.0) * pv0, (budget.gamma_pv_hi - 1.0) * pv0)
    loads = ((budget.gamma_l_lo - 1.0) * load0, (budget.gamma_l_hi - 1.0) * load0)
    return [(p, l) for p in pvs for l in loads]


def budget_test_grid(plant: PlantPreset | None = None) -> list[WorstCaseStep]:
    plant = plant or PlantPreset()
    pv0, load0 = plant.pv.operating_point_pu, plant.load_base_pu
    return [
        worst_case_select(UncertaintyBudget(*row), pv0, load0, label=i + 1)
        for i, row in enumerate(BUDGET_TESTS)
    ]


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True)
class BetaParams:
    alpha: float = 2.0
    beta: float = 5.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")

    @property
    def normalizer(self) -> float:
        """Constant making ``y^(a-1) (1-y)^(b-1)`` integrate to one on [0, 1]."""
        from math import lgamma, exp

        a, b = self.alpha, self.beta
        return exp(lgamma(a + b) - lgamma(a) - lgamma(b))

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        return y ** (self.alpha - 1) * (1 - y) ** (self.beta - 1) * self.normalizer


@dataclass(frozen=True)
class NormalParams:
    mu: float = P_L0
    sigma: float = 0.03 * P_L0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


def sample_beta(p: BetaParams, n: int, seed, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """``n`` Beta draws mapped affinely from [0, 1] onto [low, high]."""
    if n <= 0:
        raise ValueError("n must be positive")
    y = np.random.default_rng(seed).beta(p.alpha, p.beta, size=n)
    return low + (high - low) * y


def sample_normal(p: NormalParams, n: int, seed) -> np.ndarray:
    if n <= 0:
        raise ValueError("n must be positive")
    return np.random.default_rng(seed).normal(p.mu, p.sigma, size=n)


# ---------------------------------------------------------------- scenario sets


@dataclass
class ScenarioSet:
    """Single-period scenarios: rows of ``(dP_pv, dP_load)`` (signed deviations) with probabilities."""

    points: np.ndarray
    probabilities: np.ndarray
    ids: np.ndarray = field(default=None)
    reduced: bool = False

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.ids is None:
            self.ids = np.arange(len(self.points))
        self.ids = np.asarray(self.ids, dtype=int)
        if not (len(self.points) == len(self.probabilities) == len(self.ids)):
            raise ValueError("points, probabilities and ids must have equal length")
        if np.any(self.probabilities < 0):
            raise ValueError("probabilities must be non-negative")
        if len(self.points) and abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {self.probabilities.sum()!r}, not 1")

    def __len__(self) -> int:
        return len(self.points)

    def programs(self):
        return [DisturbanceProgram.steps(pv=float(p), load=float(l)) for p, l in self.points]


def generate_scenarios(n: int, seed, budget: UncertaintyBudget, beta: BetaParams = BetaParams(),
                       load: NormalParams | None = None, pv0: float = P_PV0,
                       load0: float = P_L0, constant_load: bool = False) -> ScenarioSet:
    """Monte Carlo scenarios inside ``budget``, equally weighted.

    PV multipliers follow the Beta law stretched over the PV interval; load
    draws follow the Normal law and are clipped to the load interval.
    ``constant_load`` pins every load draw to ``load0``.
    """
    load = load or NormalParams(load0, 0.03 * load0)
    rng = np.random.default_rng(seed)
    s_pv, s_load = rng.integers(0, 2**63 - 1, size=2)
    gamma_pv = sample_beta(beta, n, int(s_pv), budget.gamma_pv_lo, budget.gamma_pv_hi)
    if constant_load:
        p_load = np.full(n, load0)
    else:
        p_load = np.clip(sample_normal(load, n, int(s_load)), budget.gamma_l_lo * load0, budget.gamma_l_hi * load0)
    pts = np.column_stack([(gamma_pv - 1.0) * pv0, p_load - load0])
    return ScenarioSet(pts, np.full(n, 1.0 / n))


def _distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def backward_step_costs(points, probs, alive) -> np.ndarray:
    """``p_i * min_{j alive, j != i} d(i, j)`` for alive ``i`` (``inf`` elsewhere)."""
    d = _distances(np.asarray(points, dtype=float))
    alive = np.asarray(alive, dtype=bool)
    cost = np.full(len(probs), np.inf)
    for i in np.flatnonzero(alive):
        others = alive.copy()
        others[i] = False
        if others.any():
            cost[i] = probs[i] * d[i, others].min()
    return cost


def backward_reduce(s: ScenarioSet, target_count: int) -> ScenarioSet:
    """Greedy backward reduction.

    Repeatedly delete the scenario whose probability-weighted distance to its
    nearest surviving neighbour is smallest, and hand its probability to that
    neighbour. Ties go to the lower index.
    """
    n = len(s)
    if n == 0:
        raise ValueError("cannot reduce an empty scenario set")
    if not 1 <= target_count <= n:
        raise ValueError(f"target_count must be in [1, {n}]")
    d = _distances(s.points)
    p = s.probabilities.copy()
    alive = np.ones(n, dtype=bool)
    for _ in range(n - target_count):
        best, best_cost, best_j = -1, np.inf, -1
        for i in np.flatnonzero(alive):
            others = np.flatnonzero(alive)
            others = others[others != i]
            j = others[np.argmin(d[i, others])]
            c = p[i] * d[i, j]
            if c < best_cost:
                best, best_cost, best_j = i, c, j
        alive[best] = False
        p[best_j] += p[best]
        p[best] = 0.0
    probs = p[alive]
    probs = probs / probs.sum()
    return ScenarioSet(s.points[alive].copy(), probs, s.ids[alive].copy(), reduced=True)


def write_scenarios_csv(path, s: ScenarioSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario_id", "dP_pv_pu", "dP_load_pu", "probability"])
        for sid, (pv, ld), pr in zip(s.ids, s.points, s.probabilities):
            w.writerow([int(sid), repr(float(pv)), repr(float(ld)), repr(float(pr))])


def read_scenarios_csv(path) -> ScenarioSet:
    ids, pts, probs = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ids.append(int(row["scenario_id"]))
            pts.append((float(row["dP_pv_pu"]), float(row["dP_load_pu"])))
            probs.append(float(row["probability"]))
    probs = np.asarray(probs)
    return ScenarioSet(np.asarray(pts), probs, np.asarray(ids))
