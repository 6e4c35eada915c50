"""Rational transfer functions in the Laplace variable and their discrete realizations.

Polynomials are stored with ascending powers (``coeffs[k]`` multiplies ``s**k``).
All objects are immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P


class InvalidParameterError(ValueError):
    """A block parameter is outside its admissible range."""


class RealizabilityError(ValueError):
    """A transfer function cannot be realized (improper, or degenerate loop)."""


class NotFoundError(ValueError):
    """A searched quantity (e.g. a -3 dB crossing) does not exist in range."""


def _trim(coeffs: np.ndarray) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1].copy()


@dataclass(frozen=True, eq=False)
class Polynomial:
    coeffs: np.ndarray

    def __init__(self, coeffs: Union[Sequence[float], np.ndarray, float]):
        c = _trim(coeffs)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(P.polymul(self.coeffs, other.coeffs))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(P.polyadd(self.coeffs, other.coeffs))

    def scale(self, k: float) -> "Polynomial":
        return Polynomial(self.coeffs * k)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs.tolist()})"


def _as_poly(x) -> Polynomial:
    return x if isinstance(x, Polynomial) else Polynomial(x)


@dataclass(frozen=True)
class TransferFunction:
    """``num(s) / den(s)``; improper instances are allowed but cannot be discretized."""

    num: Polynomial
    den: Polynomial

    def __init__(self, num, den=1.0):
        num, den = _as_poly(num), _as_poly(den)
        if den.is_zero():
            raise InvalidParameterError("denominator is identically zero")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def gain(cls, k: float) -> "TransferFunction":
        return cls([k], [1.0])

    @property
    def relative_degree(self) -> int:
        if self.num.is_zero():
            return self.den.degree
        return self.den.degree - self.num.degree

    @property
    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    @property
    def order(self) -> int:
        return self.den.degree

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def dc_gain(self) -> float:
        d0 = self.den.coeffs[0]
        if d0 == 0.0:
            return float("inf") if self.num.coeffs[0] != 0.0 else float("nan")
        return float(self.num.coeffs[0] / d0)

    def poles(self) -> np.ndarray:
        return P.polyroots(self.den.coeffs) if self.den.degree > 0 else np.array([])

    def zeros(self) -> np.ndarray:
        return P.polyroots(self.num.coeffs) if self.num.degree > 0 else np.array([])

    def inverse(self) -> "TransferFunction":
        if self.num.is_zero():
            raise RealizabilityError("cannot invert a zero transfer function")
        return TransferFunction(self.den, self.num)

    def __mul__(self, other) -> "TransferFunction":
        if not isinstance(other, TransferFunction):
            other = TransferFunction.gain(float(other))
        return series(self, other)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"TransferFunction(num={self.num.coeffs.tolist()}, den={self.den.coeffs.tolist()})"


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Single-input single-output ``x+ = A x + B u``, ``y = C x + D u``.

    ``dt == 0`` marks a continuous-time model.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    dt: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = 0 if A.size == 0 else A.shape[0]
        A = A.reshape(n, n)
        B = np.asarray(self.B, dtype=float).reshape(n, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, n)
        for m in (A, B, C):
            m.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", float(self.D))
        if self.dt < 0:
            raise InvalidParameterError("dt must be >= 0")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def dc_gain(self) -> float:
        n = self.n_states
        if n == 0:
            return self.D
        eye = np.eye(n) if self.dt > 0 else np.zeros((n, n))
        return float(self.D + (self.C @ np.linalg.solve(eye - self.A, self.B))[0, 0])

    def simulate(self, u: Iterable[float]) -> np.ndarray:
        """Response of a discrete model from zero initial state."""
        if self.dt <= 0:
            raise InvalidParameterError("simulate() needs a discrete-time model")
        u = np.asarray(u, dtype=float)
        x = np.zeros(self.n_states)
        A, B, C = self.A, self.B[:, 0], self.C[0]
        y = np.empty_like(u)
        for k, uk in enumerate(u):
            y[k] = C @ x + self.D * uk
            x = A @ x + B * uk
        return y


@dataclass(frozen=True)
class FrequencyPoint:
    omega: float
    gain_db: float
    phase_deg: float


def tf_first_order(gain: float, time_constant: float) -> TransferFunction:
    """``gain / (1 + s*time_constant)``."""
    if not time_constant > 0:
        raise InvalidParameterError(f"time constant must be positive, got {time_constant}")
    return TransferFunction([gain], [1.0, time_constant])


def series(a: TransferFunction, b: TransferFunction) -> TransferFunction:
    return TransferFunction(a.num * b.num, a.den * b.den)


def parallel(a: TransferFunction, b: TransferFunction) -> TransferFunction:
    return TransferFunction(a.num * b.den + b.num * a.den, a.den * b.den)


def feedback(forward: TransferFunction, back: TransferFunction, sign: int = 1) -> TransferFunction:
    """Closed loop ``forward / (1 + sign*forward*back)``.

    ``sign=+1`` is the usual negative-feedback loop.
    """
    if sign not in (1, -1):
        raise InvalidParameterError("sign must be +1 or -1")
    num = forward.num * back.den
    den = forward.den * back.den + (forward.num * back.num).scale(sign)
    if den.is_zero():
        raise RealizabilityError("algebraic loop: closed-loop denominator is identically zero")
    return TransferFunction(num, den)


def _companion(num: np.ndarray, den: np.ndarray):
    """Controllable canonical realization of a proper ratio, descending-power coeffs.

    Returns (A, B, C, D) with ``den[0] != 0``.
    """
    den = np.asarray(den, dtype=float)
    num = np.asarray(num, dtype=float)
    n = len(den) - 1
    a0 = den[0]
    den = den / a0
    num = np.concatenate([np.zeros(n + 1 - len(num)), num]) / a0
    d = num[0]
    if n == 0:
        return np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), d
    rem = num[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = rem.reshape(1, n)
    return A, B, C, d


def to_state_space(tf: TransferFunction) -> StateSpaceModel:
    """Continuous controllable-canonical realization."""
    if not tf.is_proper:
        raise RealizabilityError(f"improper transfer function (relative degree {tf.relative_degree})")
    A, B, C, D = _companion(tf.num.coeffs[::-1], tf.den.coeffs[::-1])
    return StateSpaceModel(A, B, C, D, 0.0)


def discretize_bilinear(tf: TransferFunction, dt: float) -> StateSpaceModel:
    """Tustin map ``s <- (2/dt)(z-1)/(z+1)`` applied to the canonical realization."""
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    cont = to_state_space(tf)
    n = cont.n_states
    if n == 0:
        return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), cont.D, dt)
    h = dt / 2.0
    M = np.eye(n) - h * cont.A
    Minv_A = np.linalg.solve(M, np.eye(n) + h * cont.A)
    Minv_B = np.linalg.solve(M, cont.B)
    Ad = Minv_A
    Bd = dt * Minv_B
    Cd = np.linalg.solve(M.T, cont.C.T).T
    Dd = cont.D + h * float((cont.C @ Minv_B)[0, 0])
    return StateSpaceModel(Ad, Bd, Cd, Dd, dt)


def realize_discrete(num_zinv: Sequence[float], den_zinv: Sequence[float], dt: float) -> StateSpaceModel:
    """Realize ``sum b_k z^-k / sum a_k z^-k`` (``a_0 != 0``)."""
    num = np.asarray(num_zinv, dtype=float)
    den = np.asarray(den_zinv, dtype=float)
    n = max(len(num), len(den)) - 1
    num = np.concatenate([num, np.zeros(n + 1 - len(num))])
    den = np.concatenate([den, np.zeros(n + 1 - len(den))])
    if den[0] == 0.0:
        raise RealizabilityError("leading z^0 denominator coefficient must be nonzero")
    # in z^-k form, multiplying through by z^n gives descending powers of z directly
    A, B, C, D = _companion(num, den)
    return StateSpaceModel(A, B, C, D, dt)


def delay_line(samples: int, dt: float) -> StateSpaceModel:
    """Pure ``z^-samples`` shift register."""
    if samples < 0:
        raise InvalidParameterError("delay must be non-negative")
    if samples == 0:
        return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), 1.0, dt)
    A = np.eye(samples, k=-1)
    B = np.zeros((samples, 1))
    B[0, 0] = 1.0
    C = np.zeros((1, samples))
    C[0, -1] = 1.0
    return StateSpaceModel(A, B, C, 0.0, dt)


def _check_on_axis_poles(tf: TransferFunction, omegas: np.ndarray) -> None:
    d = tf.den(1j * omegas)
    scale = np.abs(tf.den.coeffs).max()
    bad = np.abs(d) <= 1e-14 * scale
    if np.any(bad):
        raise RealizabilityError(f"imaginary-axis pole at omega={omegas[bad][0]}")


def freq_response(tf: TransferFunction, omegas: Iterable[float]) -> list[FrequencyPoint]:
    """Exact evaluation of ``H(jw)``.

    Phase is unwrapped along a dense log grid starting well below the smallest
    requested frequency, so isolated points report the branch reached
    continuously from DC.
    """
    w = np.asarray(list(omegas), dtype=float)
    if w.size == 0:
        return []
    if np.any(w <= 0):
        raise InvalidParameterError("frequencies must be positive")
    _check_on_axis_poles(tf, w)
    lo, hi = np.log10(w.min()) - 4.0, np.log10(w.max())
    grid = np.logspace(lo, hi, max(int((hi - lo) * 200), 2) + 1)
    allw = np.union1d(grid, w)
    ang = np.unwrap(np.angle(tf(1j * allw)))
    idx = np.searchsorted(allw, w)
    H = tf(1j * w)
    gain = 20.0 * np.log10(np.abs(H))
    phase = np.degrees(ang[idx])
    return [FrequencyPoint(float(a), float(g), float(p)) for a, g, p in zip(w, gain, phase)]


def cutoff_frequency(tf: TransferFunction, drop_db: float = 3.0, rtol: float = 1e-6) -> float:
    """Smallest frequency where the gain falls ``drop_db`` below its DC value."""
    g0 = abs(tf.dc_gain())
    if not np.isfinite(g0) or g0 == 0.0:
        raise InvalidParameterError("DC gain must be finite and nonzero")
    target = 20.0 * np.log10(g0) - drop_db

    def excess(w):
        return 20.0 * np.log10(np.abs(tf(1j * w))) - target

    grid = np.logspace(-6, 9, 15 * 100 + 1)
    e = excess(grid)
    below = np.flatnonzero(e < 0)
    if below.size == 0:
        raise NotFoundError("no -3 dB crossing in [1e-6, 1e9] rad/s")
    k = below[0]
    if k == 0:
        raise NotFoundError("gain already below DC - 3 dB at 1e-6 rad/s")
    a, b = grid[k - 1], grid[k]
    while (b - a) > rtol * a * 1e-3:
        m = 0.5 * (a + b)
        if excess(m) >= 0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)
