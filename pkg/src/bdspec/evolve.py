"""Classical and quantum time evolution through the spectral sums.

Every evolution is a closed-form sum over modes n = 0, 1, ... in ascending
order. The quantum kernel sum_n exp(-i E(n) z) phi_n(x) phi_n(y) is shared:
at real z it is the amplitude Psi, and at z = -i t, conjugated by the ground
state, it is the classical transition probability.

Point sources must lie inside the eigensystem's certified core (every
state for finite families): the kernel is accurate whenever one of x, y does.
Classical entries carry an absolute error of about eps * phi_0(x)/phi_0(y),
so weights spanning many decades (small-q families) lose accuracy when
moving probability from rare states to likely ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .process import TridiagonalMatrix
from .spectral import EigenSystem, kappa_spectrum

__all__ = [
    "NegativeProbability",
    "InitialDistribution",
    "InitialState",
    "AmplitudeGrid",
    "ExpansionCoefficients",
    "expansion_coefficients",
    "classical_condition",
    "well_conditioned_sources",
    "reconstruct_initial",
    "kernel",
    "classical_ct_transition",
    "classical_ct_matrix",
    "classical_ct_distribution",
    "continued_kernel",
    "classical_dt_transition",
    "classical_dt_evolution",
    "classical_dt_direct",
    "quantum_ct_amplitude",
    "quantum_ct_matrix",
    "quantum_ct_probability",
    "quantum_ct_evolution",
    "quantum_dt_amplitude",
    "quantum_dt_evolution",
    "long_time_average",
    "time_averaged_probability",
    "damped_limit",
    "detect_period",
]

NORM_TOL = 1e-12
NEGATIVE_TOL = 1e-12
PERIOD_DENOMINATOR_CAP = 10**6


class NegativeProbability(ArithmeticError):
    """A classical probability fell below -1e-12 (truncation or cancellation failure)."""


def _check_nonnegative(values: np.ndarray, what: str) -> None:
    low = float(np.min(values)) if values.size else 0.0
    if low < -NEGATIVE_TOL:
        raise NegativeProbability(f"{what} reached {low:.3e}")


@dataclass(frozen=True, eq=False)
class InitialDistribution:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("initial distribution must be a non-empty vector")
        if np.any(w < 0):
            raise ValueError("initial distribution has negative weights")
        if abs(math.fsum(w) - 1.0) > NORM_TOL:
            raise ValueError(f"initial distribution sums to {math.fsum(w)!r}, not 1")

    @classmethod
    def delta(cls, size: int, y: int) -> "InitialDistribution":
        w = np.zeros(size)
        w[y] = 1.0
        return cls(w)


@dataclass(frozen=True, eq=False)
class InitialState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("initial state must be a non-empty vector")
        norm = math.fsum(np.abs(a) ** 2)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"initial state has squared norm {norm!r}, not 1")

    @classmethod
    def delta(cls, size: int, y: int) -> "InitialState":
        a = np.zeros(size, dtype=complex)
        a[y] = 1.0
        return cls(a)


@dataclass(frozen=True, eq=False)
class AmplitudeGrid:
    """Values indexed (time, x); real for classical grids, complex for quantum ones."""

    times: np.ndarray
    values: np.ndarray
    kind: str
    origin: object = None
    discrete: bool = False
    t_S: float | None = None

    def __post_init__(self):
        if self.kind not in ("classical", "quantum"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.values.shape[0] != len(self.times):
            raise ValueError("one row of values per time is required")
        if self.kind == "classical":
            _check_nonnegative(self.values, "classical probability")

    @property
    def probabilities(self) -> np.ndarray:
        if self.kind == "quantum":
            return np.abs(self.values) ** 2
        return self.values

    def conservation_error(self) -> float:
        """Worst per-time deviation of the total probability from 1."""
        totals = np.array([math.fsum(row) for row in self.probabilities])
        return float(np.max(np.abs(totals - 1.0))) if totals.size else 0.0


@dataclass(frozen=True, eq=False)
class ExpansionCoefficients:
    c: np.ndarray

    def __post_init__(self):
        if abs(self.c[0] - 1.0) > NORM_TOL:
            raise ValueError(f"c_0 = {self.c[0]!r}, expected 1")


def _check_source(es: EigenSystem, *states: int) -> None:
    for s in states:
        if not 0 <= s < es.size:
            raise IndexError(f"state {s} outside 0..{es.size - 1}")
        if s >= es.core:
            raise ValueError(f"state {s} lies beyond the certified core (< {es.core}) of the truncation")


def _check_support(es: EigenSystem, weights: np.ndarray) -> None:
    if len(weights) != es.size:
        raise ValueError(f"initial vector has length {len(weights)}, state space has {es.size}")


def classical_condition(es: EigenSystem) -> np.ndarray:
    """Per source y, max_x phi_0(x)/phi_0(y): the factor by which classical
    spectral sums from y amplify rounding errors of the symmetric kernel."""
    g = es.ground
    return float(np.max(g)) / g


def well_conditioned_sources(es: EigenSystem, limit: float = 1e4) -> list[int]:
    """Core states whose classical evolution keeps about eps * limit accuracy."""
    cond = classical_condition(es)
    return [y for y in range(es.core) if cond[y] <= limit]


def expansion_coefficients(es: EigenSystem, init: InitialDistribution) -> ExpansionCoefficients:
    """c_n = sum_x phi_n(x) P(x; 0) / phi_0(x)."""
    p = init.weights
    _check_support(es, p)
    return ExpansionCoefficients(es.vectors.T @ (p / es.ground))


def reconstruct_initial(es: EigenSystem, coeffs: ExpansionCoefficients) -> np.ndarray:
    return es.ground * (es.vectors @ coeffs.c)


def kernel(es: EigenSystem, x: int, y: int, z: complex) -> complex:
    """sum_n exp(-i E(n) z) phi_n(x) phi_n(y) for complex z."""
    phases = np.exp(-1j * es.eigenvalues * z)
    return complex(np.sum(phases * es.vectors[x] * es.vectors[y]))


def continued_kernel(es: EigenSystem, x: int, y: int, t: float) -> float:
    """phi_0(x)/phi_0(y) sum_n exp(-E(n) t) phi_n(x) phi_n(y): the kernel at z = -i t."""
    return (es.ground[x] / es.ground[y]) * kernel(es, x, y, -1j * t).real


def classical_ct_transition(es: EigenSystem, x: int, y: int, t: float) -> float:
    """Probability of being at x after time t, starting from y."""
    if t < 0:
        raise ValueError("t must be non-negative")
    _check_source(es, min(x, y))
    value = continued_kernel(es, x, y, t)
    _check_nonnegative(np.array([value]), f"P({x},{y};{t})")
    return value


def classical_ct_matrix(es: EigenSystem, t: float, sources: Sequence[int] | None = None) -> np.ndarray:
    """Transition matrix P(x, y; t) with columns y in ``sources`` (default: the core)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    ys = list(range(es.core)) if sources is None else list(sources)
    _check_source(es, *ys)
    V = es.vectors
    damp = np.exp(-es.eigenvalues * t)
    M = (V * damp) @ V[ys].T
    M = es.ground[:, None] * M / es.ground[ys][None, :]
    _check_nonnegative(M, f"P(x,y;{t})")
    return M


def classical_ct_distribution(es: EigenSystem, init: InitialDistribution, times) -> AmplitudeGrid:
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    c = expansion_coefficients(es, init).c
    damp = np.exp(-np.outer(times, es.eigenvalues))
    values = es.ground[None, :] * ((damp * c) @ es.vectors.T)
    return AmplitudeGrid(times, values, "classical", init)


def _kappa(es: EigenSystem, t_S: float) -> np.ndarray:
    if es.family is not None and not es.family.is_finite:
        raise ValueError("discrete time needs bounded B + D; semi-infinite families are excluded")
    return kappa_spectrum(es, t_S)


def _steps(steps: int) -> np.ndarray:
    if steps < 0:
        raise ValueError("steps must be non-negative")
    return np.arange(steps + 1)


def classical_dt_transition(es: EigenSystem, t_S: float, x: int, y: int, step: int) -> float:
    kappa = _kappa(es, t_S)
    _check_source(es, min(x, y))
    s = np.sum(kappa**step * es.vectors[x] * es.vectors[y])
    return float(es.ground[x] / es.ground[y] * s)


def classical_dt_evolution(es: EigenSystem, t_S: float, init: InitialDistribution,
                           steps: int) -> AmplitudeGrid:
    """P^d(x; l) = phi_0(x) sum_n c_n kappa(n)^l phi_n(x), l = 0..steps."""
    kappa = _kappa(es, t_S)
    ell = _steps(steps)
    c = expansion_coefficients(es, init).c
    powers = kappa[None, :] ** ell[:, None]
    values = es.ground[None, :] * ((powers * c) @ es.vectors.T)
    return AmplitudeGrid(ell.astype(float), values, "classical", init, discrete=True, t_S=t_S)


def classical_dt_direct(K: TridiagonalMatrix, init: InitialDistribution, steps: int) -> AmplitudeGrid:
    """Reference path: repeated application of K to the initial vector."""
    ell = _steps(steps)
    rows = [np.array(init.weights)]
    for _ in range(steps):
        rows.append(K.matvec(rows[-1]))
    return AmplitudeGrid(ell.astype(float), np.array(rows), "classical", init, discrete=True)


def quantum_ct_amplitude(es: EigenSystem, x: int, y: int, t: float) -> complex:
    """Psi(x, y; t) = <x| exp(-i H t) |y>."""
    _check_source(es, min(x, y))
    return kernel(es, x, y, t)


def quantum_ct_matrix(es: EigenSystem, t: float) -> np.ndarray:
    """Full unitary exp(-i H t) in the position basis."""
    V = es.vectors
    return (V * np.exp(-1j * es.eigenvalues * t)) @ V.T


def quantum_ct_probability(es: EigenSystem, x: int, y: int, t: float, form: str = "modulus") -> float:
    """|Psi(x, y; t)|^2, either directly or from the cosine double sum."""
    _check_source(es, min(x, y))
    if form == "modulus":
        return abs(kernel(es, x, y, t)) ** 2
    if form == "cosine":
        w = es.vectors[x] * es.vectors[y]
        E = es.eigenvalues
        cos = np.cos(np.subtract.outer(E, E) * t)
        diag = float(np.sum(w * w))
        upper = np.triu(cos * np.outer(w, w), k=1)
        return diag + 2.0 * float(np.sum(upper))
    raise ValueError(f"unknown form {form!r}")


def _state_vector(es: EigenSystem, origin) -> np.ndarray:
    if isinstance(origin, InitialState):
        a = origin.amplitudes
        _check_support(es, a)
        return a
    y = int(origin)
    _check_source(es, y)
    return InitialState.delta(es.size, y).amplitudes


def quantum_ct_evolution(es: EigenSystem, origin, times) -> AmplitudeGrid:
    """Amplitudes over all x at each time, from a source state y or an InitialState."""
    times = np.asarray(times, dtype=float)
    a = _state_vector(es, origin)
    V = es.vectors
    modal = V.T @ a
    phases = np.exp(-1j * np.outer(times, es.eigenvalues))
    return AmplitudeGrid(times, (phases * modal) @ V.T, "quantum", origin)


def quantum_dt_amplitude(es: EigenSystem, t_S: float, x: int, y: int, steps: int) -> complex:
    """Psi^d(x, y; l) = sum_n exp(-i t_S E(n) l) phi_n(x) phi_n(y)."""
    _kappa(es, t_S)
    _check_source(es, min(x, y))
    Ed = t_S * es.eigenvalues
    return complex(np.sum(np.exp(-1j * Ed * steps) * es.vectors[x] * es.vectors[y]))


def quantum_dt_evolution(es: EigenSystem, t_S: float, origin, steps: int) -> AmplitudeGrid:
    _kappa(es, t_S)
    ell = _steps(steps)
    a = _state_vector(es, origin)
    V = es.vectors
    Ed = t_S * es.eigenvalues
    phases = np.exp(-1j * np.outer(ell, Ed))
    return AmplitudeGrid(ell.astype(float), (phases * (V.T @ a)) @ V.T, "quantum", origin,
                         discrete=True, t_S=t_S)


def long_time_average(es: EigenSystem, x: int, y: int) -> float:
    """Cesaro mean of |Psi(x, y; t)|^2, i.e. sum_n phi_n(x)^2 phi_n(y)^2."""
    _check_source(es, min(x, y))
    return float(np.sum(es.vectors[x] ** 2 * es.vectors[y] ** 2))


def time_averaged_probability(es: EigenSystem, x: int, y: int, t_max: float,
                              samples: int = 100_000) -> float:
    """Trapezoid average of |Psi(x, y; t)|^2 over [0, t_max]."""
    t = np.linspace(0.0, t_max, samples)
    modal = es.vectors[x] * es.vectors[y]
    prob = np.empty(samples)
    chunk = 4096
    for start in range(0, samples, chunk):
        ts = t[start:start + chunk]
        prob[start:start + chunk] = np.abs(np.exp(-1j * np.outer(ts, es.eigenvalues)) @ modal) ** 2
    return float(np.trapezoid(prob, t) / t_max)


def damped_limit(es: EigenSystem, x: int, y: int, epsilon: float) -> complex:
    """Psi at t = 100/epsilon with E(n) - i epsilon for n >= 1.

    Only the zero mode survives, so the value approaches phi_0(x) phi_0(y)
    for the normalised ground state.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    _check_source(es, min(x, y))
    t = 100.0 / epsilon
    shifted = es.eigenvalues.astype(complex)
    shifted[1:] -= 1j * epsilon
    return complex(np.sum(np.exp(-1j * shifted * t) * es.vectors[x] * es.vectors[y]))


def detect_period(es: EigenSystem, tolerance: float = 1e-9) -> float | None:
    """Smallest T with every E(n) T / 2 pi an integer, or None if the spectrum is incommensurate."""
    E = np.asarray(es.eigenvalues, dtype=float)
    nonzero = E[np.abs(E) > tolerance]
    if nonzero.size == 0:
        return None
    base = float(nonzero[0])
    lcm = 1
    for value in nonzero:
        ratio = float(value) / base
        frac = Fraction(ratio).limit_denominator(PERIOD_DENOMINATOR_CAP)
        if abs(ratio - frac) > tolerance * max(1.0, abs(ratio)):
            return None
        lcm = math.lcm(lcm, frac.denominator)
        if lcm > PERIOD_DENOMINATOR_CAP:
            return None
    T = 2 * math.pi * lcm / base
    cycles = E * T / (2 * math.pi)
    if np.any(np.abs(cycles - np.round(cycles)) > tolerance * np.maximum(1.0, np.abs(cycles))):
        return None
    return T
