"""State spaces, rate tables and the tridiagonal matrices built from them.

Matrix conventions: ``upper[x]`` holds M[x, x+1] and ``lower[x]`` holds
M[x+1, x]. L and K store their off-diagonals from the rates and derive the
diagonal from them, so column sums vanish (resp. equal one) by construction.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .specfun import LogScaled

__all__ = [
    "DEFAULT_TAIL_TOL",
    "InvalidRates",
    "InvalidTimescale",
    "NonSummable",
    "StateSpace",
    "RateTable",
    "TridiagonalMatrix",
    "WeightVector",
    "default_tail_tolerance",
    "default_timescale",
    "build_L",
    "build_phi0",
    "build_H",
    "build_A_factor",
    "build_Htilde",
    "build_K",
    "build_T",
    "build_Hd",
    "truncate_space",
]

DEFAULT_TAIL_TOL = 1e-14
TAIL_TOL_ENV = "BDSPEC_TAIL_TOL"
DEFAULT_TS_FRACTION = 0.9


class InvalidRates(ValueError):
    pass


class InvalidTimescale(ValueError):
    pass


class NonSummable(ValueError):
    pass


def default_tail_tolerance() -> float:
    value = os.environ.get(TAIL_TOL_ENV)
    if value is None:
        return DEFAULT_TAIL_TOL
    tol = float(value)
    if not tol > 0:
        raise ValueError(f"{TAIL_TOL_ENV} must be positive, got {value!r}")
    return tol


@dataclass(frozen=True)
class StateSpace:
    """{0, ..., last}, either a finite chain or a cut of a semi-infinite one."""

    last: int
    tail_mass: float | None = None

    def __post_init__(self):
        if self.last < 1:
            raise InvalidRates(f"state space needs at least two states, got last={self.last}")
        if self.tail_mass is not None and self.tail_mass < 0:
            raise InvalidRates("declared tail mass must be non-negative")

    @classmethod
    def finite(cls, N: int) -> "StateSpace":
        return cls(int(N))

    @classmethod
    def truncated(cls, x_max: int, tail_mass: float) -> "StateSpace":
        return cls(int(x_max), float(tail_mass))

    @property
    def truncated_space(self) -> bool:
        return self.tail_mass is not None

    @property
    def size(self) -> int:
        return self.last + 1


@dataclass(frozen=True, eq=False)
class RateTable:
    """Birth and death rates on a state space.

    ``t_S`` is None for continuous time. For discrete time the transition
    probabilities are b = t_S B and d = t_S D. A truncated space is cut with
    a reflecting boundary, B(x_max) = 0.
    """

    space: StateSpace
    birth: np.ndarray
    death: np.ndarray
    t_S: float | None = None

    def __post_init__(self):
        birth = np.array(self.birth, dtype=float)
        death = np.array(self.death, dtype=float)
        birth.flags.writeable = False
        death.flags.writeable = False
        object.__setattr__(self, "birth", birth)
        object.__setattr__(self, "death", death)
        n = self.space.size
        if birth.shape != (n,) or death.shape != (n,):
            raise InvalidRates(f"birth and death must both have length {n}")
        if not (np.all(np.isfinite(birth)) and np.all(np.isfinite(death))):
            raise InvalidRates("rates must be finite")
        if death[0] != 0:
            raise InvalidRates(f"reflecting boundary needs D(0) = 0, got {death[0]}")
        if birth[-1] != 0:
            raise InvalidRates(
                f"reflecting boundary needs B({self.space.last}) = 0, got {birth[-1]}")
        if np.any(birth[:-1] <= 0):
            x = int(np.argmax(birth[:-1] <= 0))
            raise InvalidRates(f"B(x) must be positive below the last state; B({x}) = {birth[x]}")
        if np.any(death[1:] <= 0):
            x = 1 + int(np.argmax(death[1:] <= 0))
            raise InvalidRates(f"D(x) must be positive for x >= 1; D({x}) = {death[x]}")
        if self.t_S is not None:
            if self.space.truncated_space:
                raise InvalidTimescale(
                    "discrete time needs bounded B + D; truncated semi-infinite chains "
                    "are continuous-time only")
            bound = float(np.max(birth + death))
            if not 0 < self.t_S * bound < 1:
                raise InvalidTimescale(
                    f"need 0 < t_S * max(B + D) < 1, got t_S={self.t_S} with max(B + D)={bound}")

    @property
    def size(self) -> int:
        return self.space.size

    @property
    def is_discrete(self) -> bool:
        return self.t_S is not None

    def scaled(self, c: float) -> "RateTable":
        return RateTable(self.space, c * self.birth, c * self.death, self.t_S)

    def discrete(self, t_S: float | None = None) -> "RateTable":
        """The same rates read as a discrete-time chain with timescale t_S."""
        if t_S is None:
            t_S = default_timescale(self)
        return RateTable(self.space, self.birth, self.death, float(t_S))

    def continuous(self) -> "RateTable":
        return RateTable(self.space, self.birth, self.death)

    @classmethod
    def from_lists(cls, birth, death, t_S=None) -> "RateTable":
        birth = np.asarray(birth, dtype=float)
        return cls(StateSpace.finite(len(birth) - 1), birth, death, t_S)


def default_timescale(rates: RateTable) -> float:
    return DEFAULT_TS_FRACTION / float(np.max(rates.birth + rates.death))


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    diag: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        n = len(self.diag)
        if len(self.upper) != n - 1 or len(self.lower) != n - 1:
            raise ValueError("off-diagonals must have length size - 1")
        if self.symmetric and not np.array_equal(self.upper, self.lower):
            raise ValueError("symmetric flag set but off-diagonals differ")
        for name in ("diag", "upper", "lower"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v)
        out = self.diag * v
        out[:-1] += self.upper * v[1:]
        out[1:] += self.lower * v[:-1]
        return out

    def column_sums(self) -> np.ndarray:
        """diag[x] + (M[x-1, x] + M[x+1, x]), the order used to build L and K."""
        off = np.zeros(self.size)
        off[1:] += self.upper
        off[:-1] += self.lower
        return self.diag + off

    def row_sums(self) -> np.ndarray:
        off = np.zeros(self.size)
        off[:-1] += self.upper
        off[1:] += self.lower
        return self.diag + off

    def scaled(self, c: float) -> "TridiagonalMatrix":
        return TridiagonalMatrix(c * self.diag, c * self.upper, c * self.lower, self.symmetric)


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Ground state phi0 (log scale), 1/sum(phi0^2) and the stationary pi."""

    log_phi0: np.ndarray
    d0_squared: LogScaled
    pi: np.ndarray

    @property
    def phi0(self) -> list[LogScaled]:
        return [LogScaled(float(v), 1) for v in self.log_phi0]

    def phi0_values(self) -> np.ndarray:
        return np.exp(self.log_phi0)

    def sqrt_pi(self) -> np.ndarray:
        return np.exp(self.log_phi0 + 0.5 * self.d0_squared.log_magnitude)


def _continuous_only(rates: RateTable) -> None:
    if rates.is_discrete:
        raise InvalidTimescale("expected continuous-time rates (t_S is set)")


def _discrete_only(rates: RateTable) -> None:
    if not rates.is_discrete:
        raise InvalidTimescale("expected discrete-time rates; use RateTable.discrete(t_S)")


def build_L(rates: RateTable) -> TridiagonalMatrix:
    _continuous_only(rates)
    lower = rates.birth[:-1].copy()     # L[x+1, x] = B(x)
    upper = rates.death[1:].copy()      # L[x-1, x] = D(x)
    off = np.zeros(rates.size)
    off[:-1] += lower
    off[1:] += upper
    return TridiagonalMatrix(-off, upper, lower)


def build_K(rates: RateTable) -> TridiagonalMatrix:
    _discrete_only(rates)
    lower = rates.t_S * rates.birth[:-1]
    upper = rates.t_S * rates.death[1:]
    off = np.zeros(rates.size)
    off[:-1] += lower
    off[1:] += upper
    return TridiagonalMatrix(1.0 - off, upper, lower)


def build_phi0(rates: RateTable) -> WeightVector:
    b, d = rates.birth, rates.death
    log_ratio = 0.5 * (np.log(b[:-1]) - np.log(d[1:]))
    log_phi0 = np.concatenate([[0.0], np.cumsum(log_ratio)])
    if rates.space.truncated_space:
        edge_ratio = b[-2] / d[-1]
        if edge_ratio >= 1:
            raise NonSummable(
                f"phi0^2 still grows at the truncation edge (ratio {edge_ratio:g}); "
                "the chain has no normalisable stationary weight")
    log_norm = float(logsumexp(2 * log_phi0))
    pi = np.exp(2 * log_phi0 - log_norm)
    return WeightVector(log_phi0, LogScaled(-log_norm, 1), pi)


def _symmetric(diag, off) -> TridiagonalMatrix:
    off = np.asarray(off, dtype=float)
    return TridiagonalMatrix(diag, off, off.copy(), symmetric=True)


def build_H(rates: RateTable) -> TridiagonalMatrix:
    b, d = rates.birth, rates.death
    return _symmetric(b + d, -np.sqrt(b[:-1] * d[1:]))


def build_A_factor(rates: RateTable) -> TridiagonalMatrix:
    """Upper bidiagonal A with transpose(A) @ A = H."""
    n = rates.size
    return TridiagonalMatrix(np.sqrt(rates.birth), -np.sqrt(rates.death[1:]), np.zeros(n - 1))


def build_Htilde(rates: RateTable) -> TridiagonalMatrix:
    upper = -rates.birth[:-1]
    lower = -rates.death[1:]
    off = np.zeros(rates.size)
    off[:-1] += upper
    off[1:] += lower
    return TridiagonalMatrix(-off, upper, lower)


def build_T(rates: RateTable) -> TridiagonalMatrix:
    """Symmetrised transition matrix Phi^-1 K Phi."""
    _discrete_only(rates)
    b = rates.t_S * rates.birth
    d = rates.t_S * rates.death
    return _symmetric(1.0 - (b + d), np.sqrt(b[:-1] * d[1:]))


def build_Hd(rates: RateTable) -> TridiagonalMatrix:
    """Discrete-time Hamiltonian 1 - T, equal to t_S times the continuous H."""
    _discrete_only(rates)
    b = rates.t_S * rates.birth
    d = rates.t_S * rates.death
    return _symmetric(b + d, -np.sqrt(b[:-1] * d[1:]))


def _log_poisson(a: float, x: int) -> float:
    return x * math.log(a) - math.lgamma(x + 1) - a


def poisson_tail(a: float, x_max: int, upper: int | None = None) -> float:
    """sum over x_max < x <= upper of the Poisson(a) weight."""
    if upper is None:
        upper = 2 * x_max + int(10 * a) + 50
    logs = np.array([_log_poisson(a, x) for x in range(x_max + 1, upper + 1)])
    if logs.size == 0:
        return 0.0
    return float(np.exp(logsumexp(logs)))


def truncate_space(family, tail_tolerance: float | None = None, modes: int = 0) -> StateSpace:
    """Cut a semi-infinite family at x_max with stationary tail below tolerance.

    x_max is at least 4 ceil(a) + 20. With ``modes > 0`` x_max is raised
    further until the lowest ``modes`` eigenvectors have tail norm
    ||phi_n restricted to x >= x_max|| below the tolerance as well.
    """
    if family.is_finite:
        raise ValueError(f"{family.name} lives on a finite space; nothing to truncate")
    tol = default_tail_tolerance() if tail_tolerance is None else float(tail_tolerance)
    if not tol > 0:
        raise ValueError("tail tolerance must be positive")
    a = float(family.a)
    x_max = 4 * math.ceil(a) + 20
    while poisson_tail(a, x_max) >= tol:
        x_max += 1
    # re-check with the summation range doubled
    tail = poisson_tail(a, x_max)
    wide = poisson_tail(a, x_max, 2 * (2 * x_max + int(10 * a) + 50))
    if not math.isclose(tail, wide, rel_tol=1e-10, abs_tol=1e-300):
        raise NonSummable(f"Poisson tail at x_max={x_max} did not converge")
    if modes:
        x_max = max(x_max, *(family.mode_support(n, tol) for n in range(modes)))
        tail = poisson_tail(a, x_max)
    return StateSpace.truncated(x_max, tail)
