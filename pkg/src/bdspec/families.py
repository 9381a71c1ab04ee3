"""Closed-form data for the exactly solvable birth-death families.

Each family carries its rates B(x), D(x), spectrum E(n), the squared ground
state phi0(x)^2, the squared normalisation constants d_n^2 and the
polynomials P_n(x) normalised to P_n(0) = 1. Weights and normalisation
constants are returned as :class:`~bdspec.specfun.LogScaled`.

The base class :class:`Family` is the contract for adding further families;
only the five below ship.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import ClassVar

import gmpy2
import numpy as np

from .specfun import (
    LogScaled,
    SeriesParams,
    terminating_sum,
    terminating_table,
    log_binomial,
    log_q_binomial,
    log_q_shifted_factorial,
    log_scaled_product,
    log_shifted_factorial,
    q_shifted_factorial,
    shifted_factorial,
)

__all__ = [
    "ParamOutOfRange",
    "IndexOutOfRange",
    "Unsupported",
    "Family",
    "Krawtchouk",
    "Hahn",
    "QHahn",
    "QuantumQKrawtchouk",
    "Charlier",
    "FAMILIES",
    "family_from_config",
    "rates_of",
    "eigenvalue",
    "polynomial",
    "norm_constant_squared",
    "closed_form_psi_N0",
]

# a + b counts as an integer for the Hahn period when this close to one
INTEGRALITY_TOL = 1e-9


class ParamOutOfRange(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


class Unsupported(NotImplementedError):
    pass


def _log(value: float) -> LogScaled:
    return LogScaled.from_value(value)


def _numbers(exact: bool, *values):
    """Parameters as floats, or as exact MPFR copies for extended precision."""
    if exact:
        return tuple(gmpy2.mpfr(v) for v in values)
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class Family:
    """Common interface of an exactly solvable birth-death family.

    ``rate_scale`` multiplies B and D (and hence E) without touching
    phi0, d_n or P_n. It defaults to 1.
    """

    rate_scale: float = field(default=1.0, kw_only=True)

    name: ClassVar[str] = ""
    eigenvalue_kind: ClassVar[str] = ""
    is_finite: ClassVar[bool] = True

    def __post_init__(self):
        if not self.rate_scale > 0:
            raise ParamOutOfRange(f"rate_scale must be positive, got {self.rate_scale}")
        self.validate()

    def validate(self) -> None:
        raise NotImplementedError

    @property
    def last(self) -> int | None:
        """Largest state N for finite families, None for semi-infinite ones."""
        return getattr(self, "N", None)

    def _check_index(self, k: int, what: str = "index") -> None:
        if k < 0 or (self.last is not None and k > self.last):
            raise IndexOutOfRange(f"{what} {k} outside the index set of {self.name}")

    # raw (unscaled) formulas, vectorised over numpy arrays of x
    def _birth(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _death(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _eigenvalue(self, n: int) -> float:
        raise NotImplementedError

    def birth(self, x) -> np.ndarray:
        return self.rate_scale * self._birth(np.asarray(x, dtype=float))

    def death(self, x) -> np.ndarray:
        return self.rate_scale * self._death(np.asarray(x, dtype=float))

    def eigenvalue(self, n: int) -> float:
        self._check_index(n)
        return self.rate_scale * self._eigenvalue(n)

    def sinusoidal(self, x: int) -> float:
        return float(x)

    def phi0_squared(self, x: int) -> LogScaled:
        raise NotImplementedError

    def norm_squared(self, n: int) -> LogScaled:
        raise NotImplementedError

    def series(self, n: int, x: int, exact: bool = False) -> SeriesParams:
        raise NotImplementedError

    def polynomial(self, n: int, x: int) -> float:
        self._check_index(n)
        self._check_index(x, "state")
        return terminating_sum(lambda exact: self.series(n, x, exact))

    def polynomial_table(self, size: int) -> np.ndarray:
        """T[x, n] = P_n(x) for n, x < ``size``."""
        self._check_index(size - 1)
        return terminating_table(self.series, np.arange(size), np.arange(size))

    def eigenvector_entry(self, n: int, x: int) -> float:
        """Normalised eigenvector component d_n phi0(x) P_n(x)."""
        weight = (self.norm_squared(n) * self.phi0_squared(x)).sqrt()
        return weight.value() * self.polynomial(n, x)

    def mode_support(self, n: int, tol: float) -> int:
        """Smallest X with ||phi_n restricted to x >= X|| < tol (semi-infinite families)."""
        if self.is_finite:
            return self.N
        upper = 2 * n + 40
        while abs(self.eigenvector_entry(n, upper)) > 1e-30 * tol:
            upper *= 2
        tail = 0.0
        x = upper
        while x > 0:
            tail += self.eigenvector_entry(n, x) ** 2
            if math.sqrt(tail) >= tol:
                return x + 1
            x -= 1
        return 1

    def polynomial_at_end(self, n: int) -> float:
        """Closed form of P_n(N) as printed for the family."""
        raise Unsupported(f"{self.name} has no closed form for P_n(N)")

    def psi_N0(self, t: float) -> complex:
        raise Unsupported(f"{self.name} has no closed form for Psi(N, 0; t)")

    def classical_N0(self, t: float) -> float:
        raise Unsupported(f"{self.name} has no closed form for P(N, 0; t)")

    def known_period(self) -> float | None:
        """2 pi / gcd of the spectrum when it is integral, else None."""
        return None

    def to_config(self) -> dict:
        out = {"family": self.name}
        for key in ("N", "p", "a", "b", "q"):
            if hasattr(self, key):
                out[key] = getattr(self, key)
        if self.rate_scale != 1.0:
            out["rate_scale"] = self.rate_scale
        return out


def _integer_period(values: list[float]) -> float | None:
    ints = [round(v) for v in values]
    if any(abs(v - i) > INTEGRALITY_TOL for v, i in zip(values, ints)):
        return None
    g = reduce(math.gcd, (i for i in ints if i), 0)
    return 2 * math.pi / g if g else None


@dataclass(frozen=True)
class Krawtchouk(Family):
    N: int
    p: float

    name: ClassVar[str] = "krawtchouk"
    eigenvalue_kind: ClassVar[str] = "linear"

    def validate(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParamOutOfRange(f"krawtchouk: N must be a positive integer, got {self.N}")
        if not 0 < self.p < 1:
            raise ParamOutOfRange(f"krawtchouk: need 0 < p < 1, got p={self.p}")

    def _birth(self, x):
        return self.p * (self.N - x)

    def _death(self, x):
        return (1 - self.p) * x

    def _eigenvalue(self, n):
        return float(n)

    def phi0_squared(self, x):
        self._check_index(x, "state")
        return log_binomial(self.N, x) * _log(self.p / (1 - self.p)) ** x

    def norm_squared(self, n):
        self._check_index(n)
        return (log_binomial(self.N, n) * _log(self.p / (1 - self.p)) ** n
                * _log(1 - self.p) ** self.N)

    def series(self, n, x, exact=False):
        (p,) = _numbers(exact, self.p)
        return SeriesParams((-n, -x), (-self.N,), 1 / p)

    def polynomial_at_end(self, n):
        return (1 - 1 / self.p) ** n

    def psi_N0(self, t):
        t = self.rate_scale * t
        return (self.p * (1 - self.p)) ** (self.N / 2) * (1 - cmath.exp(-1j * t)) ** self.N

    def classical_N0(self, t):
        t = self.rate_scale * t
        return self.p**self.N * (1 - math.exp(-t)) ** self.N

    def known_period(self):
        return 2 * math.pi / self.rate_scale


@dataclass(frozen=True)
class Hahn(Family):
    N: int
    a: float
    b: float

    name: ClassVar[str] = "hahn"
    eigenvalue_kind: ClassVar[str] = "quadratic"

    def validate(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParamOutOfRange(f"hahn: N must be a positive integer, got {self.N}")
        if not (self.a > 0 and self.b > 0):
            raise ParamOutOfRange(f"hahn: need a, b > 0, got a={self.a}, b={self.b}")

    def _birth(self, x):
        return (x + self.a) * (self.N - x)

    def _death(self, x):
        return x * (self.b + self.N - x)

    def _eigenvalue(self, n):
        return n * (n + self.a + self.b - 1)

    def phi0_squared(self, x):
        self._check_index(x, "state")
        a, b, N = self.a, self.b, self.N
        return (log_binomial(N, x) * log_shifted_factorial(a, x)
                * log_shifted_factorial(b, N - x) / log_shifted_factorial(b, N))

    def _ratio_term(self, n: int) -> LogScaled:
        # (2n+a+b-1) / (n+a+b-1)_{N+1}; the n = 0 value is 1/(a+b)_N even when a+b = 1
        c = self.a + self.b
        if n == 0:
            return LogScaled() / log_shifted_factorial(c, self.N)
        return _log(2 * n + c - 1) / log_shifted_factorial(n + c - 1, self.N + 1)

    def norm_squared(self, n):
        self._check_index(n)
        a, b, N = self.a, self.b, self.N
        return log_scaled_product([
            log_binomial(N, n), log_shifted_factorial(a, n), self._ratio_term(n),
            log_shifted_factorial(b, N) / log_shifted_factorial(b, n),
        ])

    def series(self, n, x, exact=False):
        a, b = _numbers(exact, self.a, self.b)
        return SeriesParams((-n, n + a + b - 1, -x), (a, -self.N), 1.0)

    def polynomial_at_end(self, n):
        return (-1) ** n * shifted_factorial(self.b, n) / shifted_factorial(self.a, n)

    def _N0_weights(self) -> list[float]:
        N = self.N
        return [(-1) ** n * (log_binomial(N, n) * self._ratio_term(n)).value()
                for n in range(N + 1)]

    def psi_N0(self, t):
        a, b, N = self.a, self.b, self.N
        pre = math.sqrt(shifted_factorial(a, N) * shifted_factorial(b, N))
        return pre * sum(w * cmath.exp(-1j * self.eigenvalue(n) * t)
                         for n, w in enumerate(self._N0_weights()))

    def classical_N0(self, t):
        return shifted_factorial(self.a, self.N) * math.fsum(
            w * math.exp(-self.eigenvalue(n) * t) for n, w in enumerate(self._N0_weights()))

    def known_period(self):
        if abs(self.a + self.b - round(self.a + self.b)) > INTEGRALITY_TOL:
            return None
        period = _integer_period([self._eigenvalue(n) for n in range(1, self.N + 1)])
        return None if period is None else period / self.rate_scale


@dataclass(frozen=True)
class QHahn(Family):
    N: int
    a: float
    b: float
    q: float

    name: ClassVar[str] = "q_hahn"
    eigenvalue_kind: ClassVar[str] = "q_quadratic"

    def validate(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParamOutOfRange(f"q_hahn: N must be a positive integer, got {self.N}")
        if not (0 < self.a < 1 and 0 < self.b < 1):
            raise ParamOutOfRange(f"q_hahn: need 0 < a, b < 1, got a={self.a}, b={self.b}")
        if not 0 < self.q < 1:
            raise ParamOutOfRange(f"q_hahn: need 0 < q < 1, got q={self.q}")

    def _birth(self, x):
        a, q, N = self.a, self.q, self.N
        return (1 - a * q**x) * (q ** (x - N) - 1)

    def _death(self, x):
        a, b, q, N = self.a, self.b, self.q, self.N
        return a / q * (1 - q**x) * (q ** (x - N) - b)

    def _eigenvalue(self, n):
        a, b, q = self.a, self.b, self.q
        return (q**-n - 1) * (1 - a * b * q ** (n - 1))

    def sinusoidal(self, x):
        return self.q**-x - 1

    def phi0_squared(self, x):
        self._check_index(x, "state")
        a, b, q, N = self.a, self.b, self.q, self.N
        return log_scaled_product([
            log_q_binomial(N, x, q), log_q_shifted_factorial(a, q, x),
            log_q_shifted_factorial(b, q, N - x) / log_q_shifted_factorial(b, q, N),
            _log(a) ** -x,
        ])

    def _ratio_term(self, n: int) -> LogScaled:
        # (ab/q; q)_n (1 - ab q^(2n-1)) / (1 - ab/q), rewritten to avoid 0/0 at ab = q
        ab, q = self.a * self.b, self.q
        if n == 0:
            return LogScaled()
        return log_q_shifted_factorial(ab, q, n - 1) * _log(1 - ab * q ** (2 * n - 1))

    def norm_squared(self, n):
        self._check_index(n)
        a, b, q, N = self.a, self.b, self.q, self.N
        ab = a * b
        return log_scaled_product([
            log_q_binomial(N, n, q), log_q_shifted_factorial(a, q, n), self._ratio_term(n),
            LogScaled() / log_q_shifted_factorial(ab * q**N, q, n),
            LogScaled() / log_q_shifted_factorial(b, q, n),
            _log(a) ** (N - n),
            log_q_shifted_factorial(b, q, N) / log_q_shifted_factorial(ab, q, N),
        ])

    def series(self, n, x, exact=False):
        a, b, q = _numbers(exact, self.a, self.b, self.q)
        return SeriesParams((q**-n, a * b * q ** (n - 1), q**-x), (a, q**-self.N), q, q)

    def polynomial_at_end(self, n):
        a, b, q = self.a, self.b, self.q
        return ((-a) ** n * q ** (n * (n - 1) / 2)
                * q_shifted_factorial(b, q, n) / q_shifted_factorial(a, q, n))

    def _N0_weights(self) -> list[float]:
        ab, q, N = self.a * self.b, self.q, self.N
        out = []
        for n in range(N + 1):
            term = log_scaled_product([
                log_q_binomial(N, n, q), self._ratio_term(n),
                LogScaled() / log_q_shifted_factorial(ab * q**N, q, n),
                _log(q ** (n * (n - 1) / 2)),
            ])
            out.append((-1) ** n * term.value())
        return out

    def psi_N0(self, t):
        a, b, q, N = self.a, self.b, self.q, self.N
        pre = (math.sqrt(q_shifted_factorial(a, q, N) * q_shifted_factorial(b, q, N) * a**N)
               / q_shifted_factorial(a * b, q, N))
        return pre * sum(w * cmath.exp(-1j * self.eigenvalue(n) * t)
                         for n, w in enumerate(self._N0_weights()))

    def classical_N0(self, t):
        a, b, q, N = self.a, self.b, self.q, self.N
        pre = q_shifted_factorial(a, q, N) / q_shifted_factorial(a * b, q, N)
        return pre * math.fsum(w * math.exp(-self.eigenvalue(n) * t)
                               for n, w in enumerate(self._N0_weights()))


@dataclass(frozen=True)
class QuantumQKrawtchouk(Family):
    N: int
    p: float
    q: float

    name: ClassVar[str] = "quantum_q_krawtchouk"
    eigenvalue_kind: ClassVar[str] = "q_exponential"

    def validate(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParamOutOfRange(
                f"quantum_q_krawtchouk: N must be a positive integer, got {self.N}")
        if not 0 < self.q < 1:
            raise ParamOutOfRange(f"quantum_q_krawtchouk: need 0 < q < 1, got q={self.q}")
        if not self.p > self.q**-self.N:
            raise ParamOutOfRange(
                f"quantum_q_krawtchouk: need p > q^-N = {self.q ** -self.N:g}, got p={self.p}")

    def _birth(self, x):
        p, q, N = self.p, self.q, self.N
        return q**x * (q ** (x - N) - 1) / p

    def _death(self, x):
        p, q, N = self.p, self.q, self.N
        return (1 - q**x) * (1 - q ** (x - N - 1) / p)

    def _eigenvalue(self, n):
        return 1 - self.q**n

    def sinusoidal(self, x):
        return self.q**-x - 1

    def phi0_squared(self, x):
        self._check_index(x, "state")
        p, q, N = self.p, self.q, self.N
        return log_scaled_product([
            log_q_binomial(N, x, q),
            LogScaled(-x * math.log(p) + x * (x - 1 - N) * math.log(q)),
            LogScaled() / log_q_shifted_factorial(q**-N / p, q, x),
        ])

    def norm_squared(self, n):
        self._check_index(n)
        p, q, N = self.p, self.q, self.N
        return log_scaled_product([
            log_q_binomial(N, n, q),
            LogScaled(-n * math.log(p) - N * n * math.log(q)),
            LogScaled() / log_q_shifted_factorial(q**-n / p, q, n),
            log_q_shifted_factorial(q**-N / p, q, N),
        ])

    def series(self, n, x, exact=False):
        p, q = _numbers(exact, self.p, self.q)
        return SeriesParams((q**-n, q**-x), (q**-self.N,), p * q ** (n + 1), q)

    def polynomial_at_end(self, n):
        return q_shifted_factorial(self.p * self.q, self.q, n)

    def _N0_weights(self) -> list[float]:
        q, N = self.q, self.N
        return [(-1) ** n * (log_q_binomial(N, n, q)
                             * LogScaled((n * (n + 1) / 2 - N * n) * math.log(q))).value()
                for n in range(N + 1)]

    def psi_N0(self, t):
        p, q, N = self.p, self.q, self.N
        pre = math.sqrt((p * q) ** -N * q_shifted_factorial(q**-N / p, q, N))
        return pre * sum(w * cmath.exp(-1j * self.eigenvalue(n) * t)
                         for n, w in enumerate(self._N0_weights()))

    def classical_N0(self, t):
        p, q, N = self.p, self.q, self.N
        return (p * q) ** -N * math.fsum(w * math.exp(-self.eigenvalue(n) * t)
                                         for n, w in enumerate(self._N0_weights()))


@dataclass(frozen=True)
class Charlier(Family):
    a: float

    name: ClassVar[str] = "charlier"
    eigenvalue_kind: ClassVar[str] = "linear"
    is_finite: ClassVar[bool] = False

    def validate(self):
        if not self.a > 0:
            raise ParamOutOfRange(f"charlier: need a > 0, got a={self.a}")

    def _birth(self, x):
        return np.full_like(x, self.a, dtype=float)

    def _death(self, x):
        return np.array(x, dtype=float)

    def _eigenvalue(self, n):
        return float(n)

    def phi0_squared(self, x):
        self._check_index(x, "state")
        return LogScaled(x * math.log(self.a) - math.lgamma(x + 1))

    def norm_squared(self, n):
        self._check_index(n)
        return LogScaled(n * math.log(self.a) - math.lgamma(n + 1) - self.a)

    def series(self, n, x, exact=False):
        (a,) = _numbers(exact, self.a)
        return SeriesParams((-n, -x), (), -1 / a)

    def known_period(self):
        return 2 * math.pi / self.rate_scale


FAMILIES: dict[str, type[Family]] = {
    cls.name: cls for cls in (Krawtchouk, Hahn, QHahn, QuantumQKrawtchouk, Charlier)
}

_FIELDS = {
    "krawtchouk": ("N", "p"),
    "hahn": ("N", "a", "b"),
    "q_hahn": ("N", "a", "b", "q"),
    "quantum_q_krawtchouk": ("N", "p", "q"),
    "charlier": ("a",),
}


def family_from_config(config: dict) -> Family:
    """Build a family from ``{"family": name, "N": .., "p": .., ...}``."""
    name = config.get("family")
    if name not in FAMILIES:
        raise ParamOutOfRange(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")
    missing = [k for k in _FIELDS[name] if k not in config]
    if missing:
        raise ParamOutOfRange(f"{name}: missing parameter(s) {', '.join(missing)}")
    kwargs = {}
    for key in _FIELDS[name]:
        value = config[key]
        if key == "N":
            if isinstance(value, bool) or int(value) != value:
                raise ParamOutOfRange(f"{name}: N must be an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
        kwargs[key] = value
    if "rate_scale" in config:
        kwargs["rate_scale"] = float(config["rate_scale"])
    return FAMILIES[name](**kwargs)


def rates_of(family: Family, space=None):
    """Rate table of ``family``; semi-infinite families need a truncated ``space``."""
    from .process import RateTable, StateSpace, truncate_space

    if family.is_finite:
        space = StateSpace.finite(family.N)
    elif space is None:
        space = truncate_space(family)
    x = np.arange(space.size, dtype=float)
    birth = family.birth(x)
    death = family.death(x)
    death[0] = 0.0
    birth[-1] = 0.0
    return RateTable(space, birth, death)


def eigenvalue(family: Family, n: int) -> float:
    return family.eigenvalue(n)


def polynomial(family: Family, n: int, x: int) -> float:
    return family.polynomial(n, x)


def norm_constant_squared(family: Family, n: int) -> LogScaled:
    return family.norm_squared(n)


def closed_form_psi_N0(family: Family, t: float) -> complex:
    return family.psi_N0(t)
