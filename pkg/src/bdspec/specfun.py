"""Terminating (q-)hypergeometric series and (q-)shifted factorials.

Sums run in ascending order of the summation index with terms generated by
their ratio recurrence and accumulated with ``math.fsum``. Terminating
polynomial sums can cancel catastrophically (q-families at small q, large
N); :func:`terminating_sum` detects the lost digits and repeats the sum in
MPFR at a precision that covers them; :func:`terminating_table` runs the
same float recurrence vectorised over a whole (n, x) table. Products that
can overflow (weights, normalisation constants) are kept as
:class:`LogScaled` values until the very end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import gmpy2
import numpy as np

__all__ = [
    "TERMINATION_TOL",
    "SpecfunError",
    "NonTerminating",
    "DenominatorPole",
    "SeriesParams",
    "LogScaled",
    "shifted_factorial",
    "q_shifted_factorial",
    "log_shifted_factorial",
    "log_q_shifted_factorial",
    "log_factorial",
    "log_binomial",
    "log_q_binomial",
    "log_scaled_product",
    "hyper_rFs",
    "hyper_rphis",
    "hyper_terms",
    "terminating_sum",
    "terminating_table",
    "hyper_rFs_direct",
    "hyper_rphis_direct",
]

# A numerator within this distance of -m (or, relatively, of q^-m) terminates.
TERMINATION_TOL = 1e-9
_POLE_TOL = 1e-12


class SpecfunError(ArithmeticError):
    pass


class NonTerminating(SpecfunError):
    """No numerator parameter forces the series to terminate."""


class DenominatorPole(SpecfunError):
    """A denominator factor vanishes before the terminating index."""


@dataclass(frozen=True)
class SeriesParams:
    numerators: tuple[float, ...]
    denominators: tuple[float, ...]
    argument: float
    q: float | None = None

    def __post_init__(self):
        # entries may also be gmpy2.mpfr for the extended-precision path
        object.__setattr__(self, "numerators", tuple(self.numerators))
        object.__setattr__(self, "denominators", tuple(self.denominators))
        if self.q is not None and not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")

    @property
    def is_basic(self) -> bool:
        return self.q is not None

    def termination_index(self) -> int:
        """Index m of the last non-zero term, from the earliest terminating numerator."""
        found = [m for m in map(self._terminates_at, self.numerators) if m is not None]
        if not found:
            raise NonTerminating(f"no numerator in {self.numerators} terminates the series")
        return min(found)

    def _terminates_at(self, a: float) -> int | None:
        if self.q is None:
            m = round(-float(a))
            if m >= 0 and abs(a + m) <= TERMINATION_TOL:
                return m
            return None
        if a <= 0.0:
            return None
        m = round(-math.log(float(a)) / math.log(float(self.q)))
        if m < 0:
            return None
        target = self.q ** (-m)
        if abs(a - target) <= TERMINATION_TOL * target:
            return m
        return None


@dataclass(frozen=True)
class LogScaled:
    """A real number stored as sign * exp(log_magnitude)."""

    log_magnitude: float = 0.0
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")

    @classmethod
    def from_value(cls, value: float) -> "LogScaled":
        if value == 0.0:
            return cls(0.0, 0)
        return cls(math.log(abs(value)), 1 if value > 0 else -1)

    @classmethod
    def zero(cls) -> "LogScaled":
        return cls(0.0, 0)

    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __mul__(self, other: "LogScaled") -> "LogScaled":
        if self.sign == 0 or other.sign == 0:
            return LogScaled.zero()
        return LogScaled(self.log_magnitude + other.log_magnitude, self.sign * other.sign)

    def __truediv__(self, other: "LogScaled") -> "LogScaled":
        if other.sign == 0:
            raise ZeroDivisionError("division by a LogScaled zero")
        if self.sign == 0:
            return LogScaled.zero()
        return LogScaled(self.log_magnitude - other.log_magnitude, self.sign * other.sign)

    def __pow__(self, k: int) -> "LogScaled":
        if self.sign == 0:
            return LogScaled.zero() if k > 0 else LogScaled()
        return LogScaled(k * self.log_magnitude, self.sign if k % 2 else 1)

    def sqrt(self) -> "LogScaled":
        if self.sign < 0:
            raise ValueError("square root of a negative LogScaled")
        if self.sign == 0:
            return LogScaled.zero()
        return LogScaled(0.5 * self.log_magnitude, 1)

    def __float__(self) -> float:
        return self.value()


def log_scaled_product(factors: Iterable[LogScaled]) -> LogScaled:
    log_mag = 0.0
    sign = 1
    for f in factors:
        if f.sign == 0:
            return LogScaled.zero()
        log_mag += f.log_magnitude
        sign *= f.sign
    return LogScaled(log_mag, sign)


def shifted_factorial(a: float, n: int) -> float:
    """Pochhammer symbol (a)_n = a (a+1) ... (a+n-1)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = 1.0
    for k in range(n):
        out *= a + k
    return out


def q_shifted_factorial(a: float, q: float, n: int) -> float:
    """(a; q)_n = (1-a)(1-aq)...(1-aq^(n-1))."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = 1.0
    qk = 1.0
    for _ in range(n):
        out *= 1.0 - a * qk
        qk *= q
    return out


def log_shifted_factorial(a: float, n: int) -> LogScaled:
    return log_scaled_product(LogScaled.from_value(a + k) for k in range(n))


def log_q_shifted_factorial(a: float, q: float, n: int) -> LogScaled:
    return log_scaled_product(LogScaled.from_value(1.0 - a * q**k) for k in range(n))


def log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


def log_binomial(n: int, k: int) -> LogScaled:
    if not 0 <= k <= n:
        return LogScaled.zero()
    return LogScaled(log_factorial(n) - log_factorial(k) - log_factorial(n - k), 1)


def log_q_binomial(n: int, k: int, q: float) -> LogScaled:
    """Gaussian binomial (q;q)_n / ((q;q)_k (q;q)_{n-k})."""
    if not 0 <= k <= n:
        return LogScaled.zero()
    return (log_q_shifted_factorial(q, q, n)
            / (log_q_shifted_factorial(q, q, k) * log_q_shifted_factorial(q, q, n - k)))


def _check_pole(b: float, k: int, q: float | None) -> float:
    if q is None:
        factor = b + k
        scale = max(1.0, abs(b))
    else:
        bq = b * q**k
        factor = 1.0 - bq
        scale = max(1.0, abs(bq))
    if abs(factor) <= _POLE_TOL * scale:
        raise DenominatorPole(f"denominator parameter {b} vanishes at index {k}")
    return factor


def hyper_terms(params: SeriesParams) -> list[float]:
    """Terms t_0..t_m of a terminating series, built from the term ratio."""
    m = params.termination_index()
    q = params.q
    z = params.argument
    terms = [1.0]
    t = 1.0
    if q is None:
        for k in range(m):
            num = 1.0
            for a in params.numerators:
                num *= a + k
            den = float(k + 1)
            for b in params.denominators:
                den *= _check_pole(b, k, None)
            t = t * num / den * z
            terms.append(t)
        return terms

    s_excess = 1 + len(params.denominators) - len(params.numerators)
    for k in range(m):
        qk = q**k
        num = 1.0
        for a in params.numerators:
            num *= 1.0 - a * qk
        den = 1.0 - qk * q
        for b in params.denominators:
            den *= _check_pole(b, k, q)
        ratio = num / den * z
        if s_excess:
            ratio *= (-1.0) ** s_excess * qk**s_excess
        t *= ratio
        terms.append(t)
    return terms


# digits the float sum may lose before the MPFR path takes over; half a digit
# keeps float results within a few ulps
MAX_FLOAT_LOSS = 0.5
_GUARD_DIGITS = 20
_MAX_DIGITS = 4000

Build = Callable[[bool], SeriesParams]


def _loss_digits(total, scale) -> float:
    if scale == 0:
        return 0.0
    if total == 0:
        return math.inf
    return math.log10(float(scale / abs(total)))


def _extended_sum(build: Build, loss: float) -> float:
    """MPFR re-evaluation at a precision covering ``loss`` lost digits."""
    digits = 17 + _GUARD_DIGITS + (min(loss, 300) if math.isfinite(loss) else 60)
    while True:
        bits = int(digits * 3.33) + 8
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            terms = hyper_terms(build(True))
            total = gmpy2.fsum(terms)
            loss = _loss_digits(total, gmpy2.fsum(map(abs, terms)))
        if loss + 17 + _GUARD_DIGITS / 2 <= digits:
            return float(total)
        if digits >= _MAX_DIGITS:
            # exact zero (or below every precision tried)
            return float(total)
        digits = min(_MAX_DIGITS, max(2 * digits, loss + 17 + _GUARD_DIGITS))


def terminating_sum(build: Build) -> float:
    """Value of a terminating series, accurate to a few ulps.

    ``build(exact)`` returns the series parameters; with ``exact=True`` it
    must compute them as ``gmpy2.mpfr`` in the active context, so that
    parameters like q^-x are not rounded to doubles before summation.
    """
    terms = hyper_terms(build(False))
    total = math.fsum(terms)
    loss = _loss_digits(total, math.fsum(map(abs, terms)))
    if loss <= MAX_FLOAT_LOSS:
        return total
    return _extended_sum(build, loss)


def _termination_grid(params: SeriesParams, shape) -> np.ndarray:
    """Elementwise termination index for array-valued numerators."""
    m = np.full(shape, np.iinfo(np.int64).max, dtype=np.int64)
    for a in params.numerators:
        a = np.broadcast_to(np.asarray(a, dtype=float), shape)
        if params.q is None:
            k = np.rint(-a)
            ok = (k >= 0) & (np.abs(a + k) <= TERMINATION_TOL)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                k = np.rint(-np.log(a) / math.log(params.q))
                target = params.q ** (-k)
                ok = (a > 0) & (k >= 0) & (np.abs(a - target) <= TERMINATION_TOL * target)
        m = np.where(ok, np.minimum(m, np.where(ok, k, 0).astype(np.int64)), m)
    if np.any(m == np.iinfo(np.int64).max):
        raise NonTerminating("some series in the table do not terminate")
    return m


def _grid_terms(params: SeriesParams, shape) -> np.ndarray:
    """Terms (k, *shape) of array-valued series; the float recurrence of hyper_terms."""
    m = _termination_grid(params, shape)
    K = int(m.max())
    q = params.q
    z = np.broadcast_to(np.asarray(params.argument, dtype=float), shape)
    nums = [np.broadcast_to(np.asarray(a, dtype=float), shape) for a in params.numerators]
    dens = [np.broadcast_to(np.asarray(b, dtype=float), shape) for b in params.denominators]
    terms = np.zeros((K + 1,) + tuple(shape))
    terms[0] = 1.0
    t = np.ones(shape)
    s_excess = 1 + len(dens) - len(nums)
    for k in range(K):
        live = k < m
        if q is None:
            num = np.ones(shape)
            for a in nums:
                num = num * (a + k)
            den = np.full(shape, float(k + 1))
            for b in dens:
                factor = b + k
                _grid_pole(factor, np.maximum(1.0, np.abs(b)), live, b, k)
                den = den * factor
            ratio = num / np.where(live, den, 1.0) * z
        else:
            qk = q**k
            num = np.ones(shape)
            for a in nums:
                num = num * (1.0 - a * qk)
            den = np.full(shape, 1.0 - qk * q)
            for b in dens:
                bq = b * q**k
                factor = 1.0 - bq
                _grid_pole(factor, np.maximum(1.0, np.abs(bq)), live, b, k)
                den = den * factor
            ratio = num / np.where(live, den, 1.0) * z
            if s_excess:
                ratio = ratio * ((-1.0) ** s_excess * qk**s_excess)
        t = np.where(live, t * ratio, 0.0)
        terms[k + 1] = t
    return terms


def _grid_pole(factor, scale, live, b, k) -> None:
    bad = live & (np.abs(factor) <= _POLE_TOL * scale)
    if bad.any():
        raise DenominatorPole(f"denominator parameter {np.asarray(b)[bad][0]} vanishes at index {k}")


def terminating_table(series: Callable, n, x) -> np.ndarray:
    """Table T[i, j] = terminating_sum of ``series(n[j], x[i])``.

    ``series(n, x, exact)`` must accept float arrays when ``exact`` is false.
    The float recurrence runs vectorised over the table; entries that fail
    the cancellation test are redone one by one in MPFR. Values agree with
    :func:`terminating_sum` to a few ulps (numpy and libm powers may differ
    in the last bit).
    """
    n = np.asarray(n, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    nn, xx = np.meshgrid(n.astype(float), x.astype(float))
    shape = nn.shape
    terms = _grid_terms(series(nn, xx, False), shape)
    rows = terms.reshape(terms.shape[0], -1).T.tolist()
    out = np.empty(len(rows))
    for idx, row in enumerate(rows):
        total = math.fsum(row)
        loss = _loss_digits(total, math.fsum(map(abs, row)))
        if loss <= MAX_FLOAT_LOSS:
            out[idx] = total
            continue
        i, j = divmod(idx, shape[1])
        ni, xi = int(n[j]), int(x[i])
        out[idx] = _extended_sum(lambda e: series(ni, xi, e), loss)
    return out.reshape(shape)


def hyper_rFs(params: SeriesParams) -> float:
    """Terminating generalised hypergeometric series rFs."""
    if params.q is not None:
        raise ValueError("q given; use hyper_rphis for basic series")
    return math.fsum(hyper_terms(params))


def hyper_rphis(params: SeriesParams) -> float:
    """Terminating basic hypergeometric series r phi s."""
    if params.q is None:
        raise ValueError("hyper_rphis needs q")
    return math.fsum(hyper_terms(params))


def hyper_rFs_direct(numerators: Sequence[float], denominators: Sequence[float],
                     z: float) -> float:
    """Reference sum from explicit Pochhammer products (no ratio recurrence)."""
    m = SeriesParams(tuple(numerators), tuple(denominators), z).termination_index()
    total = []
    for k in range(m + 1):
        num = math.prod(shifted_factorial(a, k) for a in numerators)
        den = math.prod(shifted_factorial(b, k) for b in denominators)
        total.append(num / den * z**k / math.factorial(k))
    return math.fsum(total)


def hyper_rphis_direct(numerators: Sequence[float], denominators: Sequence[float],
                       q: float, z: float) -> float:
    m = SeriesParams(tuple(numerators), tuple(denominators), z, q).termination_index()
    s_excess = 1 + len(denominators) - len(numerators)
    total = []
    for k in range(m + 1):
        num = math.prod(q_shifted_factorial(a, q, k) for a in numerators)
        den = math.prod(q_shifted_factorial(b, q, k) for b in denominators)
        extra = (-1.0) ** (s_excess * k) * q ** (s_excess * k * (k - 1) / 2)
        total.append(num / den * extra * z**k / q_shifted_factorial(q, q, k))
    return math.fsum(total)
