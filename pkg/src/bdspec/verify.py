"""Invariant suites behind ``bdspec verify``.

Each check reports its worst-case deviation against a fixed tolerance.
Checks on truncated semi-infinite systems are restricted to the certified
core block, and classical checks start from the sources listed by
:func:`bdspec.evolve.well_conditioned_sources`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import evolve as ev
from .families import Family, rates_of
from .process import (
    RateTable,
    build_A_factor,
    build_H,
    build_Hd,
    build_Htilde,
    build_K,
    build_L,
    build_phi0,
)
from .spectral import EigenSystem, analytic_eigensystem, numeric_eigensystem, residual

__all__ = ["Check", "run_suites", "passed"]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.deviation) and self.deviation <= self.tolerance)

    def as_dict(self) -> dict:
        return {"suite": self.suite, "name": self.name, "deviation": float(self.deviation),
                "tolerance": float(self.tolerance), "passed": self.passed}


def passed(checks) -> bool:
    return all(c.passed for c in checks)


def _max(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _process_checks(rates: RateTable, es: EigenSystem) -> list[Check]:
    out = []
    add = lambda name, dev, tol: out.append(Check("process", name, float(dev), tol))
    L = build_L(rates)
    H = build_H(rates)
    A = build_A_factor(rates).dense()
    w = build_phi0(rates)
    phi0 = w.phi0_values()
    add("L column sums vanish", _max(L.column_sums()), 0.0)
    add("H symmetric", _max(H.upper - H.lower), 0.0)
    add("A^T A = H", _max(A.T @ A - H.dense()), 1e-14 * max(1.0, _max(H.diag)))
    add("A phi0 = 0", _max(A @ phi0) / max(1.0, _max(phi0)), 1e-12 * max(1.0, _max(H.diag)))
    add("Htilde row sums vanish", _max(build_Htilde(rates).row_sums()), 0.0)
    add("pi normalised", abs(np.sum(w.pi) - 1.0), 1e-12)
    ratio = np.diff(w.log_phi0) - 0.5 * (np.log(rates.birth[:-1]) - np.log(rates.death[1:]))
    add("phi0 recurrence", _max(ratio), 1e-13)
    for c in (0.1, 7.3):
        add(f"pi invariant under rate scale {c}", _max(build_phi0(rates.scaled(c)).pi - w.pi), 1e-13)
    k = es.core
    add("analytic pi matches phi0 builder", _max(es.weight.pi[:k] - w.pi[:k]), 1e-12)
    if not rates.space.truncated_space:
        d = rates.discrete()
        K = build_K(d)
        add("K column sums are one", _max(K.column_sums() - 1.0), 4 * _EPS)
        Kd = K.dense()
        add("detailed balance", _max(Kd * w.pi[None, :] - (Kd * w.pi[None, :]).T), 1e-13)
        add("Hd = t_S H", _max(build_Hd(d).dense() - d.t_S * H.dense()), 1e-13)
    return out


def _family_checks(family: Family, es: EigenSystem, rates: RateTable) -> list[Check]:
    out = []
    add = lambda name, dev, tol: out.append(Check("families", name, float(dev), tol))
    k = es.core
    size = es.size
    P = np.array([[family.polynomial(n, x) for n in range(k)] for x in range(size)])
    E = np.array([family.eigenvalue(n) for n in range(k)])
    B, D = rates.birth, rates.death
    worst = 0.0
    last = size - 1
    for x in range(min(size, k + 1) if not family.is_finite else size):
        up = P[x + 1] if x < last else P[x]
        down = P[x - 1] if x > 0 else P[x]
        bx = float(family.birth(x))
        lhs = bx * (P[x] - up) + D[x] * (P[x] - down)
        rhs = E * P[x]
        worst = max(worst, _max((lhs - rhs) / np.maximum(1.0, np.abs(rhs))))
    add("difference equation", worst, 1e-10)
    add("P_n(0) = 1", _max(P[0] - 1.0), 1e-12)
    if family.is_finite:
        w = np.exp([family.phi0_squared(x).log_magnitude for x in range(size)])
        d2 = np.exp([family.norm_squared(n).log_magnitude for n in range(size)])
        full = np.array([[family.polynomial(n, x) for n in range(size)] for x in range(size)])
        G = (full * w[:, None]).T @ full * np.sqrt(np.outer(d2, d2))
        add("orthogonality", _max(G - np.eye(size)), 1e-10)
    numeric = numeric_eigensystem(build_H(rates))
    add("oracle spectrum", _max(numeric.eigenvalues[:k] - es.eigenvalues[:k]), 1e-9)
    return out


def _spectral_checks(es: EigenSystem, rates: RateTable) -> list[Check]:
    out = []
    add = lambda name, dev, tol: out.append(Check("spectral", name, float(dev), tol))
    k = es.core
    H = build_H(rates)
    scale = max(1.0, _max(H.diag))
    V = es.vectors
    add("E(0) = 0", abs(es.eigenvalues[0]), 1e-12)
    add("spectrum strictly increasing", max(0.0, -float(np.min(np.diff(es.eigenvalues[:k])))), 0.0)
    add("gram matrix", _max(V[:, :k].T @ V[:, :k] - np.eye(k)), 1e-10)
    add("completeness", _max((V @ V.T)[:k, :k] - np.eye(k)), 1e-10)
    add("phi_n(0) > 0", max(0.0, -float(np.min(V[0]))), 0.0)
    add("residual", _max(residual(H, es)[:k]), 1e-10 * scale)
    rebuilt = es.reconstruct()[:k, :k]
    add("spectral representation of H", _max(rebuilt - H.dense()[:k, :k]), 1e-9 * scale)
    numeric = numeric_eigensystem(H)
    add("numeric residual", _max(residual(H, numeric)), 1e-9 * scale)
    add("oracle eigenvectors", _max(numeric.vectors[:, :k] - V[:, :k]), 1e-8)
    sub = numeric_eigensystem(type(H)(H.diag[:-1], H.upper[:-1], H.lower[:-1], True)).eigenvalues
    full = numeric.eigenvalues
    gaps = np.concatenate([sub - full[:-1], full[1:] - sub])
    # bisection brackets are 4 eps ||H|| wide; ordering below that is undecidable
    add("interlacing", max(0.0, -float(np.min(gaps))), 8 * _EPS * (_max(H.diag) + 2 * _max(H.upper)))
    if not rates.space.truncated_space:
        d = rates.discrete()
        kappa = 1.0 - d.t_S * es.eigenvalues
        add("kappa within [-1, 1]", max(0.0, _max(kappa) - 1.0), 1e-12)
        g = es.ground
        Krec = g[:, None] * ((V * kappa) @ V.T) / g[None, :]
        add("spectral representation of K", _max(Krec - build_K(d).dense()), 1e-9)
    return out


def _evolve_checks(es: EigenSystem, rates: RateTable, seed: int = 0) -> list[Check]:
    out = []
    add = lambda name, dev, tol: out.append(Check("evolve", name, float(dev), tol))
    rng = np.random.default_rng(seed)
    k = es.core
    E1 = float(es.eigenvalues[1])
    unit = 0.0
    for _ in range(20):
        t = rng.uniform(0, 4 * np.pi)
        y = int(rng.integers(k))
        unit = max(unit, ev.quantum_ct_evolution(es, y, [t]).conservation_error())
    add("unitarity", unit, 1e-10)
    sources = ev.well_conditioned_sources(es)
    ck = 0.0
    for _ in range(20):
        t, s = rng.uniform(0, 2.0 / E1, 2)
        y = int(rng.choice(sources))
        start = ev.InitialDistribution.delta(es.size, y)
        mid = ev.classical_ct_distribution(es, start, [s]).values[0]
        mid = np.clip(mid, 0.0, None)
        two = ev.classical_ct_distribution(es, ev.InitialDistribution(mid / mid.sum()), [t]).values[0]
        direct = ev.classical_ct_distribution(es, start, [t + s]).values[0]
        ck = max(ck, _max(two - direct))
    add("Chapman-Kolmogorov", ck, 1e-10)
    L = build_L(rates).dense()
    worst = 0.0
    for t in (0.1 / E1, 1.0 / E1, 5.0 / E1):
        worst = max(worst, _max(expm(L * t)[:, sources] - ev.classical_ct_matrix(es, t, sources)))
    add("matrix exponential oracle", worst, 1e-9)
    weights = np.zeros(es.size)
    weights[sources] = rng.dirichlet(np.ones(len(sources)))
    init = ev.InitialDistribution(weights)
    late = ev.classical_ct_distribution(es, init, [50.0 / E1]).values[0]
    add("relaxation to pi", _max(late - es.weight.pi), 1e-10)
    c = ev.expansion_coefficients(es, init)
    add("expansion round trip", _max(ev.reconstruct_initial(es, c) - init.weights), 1e-10)
    ys = range(min(k, 6))
    sym = max(abs(ev.long_time_average(es, x, y) - ev.long_time_average(es, y, x)) for x in ys for y in ys)
    add("long-time average symmetry", sym, 0.0)
    pi = es.weight.pi
    damped = max(abs(abs(ev.damped_limit(es, x, y, 0.05)) ** 2 - pi[x] * pi[y]) for x in ys for y in ys)
    add("damped limit", damped, 1e-8)
    T = ev.detect_period(es)
    if T is not None and T <= 1e3 * 2 * np.pi / E1:
        U = ev.quantum_ct_matrix(es, T)
        add("periodicity", _max(U[:k, :k] - np.eye(k)), 1e-9)
    if not rates.space.truncated_space:
        d = rates.discrete()
        spec = ev.classical_dt_evolution(es, d.t_S, init, 100)
        direct = ev.classical_dt_direct(build_K(d), init, 100)
        add("discrete spectral vs K powers", _max(spec.values - direct.values), 1e-10)
        gap = max(abs(ev.quantum_dt_amplitude(es, d.t_S, x, y, l) - ev.quantum_ct_amplitude(es, x, y, d.t_S * l))
                  for x in ys for y in ys for l in (0, 1, 7, 50))
        add("discrete vs continuous amplitude", gap, 1e-12)
    return out


def run_suites(target: Family | RateTable, seed: int = 0) -> list[Check]:
    """All invariant suites for a family (closed forms) or a raw rate table (oracle only)."""
    if isinstance(target, Family):
        es = analytic_eigensystem(target)
        rates = rates_of(target, None if target.is_finite else _space_of(es))
        checks = _process_checks(rates, es) + _family_checks(target, es, rates)
    else:
        rates = target.continuous()
        es = numeric_eigensystem(build_H(rates))
        checks = _process_checks(rates, es)
    return checks + _spectral_checks(es, rates) + _evolve_checks(es, rates, seed)


def _space_of(es: EigenSystem):
    from .process import StateSpace, poisson_tail

    return StateSpace.truncated(es.size - 1, poisson_tail(float(es.family.a), es.size - 1))
