"""Eigensystems of the symmetric birth-death Hamiltonians.

Two independent routes: :func:`analytic_eigensystem` assembles the closed-form
eigenvectors d_n phi0(x) P_n(x) of a family, and :func:`numeric_eigensystem`
solves any symmetric tridiagonal matrix by Sturm-sequence bisection followed
by inverse iteration. Columns of ``vectors`` are eigenvectors, normalised and
signed so that ``vectors[0, n] > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .families import Family
from .process import StateSpace, TridiagonalMatrix, WeightVector, default_tail_tolerance, truncate_space
from .specfun import LogScaled

__all__ = [
    "ConvergenceFailure",
    "BoundViolation",
    "EigenSystem",
    "analytic_eigensystem",
    "numeric_eigensystem",
    "gram_defect",
    "certified_core",
    "sturm_count",
    "bisect_eigenvalues",
    "residual",
    "kappa_spectrum",
]

EIG_ABS_TOL = 1e-13
# leading Charlier modes certified by default (desk-scale N <= 12)
DEFAULT_CORE_MODES = 13
CORE_GRAM_TOL = 1e-12
CLUSTER_REL_GAP = 1e-8
# gaps below this fraction of ||H|| also share a cluster (near-zero levels)
CLUSTER_ABS_GAP = 1e-3
BOUND_SLACK = 1e-12
# inverse-iteration sweeps after the residual target is met
EXTRA_ITERATIONS = 2
_EPS = np.finfo(float).eps


class ConvergenceFailure(RuntimeError):
    pass


class BoundViolation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues (ascending), orthonormal eigenvectors and the ground-state weight.

    ``core`` is the number of leading states and modes on which the system
    is exact to the truncation tolerance. It equals ``size`` except for
    truncated semi-infinite families, where the columns are samples of the
    infinite eigenvectors and only the leading block is certified.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    weight: WeightVector
    source: str
    family: Family | None = None
    core: int | None = None

    def __post_init__(self):
        if self.core is None:
            object.__setattr__(self, "core", len(self.eigenvalues))
        for name in ("eigenvalues", "vectors"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def ground(self) -> np.ndarray:
        return self.vectors[:, 0]

    def gram(self) -> np.ndarray:
        return self.vectors.T @ self.vectors

    def completeness(self) -> np.ndarray:
        return self.vectors @ self.vectors.T

    def reconstruct(self, values=None) -> np.ndarray:
        """sum_n values[n] phi_n(x) phi_n(y); with no values this rebuilds H."""
        if values is None:
            values = self.eigenvalues
        return (self.vectors * np.asarray(values)) @ self.vectors.T

    def restricted(self, k: int) -> "EigenSystem":
        """Leading k modes on the leading k states (primarily for the certified core)."""
        return EigenSystem(self.eigenvalues[:k], self.vectors[:k, :k], self.weight,
                           self.source, self.family, min(k, self.core))


def _weight_from_family(family: Family, size: int) -> WeightVector:
    log_w = np.array([family.phi0_squared(x).log_magnitude for x in range(size)])
    d0 = family.norm_squared(0)
    pi = np.exp(log_w + d0.log_magnitude)
    return WeightVector(0.5 * log_w, d0, pi)


def _assemble(family: Family, size: int):
    log_w = np.array([family.phi0_squared(x).log_magnitude for x in range(size)])
    log_d = np.array([family.norm_squared(n).log_magnitude for n in range(size)])
    P = family.polynomial_table(size)
    return np.exp(0.5 * (log_w[:, None] + log_d[None, :])) * P


def gram_defect(vectors: np.ndarray) -> np.ndarray:
    """Per state y, sum_nm |phi_n(y)| |G - I|_nm |phi_m(y)| with G the column Gram matrix.

    Bounds the norm lost by any evolution started at y because the sampled
    columns are cut off at the truncation edge.
    """
    W = np.abs(vectors)
    G = np.abs(vectors.T @ vectors - np.eye(vectors.shape[1]))
    return np.einsum("yn,nm,ym->y", W, G, W)


def certified_core(family: Family, vectors: np.ndarray, tol: float) -> int:
    """Leading count k such that modes < k have tail norm below ``tol`` past the cut
    and evolutions from states < k keep their norm to CORE_GRAM_TOL."""
    size = vectors.shape[0]
    last = size - 1
    modes = 0
    while modes < size and family.mode_support(modes, tol) <= last:
        modes += 1
    bad = np.nonzero(gram_defect(vectors) > CORE_GRAM_TOL)[0]
    states = int(bad[0]) if bad.size else size
    return min(modes, states)


def analytic_eigensystem(family: Family, space: StateSpace | None = None,
                         tail_tolerance: float | None = None,
                         modes: int = DEFAULT_CORE_MODES) -> EigenSystem:
    """Closed-form eigensystem; Charlier is truncated with :func:`truncate_space`.

    For Charlier without an explicit ``space`` the cut starts from
    ``truncate_space(family, tol, modes)`` and grows until the certified core
    holds ``modes`` states.
    """
    tol = None
    if not family.is_finite:
        tol = default_tail_tolerance() if tail_tolerance is None else tail_tolerance
    return _analytic_cached(family, space, tol, modes)


@lru_cache(maxsize=64)
def _analytic_cached(family, space, tol, modes) -> EigenSystem:
    if family.is_finite:
        size = family.N + 1
        vectors = _assemble(family, size)
        core = size
    else:
        grow = space is None
        size = (truncate_space(family, tol, modes) if grow else space).size
        while True:
            vectors = _assemble(family, size)
            core = certified_core(family, vectors, tol)
            if not grow or core >= modes:
                break
            size = int(1.2 * size) + 1
    eigenvalues = np.array([family.eigenvalue(n) for n in range(size)])
    return EigenSystem(eigenvalues, vectors, _weight_from_family(family, size),
                       "analytic", family, core)


def _offdiag(H: TridiagonalMatrix) -> np.ndarray:
    if not H.symmetric and not np.allclose(H.upper, H.lower, rtol=0, atol=0):
        raise ValueError("numeric_eigensystem needs a symmetric tridiagonal matrix")
    return np.asarray(H.upper, dtype=float)


def sturm_count(diag: np.ndarray, off: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Number of eigenvalues strictly below each shift (LDL^T pivot signs)."""
    shifts = np.asarray(shifts, dtype=float)
    off2 = off**2
    floor = _EPS * max(1.0, float(np.max(np.abs(off))) if off.size else 1.0)
    count = np.zeros(shifts.shape, dtype=int)
    piv = diag[0] - shifts
    for i in range(len(diag)):
        if i:
            piv = (diag[i] - shifts) - off2[i - 1] / piv
        piv = np.where(piv == 0.0, -floor, piv)
        count += piv < 0
    return count


def bisect_eigenvalues(diag, off, abs_tol: float = EIG_ABS_TOL) -> np.ndarray:
    """All eigenvalues, ascending, bracketed by bisection on the Sturm count.

    The bracket width reached is max(abs_tol, a few ulps of ||H||); below
    that no double-precision bisection can go.
    """
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    n = len(diag)
    if n == 1:
        return diag.copy()
    radius = np.zeros(n)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo0 = float(np.min(diag - radius))
    hi0 = float(np.max(diag + radius))
    norm = max(abs(lo0), abs(hi0), 1e-300)
    width = max(abs_tol, 4 * _EPS * norm)
    lo = np.full(n, lo0 - width)
    hi = np.full(n, hi0 + width)
    index = np.arange(n)
    for _ in range(400):
        active = (hi - lo) > width
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        stuck = (mid <= lo) | (mid >= hi)
        active &= ~stuck
        if not active.any():
            break
        below = sturm_count(diag, off, mid) > index
        hi = np.where(active & below, mid, hi)
        lo = np.where(active & ~below, mid, lo)
    return 0.5 * (lo + hi)


def _solve_shifted(diag, off, shift, rhs):
    """Solve (T - shift) y = rhs by Gaussian elimination with partial pivoting."""
    n = len(diag)
    if n == 1:
        piv = diag[0] - shift
        return rhs / (piv if piv != 0 else _EPS)
    # LAPACK gttrf-style factorisation with row interchanges
    d = list(diag - shift)
    du = list(off)
    dl = list(off)
    du2 = [0.0] * max(n - 2, 0)
    b = list(rhs)
    tiny = _EPS * max(1.0, float(np.max(np.abs(diag - shift))), float(np.max(np.abs(off))))
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] == 0.0:
                d[i] = tiny
            fact = dl[i] / d[i]
            d[i + 1] -= fact * du[i]
            b[i + 1] -= fact * b[i]
            dl[i] = fact
        else:
            fact = d[i] / dl[i]
            d[i], dl[i] = dl[i], fact
            temp = du[i]
            du[i] = d[i + 1]
            d[i + 1] = temp - fact * d[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            b[i], b[i + 1] = b[i + 1], b[i] - fact * b[i + 1]
    if d[n - 1] == 0.0:
        d[n - 1] = tiny
    y = [0.0] * n
    y[n - 1] = b[n - 1] / d[n - 1]
    if n > 1:
        y[n - 2] = (b[n - 2] - du[n - 2] * y[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        y[i] = (b[i] - du[i] * y[i + 1] - du2[i] * y[i + 2]) / d[i]
    return np.array(y)


def _fix_sign(v, diag, off, lam):
    """Make the first component positive, judged robustly when it is tiny."""
    big = np.max(np.abs(v))
    if abs(v[0]) >= 1e-3 * big:
        return v if v[0] > 0 else -v
    # forward recurrence from v(0) = 1 is stable up to where the vector becomes large
    j = int(np.argmax(np.abs(v) >= 1e-3 * big))
    prev, cur = 0.0, 1.0
    for x in range(j):
        nxt = ((lam - diag[x]) * cur - (off[x - 1] * prev if x else 0.0)) / off[x]
        prev, cur = cur, nxt
    return v if np.sign(cur) == np.sign(v[j]) else -v


def numeric_eigensystem(H: TridiagonalMatrix, max_iter: int = 8, retries: int = 3) -> EigenSystem:
    """Oracle eigensystem of a symmetric tridiagonal matrix.

    The weight is read off the lowest eigenvector, so it is the stationary
    weight when H is a birth-death Hamiltonian with zero mode.
    """
    diag = np.asarray(H.diag, dtype=float)
    off = _offdiag(H)
    n = len(diag)
    lam = bisect_eigenvalues(diag, off)
    norm = float(np.max(np.abs(diag)) + 2 * (np.max(np.abs(off)) if n > 1 else 0.0))
    target = 64 * n * _EPS * max(norm, 1e-300)
    rng = np.random.default_rng(20240611)
    start = rng.uniform(0.5, 1.5, size=(n, n))
    vectors = np.zeros((n, n))
    cluster_start = 0
    for k in range(n):
        gap = abs(lam[k] - lam[k - 1]) if k else np.inf
        if gap > max(CLUSTER_REL_GAP * max(abs(lam[k]), abs(lam[k - 1])), CLUSTER_ABS_GAP * norm):
            cluster_start = k
        for attempt in range(retries + 1):
            shift = lam[k] + attempt * 1e3 * _EPS * max(norm, 1.0) * (-1) ** attempt
            v = start[:, k] / np.linalg.norm(start[:, k])
            ok = False
            extra = EXTRA_ITERATIONS
            for _ in range(max_iter + EXTRA_ITERATIONS):
                v = _solve_shifted(diag, off, shift, v)
                for j in range(cluster_start, k):
                    v = v - (vectors[:, j] @ v) * vectors[:, j]
                nv = np.linalg.norm(v)
                if not np.isfinite(nv) or nv == 0:
                    break
                v = v / nv
                if ok:
                    # a met target still leaves residual/gap error in v; sweep on
                    extra -= 1
                    if extra == 0:
                        break
                    continue
                # judge the vector by its Rayleigh residual; lam[k] itself is only
                # known to the bisection bracket width
                Hv = H.matvec(v)
                r = Hv - (v @ Hv) * v
                ok = bool(np.max(np.abs(r)) <= target)
            if ok:
                break
        else:
            raise ConvergenceFailure(f"inverse iteration stalled for eigenvalue {k} ({lam[k]:g})")
        vectors[:, k] = _fix_sign(v, diag, off, lam[k])
    ground = vectors[:, 0]
    log_phi0 = np.log(np.abs(ground)) - math.log(abs(ground[0]))
    d0 = LogScaled(2 * math.log(abs(ground[0])), 1)
    weight = WeightVector(log_phi0, d0, ground**2)
    return EigenSystem(lam, vectors, weight, "numeric")


def residual(H: TridiagonalMatrix, es: EigenSystem) -> np.ndarray:
    """max-norm of H phi_n - E(n) phi_n for each mode n."""
    if H.size != es.vectors.shape[0]:
        raise ValueError("matrix and eigensystem sizes differ")
    out = np.empty(es.size)
    for k in range(es.size):
        v = es.vectors[:, k]
        out[k] = np.max(np.abs(H.matvec(v) - es.eigenvalues[k] * v))
    return out


def kappa_spectrum(es: EigenSystem, t_S: float) -> np.ndarray:
    """Eigenvalues 1 - t_S E(n) of the discrete-time transition matrix."""
    kappa = 1.0 - t_S * np.asarray(es.eigenvalues)
    bad = np.abs(kappa) > 1.0 + BOUND_SLACK
    if bad.any():
        k = int(np.argmax(bad))
        raise BoundViolation(f"kappa({k}) = {kappa[k]:g} lies outside [-1, 1]; t_S={t_S} too large")
    return kappa
