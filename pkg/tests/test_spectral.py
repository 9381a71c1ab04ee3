import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdspec.families import Charlier, Krawtchouk, rates_of
from bdspec.process import RateTable, StateSpace, TridiagonalMatrix, build_H, build_Hd, build_K
from bdspec.spectral import (
    BoundViolation,
    EigenSystem,
    analytic_eigensystem,
    bisect_eigenvalues,
    gram_defect,
    kappa_spectrum,
    numeric_eigensystem,
    residual,
    sturm_count,
)

EPS = np.finfo(float).eps


def _rates(draw, n):
    pos = st.floats(0.05, 20.0)
    birth = [draw(pos) for _ in range(n - 1)] + [0.0]
    death = [0.0] + [draw(pos) for _ in range(n - 1)]
    return RateTable.from_lists(birth, death)


def _space(es):
    return StateSpace.truncated(es.size - 1, 0.0)


def test_krawtchouk_spectrum_and_ground_state():
    es = analytic_eigensystem(Krawtchouk(4, 0.3))
    np.testing.assert_array_equal(es.eigenvalues, [0, 1, 2, 3, 4])
    binom = [math.comb(4, x) * 0.3**x * 0.7 ** (4 - x) for x in range(5)]
    np.testing.assert_allclose(es.ground**2, binom, rtol=1e-13)
    assert es.source == "analytic" and es.core == es.size


def test_eigensystem_is_immutable():
    es = analytic_eigensystem(Krawtchouk(4, 0.3))
    with pytest.raises(ValueError):
        es.vectors[0, 0] = 2.0
    assert analytic_eigensystem(Krawtchouk(4, 0.3)) is es


def test_eigensystem_invariants(any_family):
    es = analytic_eigensystem(any_family)
    k = es.core
    V = es.vectors
    assert abs(es.eigenvalues[0]) <= 1e-12
    assert np.all(np.diff(es.eigenvalues) > 0)
    assert np.max(np.abs(V[:, :k].T @ V[:, :k] - np.eye(k))) < 1e-10
    assert np.max(np.abs(es.completeness()[:k, :k] - np.eye(k))) < 1e-10
    assert np.all(V[0] > 0)


def test_charlier_truncation_quality():
    es = analytic_eigensystem(Charlier(1.0))
    assert es.core >= 13
    k = es.core
    assert np.max(np.abs(es.gram()[:k, :k] - np.eye(k))) < 1e-10
    assert np.all(gram_defect(es.vectors)[:k] <= 1e-12)
    H = build_H(rates_of(Charlier(1.0), _space(es)))
    assert np.max(residual(H, es)[:k]) < 1e-10


def test_restricted_block():
    es = analytic_eigensystem(Krawtchouk(6, 0.4)).restricted(3)
    assert es.size == 3 and es.vectors.shape == (3, 3) and es.core == 3


def test_residual_examples(any_family):
    es = analytic_eigensystem(any_family)
    r = rates_of(any_family, None if any_family.is_finite else _space(es))
    res = residual(build_H(r), es)
    assert np.max(res[: es.core]) < 1e-10
    assert res[0] < 1e-12
    with pytest.raises(ValueError):
        residual(build_H(rates_of(Krawtchouk(3, 0.5))), analytic_eigensystem(Krawtchouk(4, 0.5)))


def test_numeric_scalar_case():
    es = numeric_eigensystem(TridiagonalMatrix(np.array([2.5]), np.array([]), np.array([]), True))
    assert es.eigenvalues[0] == 2.5
    np.testing.assert_array_equal(es.vectors, [[1.0]])


def test_numeric_krawtchouk_spectrum():
    es = numeric_eigensystem(build_H(rates_of(Krawtchouk(6, 0.42))))
    np.testing.assert_allclose(es.eigenvalues, np.arange(7), rtol=0, atol=1e-9)
    assert es.source == "numeric"


def test_numeric_discrete_spectrum():
    Hd = build_Hd(rates_of(Krawtchouk(5, 0.3)).discrete(0.1))
    es = numeric_eigensystem(Hd)
    np.testing.assert_allclose(es.eigenvalues, 0.1 * np.arange(6), rtol=0, atol=1e-12)


def test_sturm_count_brackets():
    H = build_H(rates_of(Krawtchouk(5, 0.3)))
    off = H.upper
    counts = sturm_count(H.diag, off, np.array([-0.5, 0.5, 2.5, 5.5]))
    np.testing.assert_array_equal(counts, [0, 1, 3, 6])
    np.testing.assert_allclose(bisect_eigenvalues(H.diag, off), np.arange(6), atol=1e-12)


def test_analytic_matches_numeric(any_family):
    es = analytic_eigensystem(any_family)
    r = rates_of(any_family, None if any_family.is_finite else _space(es))
    num = numeric_eigensystem(build_H(r))
    k = es.core
    assert np.max(np.abs(num.eigenvalues[:k] - es.eigenvalues[:k])) < 1e-9
    assert np.max(np.abs(num.vectors[:, :k] - es.vectors[:, :k])) < 1e-8


def test_spectral_representation_of_H_and_K(finite_family):
    es = analytic_eigensystem(finite_family)
    r = rates_of(finite_family)
    H = build_H(r).dense()
    assert np.max(np.abs(es.reconstruct() - H)) < 1e-9
    d = r.discrete()
    kappa = kappa_spectrum(es, d.t_S)
    g = es.ground
    K = g[:, None] * es.reconstruct(kappa) / g[None, :]
    assert np.max(np.abs(K - build_K(d).dense())) < 1e-9


def test_kappa_examples():
    es = analytic_eigensystem(Krawtchouk(4, 0.5))
    np.testing.assert_allclose(kappa_spectrum(es, 0.2), [1, 0.8, 0.6, 0.4, 0.2], atol=1e-15)
    assert kappa_spectrum(es, 0.5)[-1] == pytest.approx(-1.0)
    with pytest.raises(BoundViolation):
        kappa_spectrum(es, 0.6)


@settings(max_examples=25)
@given(st.data(), st.integers(2, 11))
def test_numeric_random_rates(data, n):
    r = _rates(data.draw, n)
    H = build_H(r)
    es = numeric_eigensystem(H)
    scale = max(1.0, np.max(H.diag))
    assert np.max(residual(H, es)) < 1e-9 * scale
    assert np.max(np.abs(es.gram() - np.eye(n))) < 1e-10
    assert np.all(es.vectors[0] > 0)
    assert abs(es.eigenvalues[0]) < 1e-12 * scale
    np.testing.assert_allclose(es.eigenvalues, np.linalg.eigvalsh(H.dense()), rtol=0, atol=1e-11 * scale)


@settings(max_examples=25)
@given(st.data(), st.integers(3, 11))
def test_interlacing(data, n):
    r = _rates(data.draw, n)
    H = build_H(r)
    full = numeric_eigensystem(H).eigenvalues
    sub = numeric_eigensystem(TridiagonalMatrix(H.diag[:-1], H.upper[:-1], H.lower[:-1], True)).eigenvalues
    slack = 8 * EPS * (np.max(np.abs(H.diag)) + 2 * np.max(np.abs(H.upper)))
    assert np.all(sub >= full[:-1] - slack) and np.all(sub <= full[1:] + slack)


def test_numeric_is_deterministic():
    H = build_H(rates_of(Krawtchouk(9, 0.37)))
    a, b = numeric_eigensystem(H), numeric_eigensystem(H)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.vectors, b.vectors)


def test_numeric_weight_matches_builder():
    r = rates_of(Krawtchouk(5, 0.3))
    es = numeric_eigensystem(build_H(r))
    binom = [math.comb(5, x) * 0.3**x * 0.7 ** (5 - x) for x in range(6)]
    np.testing.assert_allclose(es.weight.pi, binom, rtol=1e-10)
    assert isinstance(es, EigenSystem)
