import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bdspec.evolve import quantum_ct_amplitude
from bdspec.families import (
    Charlier,
    Hahn,
    IndexOutOfRange,
    Krawtchouk,
    ParamOutOfRange,
    QHahn,
    QuantumQKrawtchouk,
    Unsupported,
    family_from_config,
    rates_of,
)
from bdspec.process import StateSpace
from bdspec.spectral import analytic_eigensystem


def test_rates_examples():
    r = rates_of(Krawtchouk(4, 0.5))
    np.testing.assert_array_equal(r.birth, [2, 1.5, 1, 0.5, 0])
    np.testing.assert_array_equal(r.death, [0, 0.5, 1, 1.5, 2])
    r = rates_of(Hahn(2, 1.0, 1.0))
    assert r.birth[0] == 2 and r.death[2] == 2
    r = rates_of(Charlier(2.0), StateSpace.truncated(10, 0.0))
    assert np.all(r.birth[:-1] == 2) and r.death[7] == 7


def test_eigenvalue_examples():
    assert Krawtchouk(5, 0.3).eigenvalue(3) == 3
    assert Hahn(4, 1.0, 2.0).eigenvalue(2) == pytest.approx(8)
    assert QHahn(4, 0.5, 0.5, 0.5).eigenvalue(1) == pytest.approx(0.75, rel=1e-15)
    assert QuantumQKrawtchouk(4, 50.0, 0.5).eigenvalue(2) == pytest.approx(0.75)
    assert Charlier(1.0).eigenvalue(40) == 40
    with pytest.raises(IndexOutOfRange):
        Krawtchouk(5, 0.3).eigenvalue(6)
    with pytest.raises(IndexOutOfRange):
        Charlier(1.0).eigenvalue(-1)


def test_sinusoidal_coordinate():
    assert Krawtchouk(3, 0.4).sinusoidal(2) == 2
    f = QHahn(4, 0.3, 0.4, 0.5)
    assert f.sinusoidal(0) == 0 and f.sinusoidal(2) == pytest.approx(3.0)


@pytest.mark.parametrize("bad", [
    lambda: Krawtchouk(4, 1.0),
    lambda: Krawtchouk(0, 0.5),
    lambda: Krawtchouk(2.5, 0.5),
    lambda: Hahn(4, 0.0, 1.0),
    lambda: QHahn(4, 1.2, 0.5, 0.5),
    lambda: QHahn(4, 0.5, 0.5, 1.0),
    lambda: QuantumQKrawtchouk(4, 10.0, 0.5),
    lambda: Charlier(-1.0),
    lambda: Krawtchouk(4, 0.5, rate_scale=0.0),
])
def test_param_validation(bad):
    with pytest.raises(ParamOutOfRange):
        bad()


def test_validation_names_constraint():
    with pytest.raises(ParamOutOfRange, match="q\\^-N"):
        QuantumQKrawtchouk(4, 10.0, 0.5)


def test_polynomial_examples(any_family):
    last = any_family.last if any_family.is_finite else 10
    for n in range(last + 1):
        assert any_family.polynomial(n, 0) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_krawtchouk_endpoint(p):
    f = Krawtchouk(7, p)
    for n in range(8):
        assert f.polynomial(n, 7) == pytest.approx((1 - 1 / p) ** n, rel=1e-12)
        assert f.polynomial_at_end(n) == pytest.approx((1 - 1 / p) ** n, rel=1e-14)


def test_hahn_endpoint():
    f = Hahn(6, 1.3, 2.1)
    for n in range(7):
        expected = (-1) ** n * math.prod(2.1 + k for k in range(n)) / math.prod(1.3 + k for k in range(n))
        assert f.polynomial(n, 6) == pytest.approx(expected, rel=1e-12)
        assert f.polynomial_at_end(n) == pytest.approx(expected, rel=1e-12)


def test_q_endpoints():
    for f in (QHahn(6, 0.3, 0.4, 0.5), QuantumQKrawtchouk(6, 1.5 * 0.9**-6, 0.9)):
        for n in range(7):
            assert f.polynomial(n, 6) == pytest.approx(f.polynomial_at_end(n), rel=1e-10, abs=1e-12)


def test_norm_constant_examples():
    assert Krawtchouk(2, 0.5).norm_squared(1).value() == pytest.approx(0.5, rel=1e-15)
    assert Charlier(1.0).norm_squared(0).value() == pytest.approx(math.exp(-1), rel=1e-15)


def test_charlier_has_no_endpoint_formulas():
    with pytest.raises(Unsupported):
        Charlier(1.0).psi_N0(0.3)
    with pytest.raises(Unsupported):
        Charlier(1.0).classical_N0(0.3)


def test_krawtchouk_reflection():
    f = Krawtchouk(9, 0.5)
    for n in range(10):
        for x in range(10):
            assert abs(f.polynomial(n, 9 - x) - (-1) ** n * f.polynomial(n, x)) <= 1e-12


def test_krawtchouk_psi_closed_form():
    f = Krawtchouk(3, 0.5)
    assert abs(f.psi_N0(math.pi)) ** 2 == pytest.approx(1.0, abs=1e-14)
    for p in (0.2, 0.7):
        g = Krawtchouk(5, p)
        assert g.psi_N0(0.0) == 0
        t = 1.1
        assert abs(g.psi_N0(t) - (p * (1 - p)) ** 2.5 * (1 - cmath.exp(-1j * t)) ** 5) < 1e-14
        assert g.classical_N0(t) == pytest.approx(p**5 * (1 - math.exp(-t)) ** 5, rel=1e-14)


@pytest.mark.parametrize("family", [
    Hahn(2, 1.0, 1.0), Hahn(6, 1.3, 0.7), QHahn(6, 0.3, 0.4, 0.5),
    QuantumQKrawtchouk(5, 1.5 * 0.9**-5, 0.9),
])
def test_closed_form_amplitude_matches_spectral_sum(family):
    es = analytic_eigensystem(family)
    for t in (0.0, 0.7, 3.1):
        assert abs(family.psi_N0(t) - quantum_ct_amplitude(es, family.N, 0, t)) < 1e-12


def test_difference_equation(finite_family):
    f = finite_family
    r = rates_of(f)
    B, D = r.birth, r.death
    for n in range(f.N + 1):
        P = np.array([f.polynomial(n, x) for x in range(f.N + 1)])
        E = f.eigenvalue(n)
        up = np.r_[P[1:], P[-1]]
        down = np.r_[P[0], P[:-1]]
        lhs = B * (P - up) + D * (P - down)
        assert np.max(np.abs(lhs - E * P) / np.maximum(1.0, np.abs(E * P))) <= 1e-10


def test_charlier_difference_equation():
    f = Charlier(2.0)
    for n in range(8):
        P = [f.polynomial(n, x) for x in range(30)]
        for x in range(29):
            lhs = 2.0 * (P[x] - P[x + 1]) + x * (P[x] - (P[x - 1] if x else 0.0))
            assert abs(lhs - n * P[x]) <= 1e-10 * max(1.0, abs(n * P[x]))


def test_orthogonality(finite_family):
    f = finite_family
    size = f.N + 1
    w = np.array([f.phi0_squared(x).value() for x in range(size)])
    d2 = np.array([f.norm_squared(n).value() for n in range(size)])
    P = np.array([[f.polynomial(n, x) for n in range(size)] for x in range(size)])
    G = (P * w[:, None]).T @ P * np.sqrt(np.outer(d2, d2))
    assert np.max(np.abs(G - np.eye(size))) <= 1e-10


def test_completeness_diagonal(finite_family):
    f = finite_family
    for x in range(f.N + 1):
        total = sum(f.eigenvector_entry(n, x) ** 2 for n in range(f.N + 1))
        assert total == pytest.approx(1.0, abs=1e-11)


def test_self_duality():
    for f in (Krawtchouk(6, 0.4), Charlier(1.5)):
        for n in range(6):
            for x in range(6):
                assert f.polynomial(n, x) == pytest.approx(f.polynomial(x, n), rel=1e-12, abs=1e-14)


@given(st.sampled_from(["hahn", "q_hahn"]), st.floats(0.05, 0.95), st.floats(0.05, 0.95),
       st.integers(1, 12))
def test_spectrum_positive_and_increasing(kind, a, b, N):
    f = Hahn(N, a, b) if kind == "hahn" else QHahn(N, a, b, 0.6)
    E = [f.eigenvalue(n) for n in range(N + 1)]
    assert E[0] == 0 and all(np.diff(E) > 0)


def test_config_round_trip(any_family):
    assert family_from_config(any_family.to_config()) == any_family
    g = family_from_config({"family": "krawtchouk", "N": 4, "p": 0.5, "rate_scale": 2.0})
    assert g.eigenvalue(1) == 2.0 and g.known_period() == pytest.approx(math.pi)
    with pytest.raises(ParamOutOfRange):
        family_from_config({"family": "meixner"})
    with pytest.raises(ParamOutOfRange):
        family_from_config({"family": "hahn", "N": 4, "a": 1.0})
    with pytest.raises(ParamOutOfRange):
        family_from_config({"family": "krawtchouk", "N": 4.5, "p": 0.5})


def test_rate_scale_leaves_polynomials():
    f, g = Hahn(5, 1.2, 0.8), Hahn(5, 1.2, 0.8, rate_scale=3.0)
    assert g.eigenvalue(3) == pytest.approx(3 * f.eigenvalue(3))
    assert g.polynomial(3, 2) == f.polynomial(3, 2)
    np.testing.assert_allclose(rates_of(g).birth, 3 * rates_of(f).birth)


def test_known_periods():
    assert Krawtchouk(4, 0.3).known_period() == pytest.approx(2 * math.pi)
    assert Hahn(4, 1.0, 1.0).known_period() == pytest.approx(math.pi)
    assert Hahn(4, 1.5, 1.5).known_period() == pytest.approx(2 * math.pi)
    assert Hahn(4, 1.3, 1.1).known_period() is None
    assert Charlier(0.5).known_period() == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("family", [Krawtchouk(12, 0.3), Hahn(12, 1.5, 0.5), QHahn(12, 0.3, 0.4, 0.8),
                                    QuantumQKrawtchouk(12, 1.5 * 0.9**-12, 0.9), QHahn(20, 0.7, 0.5, 0.3),
                                    Charlier(2.0)])
def test_polynomial_table_matches_scalar(family):
    size = 13
    T = family.polynomial_table(size)
    S = np.array([[family.polynomial(n, x) for n in range(size)] for x in range(size)])
    # numpy and libm powers may differ in the last bit
    scale = np.maximum(1.0, np.abs(S))
    assert np.max(np.abs(T - S) / scale) < 1e-13


@pytest.mark.parametrize("family", [Hahn(6, 0.4, 0.6), QHahn(6, 0.5, 0.6, 0.3)])
def test_degenerate_normalisation_points(family):
    # a + b = 1 (Hahn) and ab = q (q-Hahn) hit 0/0 in the textbook norm formulas
    es = analytic_eigensystem(family)
    V = es.vectors
    assert np.max(np.abs(V.T @ V - np.eye(es.size))) < 1e-12
    assert np.sum(es.weight.pi) == pytest.approx(1.0, abs=1e-13)
