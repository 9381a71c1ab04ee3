import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bdspec.families import Charlier, Hahn, Krawtchouk, QuantumQKrawtchouk, rates_of
from bdspec.process import (
    InvalidRates,
    InvalidTimescale,
    NonSummable,
    RateTable,
    StateSpace,
    build_A_factor,
    build_H,
    build_Hd,
    build_Htilde,
    build_K,
    build_L,
    build_phi0,
    build_T,
    default_timescale,
    poisson_tail,
    truncate_space,
)


@st.composite
def rate_tables(draw, max_size=12):
    n = draw(st.integers(2, max_size))
    pos = st.floats(0.05, 20.0)
    birth = [draw(pos) for _ in range(n - 1)] + [0.0]
    death = [0.0] + [draw(pos) for _ in range(n - 1)]
    return RateTable.from_lists(birth, death)


def test_state_space_invariants():
    assert StateSpace.finite(4).size == 5
    assert StateSpace.truncated(10, 1e-15).size == 11
    with pytest.raises(ValueError):
        StateSpace.finite(0)
    with pytest.raises(ValueError):
        StateSpace.truncated(5, -1.0)


def test_rate_table_validation():
    with pytest.raises(InvalidRates):
        RateTable.from_lists([1.0, 0.0], [0.5, 1.0])      # D(0) != 0
    with pytest.raises(InvalidRates):
        RateTable.from_lists([1.0, 1.0], [0.0, 1.0])      # B(N) != 0
    with pytest.raises(InvalidRates):
        RateTable.from_lists([1.0, 0.0, 0.0], [0.0, 1.0, 1.0])
    with pytest.raises(InvalidRates):
        RateTable.from_lists([1.0, 1.0, 0.0], [0.0, -1.0, 1.0])
    r = RateTable.from_lists([1.0, 2.0, 0.0], [0.0, 1.0, 1.5])
    with pytest.raises(InvalidTimescale):
        r.discrete(1 / 3.0)
    with pytest.raises(InvalidTimescale):
        build_K(r)
    with pytest.raises(InvalidTimescale):
        build_L(r.discrete())


def test_L_examples():
    L = build_L(rates_of(Krawtchouk(1, 0.3)))
    np.testing.assert_allclose(L.dense(), [[-0.3, 0.7], [0.3, -0.7]], rtol=0, atol=1e-16)
    assert np.all(build_L(rates_of(Krawtchouk(2, 0.5))).column_sums() == 0)
    L = build_L(rates_of(Charlier(1.0), StateSpace.truncated(2, 0.0))).dense()
    assert (L[1, 0], L[0, 1], L[2, 1], L[1, 2]) == (1.0, 1.0, 1.0, 2.0)


def test_phi0_examples():
    f = Krawtchouk(6, 0.35)
    w = build_phi0(rates_of(f))
    assert w.log_phi0[0] == 0.0
    binom = [math.comb(6, x) * 0.35**x * 0.65 ** (6 - x) for x in range(7)]
    np.testing.assert_allclose(w.pi, binom, rtol=1e-13)
    space = truncate_space(Charlier(2.0))
    w = build_phi0(rates_of(Charlier(2.0), space))
    poisson = [math.exp(-2.0) * 2.0**x / math.factorial(x) for x in range(space.size)]
    np.testing.assert_allclose(w.pi, poisson, rtol=1e-12, atol=1e-300)


def test_H_examples():
    H = build_H(rates_of(Krawtchouk(1, 0.5)))
    np.testing.assert_allclose(H.dense(), [[0.5, -0.5], [-0.5, 0.5]], atol=1e-16)
    np.testing.assert_allclose(np.linalg.eigvalsh(H.dense()), [0.0, 1.0], atol=1e-15)
    H = build_H(rates_of(QuantumQKrawtchouk(2, 5.0, 0.5)))
    assert H.diag[0] == pytest.approx(0.6, rel=1e-15)
    r = rates_of(Hahn(3, 1.0, 2.0))
    assert build_A_factor(r).diag[0] == pytest.approx(math.sqrt(3.0), rel=1e-15)


def test_Htilde_conjugation():
    r = rates_of(Krawtchouk(4, 0.4))
    phi0 = build_phi0(r).phi0_values()
    conj = np.diag(1 / phi0) @ build_H(r).dense() @ np.diag(phi0)
    np.testing.assert_allclose(conj, build_Htilde(r).dense(), rtol=0, atol=1e-12)
    assert np.all(build_Htilde(r).row_sums() == 0.0)
    assert np.max(np.abs(build_Htilde(r).matvec(np.ones(5)))) <= 4 * np.finfo(float).eps


def test_K_examples():
    r = rates_of(Krawtchouk(5, 0.3)).discrete(0.1)
    K = build_K(r).dense()
    pi = build_phi0(r).pi
    assert np.max(np.abs(K * pi - (K * pi).T)) < 1e-13
    Hd = build_Hd(r).dense()
    np.testing.assert_allclose(Hd, 0.1 * build_H(r.continuous()).dense(), rtol=0, atol=1e-13)
    phi0 = build_phi0(r).phi0_values()
    T = np.diag(1 / phi0) @ K @ np.diag(phi0)
    np.testing.assert_allclose(np.eye(6) - T, Hd, rtol=0, atol=1e-13)
    np.testing.assert_allclose(build_T(r).dense(), T, rtol=0, atol=1e-13)


def test_Hd_spectrum():
    r = rates_of(Krawtchouk(3, 0.5)).discrete(0.2)
    ev = np.linalg.eigvalsh(build_Hd(r).dense())
    np.testing.assert_allclose(ev, 0.2 * np.arange(4), atol=1e-14)
    assert np.all(ev >= -1e-15) and np.all(ev <= 2)


def test_default_timescale():
    r = rates_of(Hahn(5, 1.0, 1.0))
    t_S = default_timescale(r)
    assert t_S * np.max(r.birth + r.death) == pytest.approx(0.9)
    assert r.discrete().t_S == t_S


def test_truncation():
    space = truncate_space(Charlier(1.0), 1e-14)
    assert space.last >= 24 and space.tail_mass < 1e-14
    assert space.tail_mass == pytest.approx(poisson_tail(1.0, space.last, 4 * space.last), rel=1e-10)
    space = truncate_space(Charlier(5.0), 1e-10)
    assert space.tail_mass < 1e-10 and space.last >= 40
    with pytest.raises(ValueError):
        truncate_space(Krawtchouk(4, 0.5))
    with pytest.raises(InvalidTimescale):
        rates_of(Charlier(1.0), space).discrete()


def test_non_summable_weight():
    # growing birth rates on a truncation do not define a stationary weight
    n = 30
    birth = np.full(n, 3.0)
    death = np.r_[0.0, np.ones(n - 1)]
    r = RateTable(StateSpace.truncated(n - 1, 0.0), np.r_[birth[:-1], 0.0], death)
    with pytest.raises(NonSummable):
        build_phi0(r)


@given(rate_tables())
def test_conservation_is_exact(r):
    assert np.all(build_L(r).column_sums() == 0.0)
    K = build_K(r.discrete())
    assert np.max(np.abs(K.column_sums() - 1.0)) <= 4 * np.finfo(float).eps


@given(rate_tables())
def test_factorisation_and_zero_mode(r):
    H = build_H(r)
    assert H.symmetric and np.array_equal(H.upper, H.lower)
    A = build_A_factor(r).dense()
    scale = max(1.0, np.max(H.diag))
    assert np.max(np.abs(A.T @ A - H.dense())) <= 1e-14 * scale
    w = build_phi0(r)
    phi_hat = w.sqrt_pi()
    assert np.max(np.abs(H.matvec(phi_hat))) <= 1e-12 * scale
    assert np.max(np.abs(A @ phi_hat)) <= 1e-12 * math.sqrt(scale)


@given(rate_tables())
def test_phi0_recurrence_and_normalisation(r):
    w = build_phi0(r)
    steps = np.diff(w.log_phi0)
    expected = 0.5 * (np.log(r.birth[:-1]) - np.log(r.death[1:]))
    assert np.max(np.abs(steps - expected)) <= 1e-13
    assert abs(np.sum(w.pi) - 1.0) <= 1e-12
    assert np.all(w.pi > 0)
    assert w.phi0[0].value() == 1.0


@given(rate_tables(), st.sampled_from([0.1, 7.3]))
def test_rescaling_keeps_weight(r, c):
    assert np.max(np.abs(build_phi0(r.scaled(c)).pi - build_phi0(r).pi)) <= 1e-13


@given(rate_tables())
def test_detailed_balance(r):
    d = r.discrete()
    K = build_K(d).dense()
    pi = build_phi0(d).pi
    flux = K * pi[None, :]
    assert np.max(np.abs(flux - flux.T)) <= 1e-13
