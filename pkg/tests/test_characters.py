import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import char_value, dlog_table
from twistlab.characters import (
    DirichletCharacter,
    enumerate_characters,
    full_table_orthogonality,
    gauss_sum,
    gauss_sum_exact_check,
    orthogonality_check,
    postnikov_constant,
    postnikov_holds,
    product,
)
from twistlab.residue import PrimePower

PRIMES = [3, 5, 7, 11, 13]


@pytest.mark.parametrize("p", [3, 5, 7])
def test_values_match_brute_force_discrete_log(p):
    pp = PrimePower(p, 3)
    table = dlog_table(p, 3)
    for e in (1, 2, p + 1, pp.phi - 1):
        chi = DirichletCharacter(pp, e)
        got = chi.values(np.arange(pp.modulus))
        want = np.array([char_value(table, pp.phi, e, n, pp.modulus) for n in range(pp.modulus)])
        assert np.max(np.abs(got - want)) < 1e-12


@settings(max_examples=200)
@given(st.sampled_from(PRIMES), st.integers(0, 10**6), st.integers(-(10**6), 10**6), st.integers(-(10**6), 10**6))
def test_completely_multiplicative(p, e, m, n):
    chi = DirichletCharacter(PrimePower(p, 3), e)
    assert abs(chi(m * n) - chi(m) * chi(n)) < 1e-12


@given(st.sampled_from(PRIMES), st.integers(0, 10**6))
def test_parity_is_value_at_minus_one(p, e):
    chi = DirichletCharacter(PrimePower(p, 3), e)
    assert abs(chi(-1) - chi.parity) < 1e-12


@pytest.mark.parametrize("p", PRIMES)
def test_character_orthogonality(p):
    rep = orthogonality_check(PrimePower(p, 3))
    assert rep.passed, rep.summary_lines()
    assert full_table_orthogonality(PrimePower(p, 2)) < 1e-9


@pytest.mark.parametrize("p", [3, 5, 7, 11])
def test_primitive_gauss_sums_have_modulus_sqrt_q(p):
    for chi in enumerate_characters(PrimePower(p, 3)):
        if chi.primitive:
            assert gauss_sum_exact_check(chi) < 1e-10
        else:
            # imprimitive characters mod p^3 have vanishing Gauss sums
            assert abs(gauss_sum(chi)) < 1e-8


def test_primitivity_rule():
    pp = PrimePower(5, 3)
    assert not DirichletCharacter(pp, 0).primitive
    assert not DirichletCharacter(pp, 5).primitive
    assert DirichletCharacter(pp, 1).primitive
    assert DirichletCharacter(PrimePower(5, 1), 2).primitive


@pytest.mark.parametrize("p", [3, 5, 7])
def test_lift_and_product_agree_with_pointwise_product(p):
    psi = DirichletCharacter(PrimePower(p, 2), 2)
    alpha = DirichletCharacter(PrimePower(p, 3), 1)
    chi = product(alpha, psi)
    n = np.arange(p**3)
    assert np.max(np.abs(chi.values(n) - alpha.values(n) * psi.values(n))) < 1e-12


@pytest.mark.parametrize("p", PRIMES)
def test_conductor_drop_constant_exists_and_is_unique(p):
    alpha = DirichletCharacter(PrimePower(p, 3), 1)
    a = postnikov_constant(alpha).a_alpha
    assert 0 < a < p
    assert postnikov_holds(alpha, a)
    assert not any(postnikov_holds(alpha, b) for b in range(p) if b != a)


@pytest.mark.parametrize("p", [3, 5, 7])
def test_conductor_drop_from_oracle_values(p):
    pp = PrimePower(p, 3)
    table = dlog_table(p, 3)
    for e in (1, 2, p + 1):
        alpha = DirichletCharacter(pp, e)
        a = postnikov_constant(alpha).a_alpha
        for n in range(1, pp.modulus):
            if n % p == 0:
                continue
            for l in range(1, p + 1):
                lhs = char_value(table, pp.phi, e, n + p * p * l, pp.modulus) / char_value(table, pp.phi, e, n, pp.modulus)
                rhs = cmath.exp(2j * math.pi * a * l * pow(n, -1, p) / p)
                assert abs(lhs - rhs) < 1e-10


def test_conductor_drop_rejects_imprimitive():
    with pytest.raises(ValueError):
        postnikov_constant(DirichletCharacter(PrimePower(5, 3), 5))
    with pytest.raises(ValueError):
        postnikov_constant(DirichletCharacter(PrimePower(5, 2), 1))


@pytest.mark.parametrize("p,k,total,prim", [(5, 1, 4, 3), (3, 2, 6, 4), (3, 3, 18, 12)])
def test_character_counts(p, k, total, prim):
    chars = enumerate_characters(PrimePower(p, k))
    assert len(chars) == total and sum(c.primitive for c in chars) == prim


def test_value_examples():
    pp = PrimePower(5, 1)
    principal = DirichletCharacter(pp, 0)
    quadratic = DirichletCharacter(pp, 2)
    assert principal(3) == 1 and principal(5) == 0
    assert all(DirichletCharacter(PrimePower(5, 3), e)(10) == 0 for e in range(100))
    assert abs(quadratic(2) - (-1)) < 1e-15


def test_gauss_sum_examples():
    assert abs(gauss_sum(DirichletCharacter(PrimePower(7, 1), 0)) - (-1)) < 1e-12
    assert abs(gauss_sum(DirichletCharacter(PrimePower(7, 1), 3)) - 1j * math.sqrt(7)) < 1e-12
    for e in (1, 2, 3):
        assert abs(abs(gauss_sum(DirichletCharacter(PrimePower(5, 1), e))) - math.sqrt(5)) < 1e-12


@pytest.mark.parametrize("p", [3, 5, 7])
def test_gauss_sum_twist(p):
    q = p**3
    a = np.arange(q)
    for e in (1, p + 2):
        chi = DirichletCharacter(PrimePower(p, 3), e)
        tau = gauss_sum(chi)
        for n in (1, 2, p + 1, q - 1):
            twisted = np.sum(chi.values(a) * np.exp(2j * np.pi * a * n / q))
            assert abs(twisted - np.conj(chi(n)) * tau) < 1e-9 * math.sqrt(q)


def test_orthogonality_examples():
    chars = enumerate_characters(PrimePower(5, 2))

    def total(m, n):
        return sum(c(m) * np.conj(c(n)) for c in chars)

    assert abs(total(7, 7) - 20) < 1e-12
    assert abs(total(32, 7) - 20) < 1e-12
    assert abs(total(8, 7)) < 1e-12


@pytest.mark.parametrize("p,k", [(3, 1), (3, 2), (3, 3), (3, 4), (3, 5), (5, 3), (7, 2), (11, 2), (13, 2)])
def test_full_character_table_is_unitary(p, k):
    assert full_table_orthogonality(PrimePower(p, k)) < 1e-10


def test_conductor_drop_at_three():
    alpha = DirichletCharacter(PrimePower(3, 3), 1)
    a = postnikov_constant(alpha).a_alpha
    # solve alpha(1 + 9) = e_3(a) directly
    z = alpha(10)
    assert abs(z - cmath.exp(2j * math.pi * a / 3)) < 1e-12
    assert a == min(b for b in range(3) if abs(z - cmath.exp(2j * math.pi * b / 3)) < 1e-9)


def test_product_identities():
    pp = PrimePower(5, 3)
    chi = DirichletCharacter(pp, 7)
    assert product(chi, DirichletCharacter(pp, 0)) == chi
    assert product(chi, chi.conj()).is_principal
    alpha = DirichletCharacter(PrimePower(3, 3), 1)
    psi = DirichletCharacter(PrimePower(3, 2), 1)
    n = np.arange(27)
    assert np.max(np.abs(product(alpha, psi).values(n) - alpha.values(n) * psi.values(n))) < 1e-12


@pytest.mark.parametrize("p", PRIMES)
def test_coset_members_stay_primitive(p):
    for e in (1, 2):
        alpha = DirichletCharacter(PrimePower(p, 3), e)
        assert all(product(alpha, psi).primitive for psi in enumerate_characters(PrimePower(p, 2)))
