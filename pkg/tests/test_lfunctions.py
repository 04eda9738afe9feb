import math

import mpmath as mp
import numpy as np
import pytest

from oracles import V_gamma, central_values
from twistlab.characters import DirichletCharacter, enumerate_characters
from twistlab.cusp_form import generate_coefficients
from twistlab.lfunctions import (
    AfeConfig,
    TwistedLSeries,
    central_value_parts,
    coset_family,
    cutoff_length,
    cutoff_V,
    family_parts,
    family_values,
    kernel_G,
    required_length,
    root_number,
    x_invariance_check,
)
from twistlab.residue import PrimePower


def test_gamma_kernel_is_incomplete_gamma():
    ys = np.geomspace(1e-4, 9.0, 60)
    got = cutoff_V(ys, 12, "gamma")
    want = np.array([V_gamma(y) for y in ys])
    assert np.max(np.abs(got - want)) < 1e-11


@pytest.mark.parametrize("kernel", ["exp_square", "cos16"])
@pytest.mark.parametrize("y", [0.3, 1.0, 4.0, 30.0])
def test_other_kernels_against_contour_quadrature(kernel, y):
    def G(s):
        return mp.exp(s * s) if kernel == "exp_square" else mp.cos(mp.pi * s / 8) ** -16

    def f(t):
        s = 2 + 1j * t
        return mp.gamma(s + 6) / mp.gamma(6) * (2 * mp.pi) ** (-s) * G(s) * mp.mpf(y) ** (-s) / s

    want = float(mp.re(mp.quad(f, [-mp.inf, -10, 0, 10, mp.inf])) / (2 * mp.pi))
    assert float(cutoff_V(y, 12, kernel)[0]) == pytest.approx(want, abs=1e-9)


def test_kernels_are_even_and_normalized():
    s = np.array([0.3 + 0.7j, 1.1 - 2j])
    for kernel in ("gamma", "exp_square", "cos16"):
        assert np.allclose(kernel_G(s, kernel), kernel_G(-s, kernel))
        assert kernel_G(np.array([0j]), kernel)[0] == 1


def test_V_tends_to_one_and_decays():
    assert cutoff_V(1e-6)[0] == pytest.approx(1.0, abs=1e-12)
    assert abs(cutoff_V(8.0)[0]) < 1e-12
    assert cutoff_length(12, "gamma", 1e-10) < 8.0


@pytest.mark.parametrize("p", [3, 5])
def test_family_matches_independent_oracle(coeffs, p):
    alpha = DirichletCharacter(PrimePower(p, 3), 1)
    got = family_values(coeffs, alpha)
    want = central_values(p, [1 + p * j for j in range(p * (p - 1))])
    assert np.max(np.abs(got - np.array(want))) < 1e-9 * max(1.0, np.max(np.abs(want)))


def test_bucketed_family_matches_direct_evaluation(coeffs):
    alpha = DirichletCharacter(PrimePower(7, 3), 3)
    cfg = AfeConfig(X=2.0)
    fast = family_parts(coeffs, coset_family(alpha), cfg)
    for chi, part in zip(coset_family(alpha), fast):
        slow = central_value_parts(TwistedLSeries(coeffs, chi), cfg)
        assert abs(slow.value - part.value) < 1e-10 * max(1.0, abs(slow.value))


def test_root_number_has_modulus_one(coeffs):
    for chi in enumerate_characters(PrimePower(5, 3)):
        if chi.primitive:
            assert abs(abs(root_number(TwistedLSeries(coeffs, chi))) - 1) < 1e-12


def test_no_primitive_character_mod_p_cubed_is_real():
    for p in (3, 5, 7, 11, 13):
        pp = PrimePower(p, 3)
        real = [chi for chi in enumerate_characters(pp) if (2 * chi.exponent) % pp.phi == 0]
        assert real and not any(chi.primitive for chi in real)


@pytest.mark.parametrize("p", [3, 5])
def test_x_invariance_and_wrong_root_number_detector(coeffs, p):
    alpha = DirichletCharacter(PrimePower(p, 3), 1)
    assert x_invariance_check(coeffs, alpha).passed
    wrong = x_invariance_check(coeffs, alpha, epsilon_sign=-1)
    assert wrong.checks[0].measured > 0.1


def test_x_invariance_with_a_growing_kernel(coeffs):
    alpha = DirichletCharacter(PrimePower(3, 3), 2)
    # this V decays polynomially, so the cutoff threshold is relaxed to keep the sums short
    assert x_invariance_check(coeffs, alpha, kernel="cos16", threshold=1e-6).passed


def test_required_length_and_short_cache():
    cfg = AfeConfig(X=2.0)
    need = required_length(125, cfg)
    assert need == math.ceil(cutoff_length(12, "gamma", 1e-10) * 125 * 2)
    short = generate_coefficients(need // 2)
    with pytest.raises(IndexError):
        family_parts(short, coset_family(DirichletCharacter(PrimePower(5, 3), 1)), cfg)


def test_validation(coeffs):
    with pytest.raises(ValueError):
        TwistedLSeries(coeffs, DirichletCharacter(PrimePower(5, 3), 5))
    with pytest.raises(ValueError):
        AfeConfig(X=5.0)
    with pytest.raises(ValueError):
        AfeConfig(kernel="sinc")
    with pytest.raises(ValueError):
        cutoff_V(0.0)


def test_V_examples_and_two_discretizations():
    assert cutoff_V(1e-6)[0] == pytest.approx(1.0, abs=1e-4)
    fine = cutoff_V(1.0, 12, "gamma", height=60.0, step=0.025)[0]
    assert cutoff_V(1.0)[0] == pytest.approx(fine, abs=1e-6)
    assert cutoff_V(1.0)[0] == pytest.approx(V_gamma(1.0), abs=1e-12)


def test_V_decays_past_sqrt_q_inf():
    from twistlab.lfunctions import analytic_conductor_scale

    y0 = math.sqrt(analytic_conductor_scale(12))
    ys = np.linspace(0.1, y0, 200)
    v = cutoff_V(ys)
    big = v > 1e-14
    assert np.all(np.diff(v[big]) < 0)
    # past sqrt(q_inf) only quadrature noise is left
    assert np.max(np.abs(cutoff_V(np.linspace(y0, 10 * y0, 50)))) < 1e-16


def test_root_number_of_conjugate(coeffs):
    for chi in enumerate_characters(PrimePower(3, 3)):
        if chi.primitive:
            e1 = root_number(TwistedLSeries(coeffs, chi))
            e2 = root_number(TwistedLSeries(coeffs, chi.conj()))
            assert abs(e2 - np.conj(e1)) < 1e-12


def test_conjugate_character_gives_same_abs_value(coeffs):
    alpha = DirichletCharacter(PrimePower(5, 3), 1)
    for chi in coset_family(alpha)[:6]:
        a = central_value_parts(TwistedLSeries(coeffs, chi), AfeConfig()).value
        b = central_value_parts(TwistedLSeries(coeffs, chi.conj()), AfeConfig()).value
        assert abs(abs(a) - abs(b)) < 1e-9 * max(1.0, abs(a))


def test_cutoff_threshold_sanity(coeffs):
    alpha = DirichletCharacter(PrimePower(5, 3), 1)
    chars = coset_family(alpha)
    a = [p.value for p in family_parts(coeffs, chars, AfeConfig(threshold=1e-10))]
    b = [p.value for p in family_parts(coeffs, chars, AfeConfig(threshold=1e-12))]
    assert max(abs(x - y) / max(abs(y), 1e-300) for x, y in zip(a, b)) < 1e-6


def test_linearity_in_coefficients(coeffs):
    alpha = DirichletCharacter(PrimePower(3, 3), 1)
    chars = coset_family(alpha)
    one = family_parts(coeffs, chars, AfeConfig())
    two = family_parts(coeffs, chars, AfeConfig(), coeff_scale=2.0)
    for x, y in zip(one, two):
        assert y.first == 2 * x.first and y.dual == 2 * x.dual


@pytest.mark.parametrize("p", [7])
def test_x_invariance_at_seven(coeffs, p):
    assert x_invariance_check(coeffs, DirichletCharacter(PrimePower(p, 3), 2)).passed
