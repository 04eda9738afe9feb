import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bessel_series
from twistlab.smooth import (
    SCAN_CELLS,
    BumpFunction,
    DeltaSymbolConfig,
    QuadratureError,
    RegimePoint,
    adaptive_quad,
    bessel_j,
    centred_point,
    composite_gl,
    delta_direct,
    delta_reconstruction,
    dyadic_partition_sum,
    dyadic_piece,
    g_c,
    g_c_grid,
    i_nv_regime_check,
    regime_scan,
    smooth_step,
    stationary_phase,
    stationary_phase_increment,
    w_tilde,
    w_tilde_matrix,
    w_tilde_phase_increment,
)


def test_smooth_step_limits_and_monotone():
    t = np.linspace(-1, 2, 3001)
    s = smooth_step(t)
    assert np.all(s[t <= 0] == 0) and np.all(s[t >= 1] == 1)
    assert np.all(np.diff(s) >= 0)
    assert smooth_step(0.5) == pytest.approx(0.5)


def test_bump_support_range_and_plateau():
    b = BumpFunction(2.0, 5.0)
    x = np.linspace(0, 7, 7001)
    v = b(x)
    assert np.all(v[(x <= 2) | (x >= 5)] == 0)
    assert 0 <= v.min() and v.max() <= 1
    assert b(3.5) == pytest.approx(1.0)
    flat = BumpFunction(0.0, 10.0, plateau=(3.0, 7.0))
    assert np.all(flat(np.linspace(3, 7, 50)) == 1.0)
    with pytest.raises(ValueError):
        BumpFunction(1.0, 1.0)
    with pytest.raises(ValueError):
        BumpFunction(0.0, 1.0, plateau=(0.0, 0.5))


def test_composite_rule_is_exact_on_polynomials():
    x, w = composite_gl(-1.0, 3.0, 5)
    assert np.sum(w * x**20) == pytest.approx((3**21 + 1) / 21, rel=1e-13)


def test_adaptive_quad_on_oscillatory_integrand():
    res = adaptive_quad(lambda x: np.cos(50 * x) * np.exp(-x), 0.0, 4.0, tol=1e-12, max_width=0.05)
    exact = float(mp.quad(lambda t: mp.cos(50 * t) * mp.exp(-t), [0, 4]))
    assert res.converged and abs(res.value - exact) < 1e-11


def test_adaptive_quad_reports_non_convergence():
    res = adaptive_quad(lambda x: np.sin(1e6 * x), 0.0, 1.0, tol=1e-14, cap=2000)
    assert not res.converged


@pytest.mark.parametrize("C", [16, 32, 64])
def test_delta_direct_is_kronecker(C):
    cfg = DeltaSymbolConfig(float(C * C))
    assert cfg.w_sum() == pytest.approx(1.0, abs=1e-14)
    worst = max(abs(delta_direct(n, cfg) - (n == 0)) for n in range(-2 * C * C, 2 * C * C + 1))
    assert worst < 1e-12


def test_delta_reconstruction_from_fourier_side():
    cfg = DeltaSymbolConfig(64.0)
    ns = np.arange(-128, 129)
    rec = delta_reconstruction(ns, cfg)
    assert np.max(np.abs(rec - (ns == 0))) < 1e-9


def test_g_c_adaptive_matches_grid_rule():
    cfg = DeltaSymbolConfig(256.0)
    vs = np.array([0.0, 1e-3, 1e-2, 0.05])
    grid = g_c_grid(vs, 3, cfg)
    for v, gv in zip(vs, grid):
        assert abs(g_c(float(v), 3, cfg).value - gv) < 1e-7 * max(1.0, abs(gv))


@pytest.mark.parametrize("order", [0, 1, 5, 11, 23])
@pytest.mark.parametrize("x", [0.1, 1.0, 5.0, 11.0, 37.5, 80.0])
def test_bessel_against_power_series(order, x):
    assert bessel_j(order, x) == pytest.approx(bessel_series(order, x), abs=1e-14)


def test_bessel_j11_at_5():
    # the high-precision value of J_11(5)
    assert bessel_j(11, 5.0) == pytest.approx(bessel_series(11, 5.0, dps=80), rel=1e-13)


@given(st.integers(1, 29), st.floats(0.01, 1e4))
def test_bessel_recurrence(nu, x):
    lhs = bessel_j(nu - 1, x) + bessel_j(nu + 1, x)
    rhs = 2 * nu / x * bessel_j(nu, x)
    assert abs(lhs - rhs) < 1e-11 * max(1.0, 2 * nu / x)


def test_bessel_domain():
    with pytest.raises(ValueError):
        bessel_j(31, 1.0)
    with pytest.raises(ValueError):
        bessel_j(3, -1.0)


def test_w_tilde_adaptive_matches_matrix():
    vs = np.array([-0.01, 0.0, 0.003])
    mat = w_tilde_matrix(2.0, vs, 400.0, np.array([1.0, 3.0]), 12)
    for i, m in enumerate((1.0, 3.0)):
        for j, v in enumerate(vs):
            assert abs(w_tilde(2.0, float(v), 400.0, m, 12, tol=1e-10).value - mat[i, j]) < 1e-7


@settings(max_examples=300)
@given(st.floats(0.5, 1e8))
def test_dyadic_partition_of_unity(x):
    assert dyadic_partition_sum(np.array([x]))[0] == pytest.approx(1.0, abs=1e-12)


def test_dyadic_piece_support():
    x = np.linspace(0, 3, 3001)
    v = dyadic_piece(x)
    assert np.all(v[(x <= 1) | (x >= 2)] == 0)
    assert np.all(v >= 0)


def test_stationary_point_formula():
    pt = RegimePoint(11, 2, 3, 1, 100, 1331.0, 0.01)
    v0, phase = stationary_phase(pt)
    s = pt.discriminant
    # derivative of -p^2 l v - s/(p^2 c^2 v) vanishes at v0
    assert -pt.p**2 * pt.l + s / (pt.p**2 * pt.c**2 * v0**2) == pytest.approx(0.0, abs=1e-9)
    f = -pt.p**2 * pt.l * v0 - s / (pt.p**2 * pt.c**2 * v0)
    assert f == pytest.approx(phase)
    assert stationary_phase(RegimePoint(11, 2, 3, 1, 200, 1331.0, 0.01)) is None


def test_regime_classes_on_small_scan():
    pts = [centred_point(13, c, l, 1, st) for c, l in SCAN_CELLS[:2] for st in (True, False)]
    rep, results = regime_scan(pts)
    assert rep.passed, rep.summary_lines()
    assert [r.classification for r in results] == ["stationary", "suppressed"] * 2


def test_regime_scan_threads_give_identical_reports():
    pts = [centred_point(11, 1, 1, 1, st) for st in (True, False)]
    a, _ = regime_scan(pts, threads=1)
    b, _ = regime_scan(pts, threads=2)
    assert [c.as_dict() for c in a.checks] == [c.as_dict() for c in b.checks]


def test_non_oscillatory_window_is_below_upper_bound():
    pt = RegimePoint(3, 1, 1, 1, 5, 27.0, 0.01)
    rep, res = i_nv_regime_check(pt, DeltaSymbolConfig(27.0))
    assert res.classification == "non-oscillatory"
    assert rep.passed


@pytest.mark.parametrize("p", [13, 23])
def test_stationary_phase_sign_detector(p):
    # the n-increment of the phase follows e(-2 sqrt(l(p^2 m - n))/c), not the opposite sign
    pt = centred_point(p, 1, 1, 1, True)
    inc = stationary_phase_increment(pt, DeltaSymbolConfig(pt.N))
    assert inc["minus_residual"] < 0.5 < 1.5 < inc["plus_residual"]


@pytest.mark.xfail(strict=True, reason="leading-order phase is off by 0.15 rad at p = 23; lower-order terms are not modelled")
def test_stationary_phase_to_one_hundredth_radian():
    pt = centred_point(23, 1, 1, 1, True)
    inc = stationary_phase_increment(pt, DeltaSymbolConfig(pt.N))
    print(f"phase residual {inc['minus_residual']:.3e} rad")
    assert inc["minus_residual"] < 1e-2


@pytest.mark.parametrize("N", [1e5, 3e5])
def test_w_tilde_phase_follows_stationary_point(N):
    assert w_tilde_phase_increment(1.0, N, 1.0) < 1e-2


@pytest.mark.xfail(strict=True, reason="at m = 2 the delta weight g_c has decayed at v0 and the magnitude model overshoots by 12-35x")
def test_stationary_magnitude_at_m_equal_two():
    pts = [centred_point(11, c, l, 2, True) for c, l in SCAN_CELLS]
    rep, results = regime_scan(pts)
    ratios = [abs(r.value) / r.model for r in results]
    print("m=2 ratios", ratios)
    assert all(0.1 <= x <= 10 for x in ratios)


def test_quadrature_error_type():
    assert issubclass(QuadratureError, RuntimeError)


def test_derivative_constants_are_scale_free():
    small = BumpFunction(1.0, 2.0).derivative_constants()
    large = BumpFunction(1000.0, 2000.0).derivative_constants()
    assert len(small) == 4
    assert np.allclose(small, large, rtol=1e-6)
    assert all(0 < c < 1e6 for c in small)


def test_delta_config_normalization():
    for N in (64.0, 1000.0, 4096.0):
        cfg = DeltaSymbolConfig(N)
        assert abs(cfg.w_sum() - 1.0) < 1e-12
        assert float(cfg.f(0.0)) == 1.0


def test_delta_direct_examples():
    cfg = DeltaSymbolConfig(100.0)
    assert delta_direct(0, cfg) == pytest.approx(1.0, abs=1e-14)
    assert abs(delta_direct(12, cfg)) < 1e-14
    assert delta_direct(101, cfg) == 0.0


def test_g_c_at_zero_is_near_one_for_small_c():
    cfg = DeltaSymbolConfig(32.0**2)
    small = [g_c(0.0, c, cfg).value for c in range(1, 7)]
    assert max(abs(v - 1) for v in small) < 0.15
    # the approximation degrades as c approaches 2C
    assert abs(g_c(0.0, 62, cfg).value - 1) > 0.5


@pytest.mark.parametrize("c", [1, 4, 16, 40])
def test_g_c_decays_past_fifty(c):
    cfg = DeltaSymbolConfig(32.0**2)
    vs = np.array([50, 80, 150, 400]) / (c * cfg.C)
    assert np.all(np.abs(g_c_grid(vs, c, cfg)) < 1e-6)


def test_fourier_side_reconstructs_delta_c_f():
    from twistlab.moments import _numeric_delta_transforms
    from twistlab.smooth import delta_c_times_f

    cfg = DeltaSymbolConfig(256.0)
    u = np.linspace(-500, 500, 20).round() / 2
    back = _numeric_delta_transforms(cfg, u, vcut=1e9)
    for c in (1, 3, 7):
        assert np.max(np.abs(back[c] - delta_c_times_f(u, c, cfg))) < 1e-6


def test_bessel_at_zero():
    assert bessel_j(0, 0.0) == 1.0 and bessel_j(11, 0.0) == 0.0


def test_w_tilde_within_trivial_bound():
    for v in (0.0, 1e-3, -5e-3):
        val = abs(w_tilde(1.0, v, 1000.0, 2.0, 12).value)
        assert val <= 2 * np.pi * 1000.0 * 1.0


def test_w_tilde_leading_bessel_term():
    # with sqrt(mN)/c = 0.05 only the first series term of J_11 matters
    N, m, c = 400.0, 1.0, 400.0
    x, w = composite_gl(N, 2 * N, 64)
    lead = 2 * np.pi * (2 * np.pi) ** 11 / math.factorial(11) * np.sum(w * BumpFunction(N, 2 * N)(x) * (m * x) ** 5.5) / c**11
    assert abs(w_tilde(c, 0.0, N, m, 12).value) == pytest.approx(lead, rel=0.03)


@pytest.mark.xfail(strict=True, reason="the bare power model lacks the constant (2 pi)^11/11! of J_11 and sits 160-530x below")
def test_w_tilde_bare_power_model_within_factor_ten():
    ratios = []
    for c, N in ((40.0, 100.0), (100.0, 400.0), (20.0, 100.0)):
        T = math.sqrt(N) / c
        ratios.append(abs(w_tilde(c, 0.0, N, 1.0, 12).value) / (T**11 * N))
    print("ratios to (sqrt(mN)/c)^(k-1) N:", ratios)
    assert all(0.1 <= r <= 10 for r in ratios)


def test_w_tilde_negligible_off_resonance():
    N, m, c = 1e4, 1.0, 1.0
    v0 = math.sqrt(m / (1.5 * N)) / c
    trivial = 2 * np.pi * N
    assert abs(w_tilde(c, v0, N, m, 12).value) / trivial > 1e-4
    for factor in (0.1, 3.0, 10.0):
        assert abs(w_tilde(c, factor * v0, N, m, 12).value) / trivial < 1e-4
