"""Smooth weights, the delta symbol, Bessel transforms and oscillatory quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .report import VerificationReport

# "<< p^eps" and "negligible" as concrete numbers
SMALL_POWER = 8.0
NEGLIGIBLE = 1e-3


def _phi(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t: np.ndarray | float) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)
    a = _phi(t)
    b = _phi(1.0 - t)
    return a / (a + b)


@dataclass(frozen=True)
class BumpFunction:
    """Smooth map into [0, 1] vanishing off [a, b].

    Without a plateau the profile is exp(1 - 1/(1 - t^2)) on the centred
    variable t in (-1, 1). With a plateau [pa, pb] the value is 1 there and the
    two flanks are smooth steps.
    """

    a: float
    b: float
    plateau: tuple[float, float] | None = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.b > self.a:
            raise ValueError("empty support")
        if self.plateau is not None:
            pa, pb = self.plateau
            if not (self.a < pa <= pb < self.b):
                raise ValueError("plateau must sit strictly inside the support")

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.plateau is None:
            t = (2.0 * x - self.a - self.b) / (self.b - self.a)
            out = np.zeros_like(x)
            inside = np.abs(t) < 1.0
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
        else:
            pa, pb = self.plateau
            left = smooth_step((x - self.a) / (pa - self.a))
            right = smooth_step((self.b - x) / (self.b - pb))
            out = left * right
        return self.scale * out

    @property
    def length(self) -> float:
        return self.b - self.a

    def derivative_constants(self, order: int = 4, samples: int = 20001) -> list[float]:
        """max |f^(j)| (b - a)^j for j = 1..order from dense finite differences."""
        x = np.linspace(self.a, self.b, samples)
        h = x[1] - x[0]
        y = self(x)
        out = []
        for _ in range(order):
            y = np.gradient(y, h)
            out.append(float(np.max(np.abs(y))) * self.length ** (len(out) + 1))
        return out


def bump(a: float, b: float) -> BumpFunction:
    return BumpFunction(a, b)


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    abs_error_estimate: float
    evaluations: int
    converged: bool = True


class QuadratureError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def adaptive_quad(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float,
    max_width: float | None = None,
    cap: int = 10_000_000,
    breakpoints: tuple[float, ...] = (),
) -> QuadratureResult:
    """Adaptive bisection with a Gauss-Legendre 15/31 pair per panel.

    ``max_width`` caps the initial panel width, e.g. at a quarter of the local
    oscillation wavelength. Panels are processed level by level with one
    vectorized call to ``func`` per level.
    """
    x15, w15 = _gl(15)
    x31, w31 = _gl(31)
    edges = sorted({a, b, *[t for t in breakpoints if a < t < b]})
    panels = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        pieces = 1 if not max_width else max(1, int(math.ceil((hi - lo) / max_width)))
        cuts = np.linspace(lo, hi, pieces + 1)
        panels.extend(zip(cuts[:-1], cuts[1:]))
    total_len = b - a
    value = 0.0 + 0.0j
    err_total = 0.0
    evals = 0
    pending = np.array(panels, dtype=float).reshape(-1, 2)
    while len(pending):
        lo, hi = pending[:, 0:1], pending[:, 1:2]
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        nodes = np.concatenate([mid + half * x15, mid + half * x31], axis=1)
        vals = np.asarray(func(nodes.ravel())).reshape(nodes.shape)
        evals += nodes.size
        i15 = (vals[:, :15] * w15).sum(axis=1) * half[:, 0]
        i31 = (vals[:, 15:] * w31).sum(axis=1) * half[:, 0]
        err = np.abs(i31 - i15)
        allowed = tol * (2 * half[:, 0]) / total_len
        ok = err <= allowed
        value += complex(np.sum(i31[ok]))
        err_total += float(np.sum(err[ok]))
        rest = pending[~ok]
        if evals > cap:
            value += complex(np.sum(i31[~ok]))
            err_total += float(np.sum(err[~ok]))
            return QuadratureResult(value, err_total, evals, converged=False)
        if len(rest):
            m = (rest[:, 0] + rest[:, 1]) / 2
            pending = np.concatenate([np.stack([rest[:, 0], m], 1), np.stack([m, rest[:, 1]], 1)])
        else:
            pending = rest
    return QuadratureResult(value, err_total, evals)


def composite_gl(a: float, b: float, panels: int, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    x, w = _gl(order)
    cuts = np.linspace(a, b, panels + 1)
    mid = (cuts[:-1] + cuts[1:])[:, None] / 2
    half = (cuts[1:] - cuts[:-1])[:, None] / 2
    return (mid + half * x).ravel(), (half * w).ravel()


# ---------------------------------------------------------------------------
# delta symbol


@dataclass(frozen=True)
class DeltaSymbolConfig:
    """Weights (w, f) at scale N with C = sqrt(N).

    w is a bump on [C, 2C] rescaled so that its values at the integers sum to
    one; f is 1 on [-N, N] and rolls off smoothly to 0 at +-2N.
    """

    N: float

    @cached_property
    def C(self) -> float:
        return math.sqrt(self.N)

    @cached_property
    def w(self) -> BumpFunction:
        raw = BumpFunction(self.C, 2 * self.C)
        q = np.arange(1, int(2 * self.C) + 2)
        total = math.fsum(raw(q).tolist())
        return BumpFunction(self.C, 2 * self.C, scale=1.0 / total)

    @cached_property
    def f(self) -> BumpFunction:
        return BumpFunction(-2 * self.N, 2 * self.N, plateau=(-self.N, self.N))

    @property
    def c_max(self) -> int:
        return int(math.floor(2 * self.C))

    def w_sum(self) -> float:
        q = np.arange(1, int(2 * self.C) + 2)
        return math.fsum(self.w(q).tolist())


def delta_direct(n: int, cfg: DeltaSymbolConfig) -> float:
    """sum over q | n of w(q) - w(|n|/q); sum_q w(q) at n = 0."""
    if n == 0:
        return cfg.w_sum()
    m = abs(n)
    divs = [d for d in range(1, math.isqrt(m) + 1) if m % d == 0]
    divs = sorted(set(divs + [m // d for d in divs]))
    d = np.array(divs, dtype=float)
    return math.fsum(cfg.w(d).tolist()) - math.fsum(cfg.w(m / d).tolist())


def delta_c(u: np.ndarray | float, c: int, cfg: DeltaSymbolConfig) -> np.ndarray:
    """Delta_c(u) = sum_r (1/(cr)) (w(cr) - w(|u|/(cr))), r <= 2C/c, exact for |u| <= 2N."""
    u = np.abs(np.asarray(u, dtype=float))
    rmax = int(math.floor(2 * cfg.C / c))
    out = np.zeros_like(u)
    for r in range(1, rmax + 1):
        cr = c * r
        out += (float(cfg.w(np.array(float(cr)))) - cfg.w(u / cr)) / cr
    return out


def delta_c_times_f(u: np.ndarray, c: int, cfg: DeltaSymbolConfig) -> np.ndarray:
    return delta_c(u, c, cfg) * cfg.f(u)


def g_c(v: float, c: int, cfg: DeltaSymbolConfig, tol: float = 1e-8) -> QuadratureResult:
    """Fourier transform of Delta_c f at v by adaptive quadrature (real by evenness)."""
    two_n = 2 * cfg.N

    def integrand(u: np.ndarray) -> np.ndarray:
        return 2.0 * delta_c_times_f(u, c, cfg) * np.cos(2 * np.pi * u * v)

    width = two_n / 64
    if v != 0:
        width = min(width, 0.25 / abs(v))
    res = adaptive_quad(integrand, 0.0, two_n, tol=tol, max_width=width, breakpoints=(cfg.N,))
    if not res.converged:
        raise QuadratureError(f"g_c quadrature did not converge after {res.evaluations} evaluations")
    return QuadratureResult(res.value.real, res.abs_error_estimate, res.evaluations)


def g_c_grid(vs: np.ndarray, c: int, cfg: DeltaSymbolConfig, panels: int | None = None) -> np.ndarray:
    """g_c at many v through one composite Gauss-Legendre rule in u."""
    vs = np.asarray(vs, dtype=float)
    vmax = float(np.max(np.abs(vs))) if vs.size else 0.0
    two_n = 2 * cfg.N
    if panels is None:
        panels = int(max(128, 4 * two_n * vmax + 64))
    x, wts = composite_gl(0.0, two_n, panels)
    d = 2.0 * delta_c_times_f(x, c, cfg) * wts
    out = np.empty(vs.shape)
    flat = vs.ravel()
    for start in range(0, flat.size, 256):
        chunk = flat[start : start + 256]
        out.ravel()[start : start + 256] = np.cos(2 * np.pi * np.outer(chunk, x)) @ d
    return out


def delta_reconstruction(
    ns: np.ndarray, cfg: DeltaSymbolConfig, periods: int = 2
) -> np.ndarray:
    """sum over c <= 2C of S(0,n;c) times the numerical integral of g_c(v) e(nv) dv.

    The v-integral is a trapezoid rule with spacing 1/L, L = periods * 4N; g_c
    on that grid is itself a trapezoid rule in u with unit spacing over
    [-2N, 2N]. Both rules are evaluated through FFTs.
    """
    from .expsums import ramanujan_sum

    ns = np.asarray(ns, dtype=np.int64)
    two_n = int(math.ceil(2 * cfg.N))
    L = periods * 2 * two_n
    out = np.zeros(ns.shape)
    for c in range(1, cfg.c_max + 1):
        u = np.arange(-L // 2, L // 2)
        samples = delta_c_times_f(u.astype(float), c, cfg)
        # g_c(j/L) = sum_u D(u) e(-u j / L)   (trapezoid, unit spacing)
        g = np.fft.fft(np.fft.ifftshift(samples))
        # int g_c(v) e(nv) dv ~ (1/L) sum_j g_c(j/L) e(n j / L)
        back = np.fft.fftshift(np.fft.ifft(g)).real
        vals = back[ns + L // 2]
        ram = np.array([ramanujan_sum(int(n), c).value.real for n in ns])
        out += ram * vals
    return out


# ---------------------------------------------------------------------------
# Bessel functions and integral transforms


def bessel_j(order: int, x: np.ndarray | float) -> np.ndarray:
    if order < 0 or order > 30:
        raise ValueError("order must lie in 0..30")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1e6):
        raise ValueError("argument must lie in [0, 1e6]")
    return special.jv(order, x)


def w_tilde(
    c: float,
    v: float,
    N: float,
    m: float,
    k: int,
    weight: BumpFunction | None = None,
    tol: float | None = None,
) -> QuadratureResult:
    """2 pi i^k times the integral of J_{k-1}(4 pi sqrt(m x)/c) e(x v) w_N(x) dx."""
    wN = weight or BumpFunction(N, 2 * N)
    tol = 1e-6 * N if tol is None else tol

    def integrand(x: np.ndarray) -> np.ndarray:
        return bessel_j(k - 1, 4 * np.pi * np.sqrt(m * x) / c) * np.exp(2j * np.pi * x * v) * wN(x)

    # local frequency of the phase in x: |v| + sqrt(m / x) / c
    freq = abs(v) + math.sqrt(m / wN.a) / c
    width = wN.length / 16 if freq == 0 else min(wN.length / 16, 0.25 / freq)
    res = adaptive_quad(integrand, wN.a, wN.b, tol=tol, max_width=width)
    if not res.converged:
        raise QuadratureError(f"w_tilde quadrature did not converge after {res.evaluations} evaluations")
    return QuadratureResult(2 * np.pi * (1j**k) * res.value, 2 * np.pi * res.abs_error_estimate, res.evaluations)


def w_tilde_matrix(
    c: float, vs: np.ndarray, N: float, ms: np.ndarray, k: int, nodes: int | None = None
) -> np.ndarray:
    """w_tilde(c, v, N, m) on a (len(ms), len(vs)) grid through one composite rule."""
    wN = BumpFunction(N, 2 * N)
    vs = np.asarray(vs, dtype=float)
    ms = np.asarray(ms, dtype=float)
    freq = (np.max(np.abs(vs)) if vs.size else 0.0) + math.sqrt(float(np.max(ms)) / N) / c
    panels = nodes or int(max(32, 2 * N * freq + 32))
    x, wts = composite_gl(N, 2 * N, panels)
    J = bessel_j(k - 1, 4 * np.pi * np.sqrt(np.outer(ms, x)) / c) * (wN(x) * wts)
    E = np.exp(2j * np.pi * np.outer(x, vs))
    return 2 * np.pi * (1j**k) * (J @ E)


# ---------------------------------------------------------------------------
# dyadic partition of unity


def dyadic_piece(x: np.ndarray | float) -> np.ndarray:
    """g with sum_k g(2^(-k/2) x) = 1 on x > 0, supported on (1, 2).

    In the variable s = 2 log2 x the piece is H(s) - H(s - 1) for a smooth step
    H, so the sum over k telescopes.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    s = 2 * np.log2(x[pos])
    out[pos] = smooth_step(s) - smooth_step(s - 1)
    return out


def dyadic_partition_sum(x: np.ndarray) -> np.ndarray:
    """The partition sum from k = -4 upward, which is 1 for x >= 1/2."""
    x = np.asarray(x, dtype=float)
    kmax = int(math.ceil(2 * math.log2(max(float(np.max(x)), 2.0)))) + 2
    total = np.zeros_like(x)
    for k in range(-4, kmax + 1):
        total += dyadic_piece(2.0 ** (-k / 2) * x)
    return total


# ---------------------------------------------------------------------------
# I_{N,V}: stationary-phase regime checks


@dataclass(frozen=True)
class RegimePoint:
    p: int
    c: int
    l: int
    m: int
    n: int
    N: float
    V: float
    k: int = 12

    @property
    def discriminant(self) -> int:
        """p^2 m - n, whose sign decides whether a stationary point exists."""
        return self.p * self.p * self.m - self.n


@dataclass(frozen=True)
class RegimeResult:
    point: RegimePoint
    value: complex
    absolute_integral: float
    trivial: float
    model: float
    classification: str
    detail: dict = field(default_factory=dict)


def i_nv(point: RegimePoint, cfg: DeltaSymbolConfig, v_nodes: int = 600, x_panels: int | None = None) -> tuple[complex, float]:
    """I_{N,V} over the dyadic window v in [V, 2V] and the integral of its absolute integrand."""
    p, c, l, m, n, N, V, k = (point.p, point.c, point.l, point.m, point.n, point.N, point.V, point.k)
    lo, hi = sorted((V, 2 * V))
    vs, vw = composite_gl(lo, hi, max(8, v_nodes // 16))
    window = dyadic_piece(vs / V)
    g = g_c_grid(vs, c, cfg)
    wm = w_tilde_matrix(c, vs, N, np.array([m]), k, nodes=x_panels)[0]
    wn = w_tilde_matrix(p * c, -vs, N, np.array([n]), k, nodes=x_panels)[0]
    integrand = g * np.exp(-2j * np.pi * p * p * l * vs) * wm * wn * window
    return complex(np.sum(integrand * vw)), float(np.sum(np.abs(integrand) * vw))


def stationary_phase(point: RegimePoint) -> tuple[float, float] | None:
    """(v0, phase) for the v-integral when p^2 m - n > 0.

    The combined phase is -p^2 l v - (p^2 m - n)/(p^2 c^2 v); it is stationary
    at v0 = sqrt(p^2 m - n)/(p^2 c sqrt(l)) where it equals -2 sqrt(l (p^2 m - n))/c.
    """
    s = point.discriminant
    if s <= 0:
        return None
    p, c, l = point.p, point.c, point.l
    v0 = math.sqrt(s) / (p * p * c * math.sqrt(l))
    return v0, -2.0 * math.sqrt(l * s) / c


def i_nv_regime_check(point: RegimePoint, cfg: DeltaSymbolConfig, **kw) -> tuple[VerificationReport, RegimeResult]:
    """Classify the point and test the size the stationary-phase analysis predicts for its regime.

    Non-oscillatory windows are held to the upper bound N^2 V only: the
    Bessel factors (sqrt(mN)/c)^(k-1) are far below one there.
    """
    value, absolute = i_nv(point, cfg, **kw)
    N, V = point.N, abs(point.V)
    size = N * V
    trivial = SMALL_POWER * N
    model = N / size**1.5
    rep = VerificationReport(f"I_NV regime p={point.p} c={point.c} l={point.l} m={point.m} n={point.n}")
    rep.add("trivial-bound", "I_NV << N p^eps", abs(value) / trivial, 1.0)
    oscillatory = size > SMALL_POWER
    sp = stationary_phase(point)
    if not oscillatory:
        cls = "non-oscillatory"
        rep.add("non-oscillatory-size", "I_NV << N^2 V", abs(value) / (N * N * V), 10.0)
    elif point.discriminant <= 0:
        cls = "suppressed"
        rep.add(
            "suppression",
            "I_NV small unless p^2 m - n > 0",
            abs(value) / trivial,
            NEGLIGIBLE,
            cancellation=abs(value) / absolute if absolute else 0.0,
        )
    else:
        cls = "stationary"
        ratio = abs(value) / model
        rep.add("stationary-magnitude", "|I_NV| ~ N / (N V)^(3/2)", ratio, 10.0, passed=0.1 <= ratio <= 10.0)
    result = RegimeResult(point, value, absolute, trivial, model, cls, {"stationary": sp})
    return rep, result


def centred_point(p: int, c: int, l: int, m: int, stationary: bool, k: int = 12) -> RegimePoint:
    """A point at the centre of its dyadic box with N = p^3.

    v0 puts the m-side stationary point x0 = m/(c v0)^2 at 1.5 N, the window
    [V, 2V] has v0 at its midpoint sqrt(2) V, and n is chosen so that the
    v-phase is stationary at v0 (or, mirrored, has no stationary point).
    """
    N = float(p**3)
    v0 = math.sqrt(m / (1.5 * N)) / c
    disc = max(1, round(p**4 * c * c * l * v0 * v0))
    n = p * p * m - disc if stationary else p * p * m + disc
    return RegimePoint(p, c, l, m, n, N, v0 / math.sqrt(2), k)


SCAN_PRIMES = (11, 13, 17, 19, 23)
SCAN_CELLS = ((1, 1), (1, 2), (1, 3), (2, 1), (2, 2))


def regime_scan_points(primes=SCAN_PRIMES, cells=SCAN_CELLS, m: int = 1) -> list[RegimePoint]:
    return [centred_point(p, c, l, m, st) for p in primes for c, l in cells for st in (True, False)]


def regime_scan(points: list[RegimePoint], threads: int = 1) -> tuple[VerificationReport, list[RegimeResult]]:
    """Run the regime check over many points; reports merge in input order."""
    from concurrent.futures import ThreadPoolExecutor

    def one(pt: RegimePoint):
        return i_nv_regime_check(pt, DeltaSymbolConfig(pt.N))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            outs = list(pool.map(one, points))
    else:
        outs = [one(pt) for pt in points]
    rep = VerificationReport(f"I_NV regime scan ({len(points)} points)")
    results = []
    for sub, res in outs:
        for chk in sub.checks:
            chk.name = f"{chk.name} p={res.point.p} c={res.point.c} l={res.point.l} n={res.point.n}"
        rep.extend(sub)
        results.append(res)
    return rep, results


def stationary_phase_increment(point: RegimePoint, cfg: DeltaSymbolConfig, v_nodes: int = 1200) -> dict:
    """Phase of I(n - 1)/I(n) against the closed phase -+ 2 sqrt(l (p^2 m - n))/c, both signs."""
    nxt = RegimePoint(point.p, point.c, point.l, point.m, point.n - 1, point.N, point.V, point.k)
    a, _ = i_nv(point, cfg, v_nodes=v_nodes)
    b, _ = i_nv(nxt, cfg, v_nodes=v_nodes)
    measured = math.atan2((b / a).imag, (b / a).real)
    s0, s1 = point.discriminant, nxt.discriminant
    step = 2 * math.pi * 2 * math.sqrt(point.l) * (math.sqrt(s1) - math.sqrt(s0)) / point.c

    def wrap(x: float) -> float:
        return (x + math.pi) % (2 * math.pi) - math.pi

    return {"measured": measured, "minus_residual": abs(wrap(measured + step)), "plus_residual": abs(wrap(measured - step))}


def w_tilde_phase_increment(c: float, N: float, m: float, k: int = 12) -> float:
    """|arg w~(v2)/w~(v1) - 2 pi m/c^2 (1/v1 - 1/v2)| with x0 = m/(c v)^2 at 1.3 N and 1.7 N."""
    v1 = math.sqrt(m / (1.3 * N)) / c
    v2 = math.sqrt(m / (1.7 * N)) / c
    ratio = w_tilde(c, v2, N, m, k).value / w_tilde(c, v1, N, m, k).value
    measured = math.atan2(ratio.imag, ratio.real)
    predicted = -2 * math.pi * m / c**2 * (1 / v2 - 1 / v1)
    return abs((measured - predicted + math.pi) % (2 * math.pi) - math.pi)


def export_regime_csv(path, results: list[RegimeResult]) -> None:
    from .report import write_csv

    rows = [
        (r.point.p, r.point.c, r.point.l, r.point.m, r.point.n, r.point.N, r.point.V, abs(r.value), r.absolute_integral, r.model, r.classification)
        for r in results
    ]
    write_csv(path, ["p", "c", "l", "m", "n", "N", "V", "abs_I", "abs_integrand", "model", "classification"], rows)
