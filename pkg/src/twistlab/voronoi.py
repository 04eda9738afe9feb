"""Numerical verification of classical and e_p(r mbar)-twisted Voronoi summation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np

from .characters import e_frac
from .cusp_form import HeckeCoefficients, divisor_counts
from .expsums import csum, kl3_family
from .report import VerificationReport, write_csv
from .smooth import BumpFunction, bessel_j, composite_gl


@dataclass(frozen=True)
class VoronoiCase:
    k: int
    c: int
    a: int
    g: BumpFunction
    p: int | None = None
    r: int | None = None

    def __post_init__(self) -> None:
        if gcd(self.a, self.c) != 1:
            raise ValueError("a must be a unit mod c")
        if (self.p is None) != (self.r is None):
            raise ValueError("twist needs both p and r")
        if self.p is not None:
            if gcd(self.c, self.p) != 1 or self.r % self.p == 0:
                raise ValueError("twist requires gcd(c, p) = 1 and p not dividing r")

    @property
    def d(self) -> int:
        return pow(self.a, -1, self.c) if self.c > 1 else 0

    @property
    def twisted(self) -> bool:
        return self.p is not None


def hankel_transform(ys: np.ndarray, modulus: float, g: BumpFunction, k: int, panels: int | None = None) -> np.ndarray:
    """2 pi i^k times the integral of g(x) J_{k-1}(4 pi sqrt(x y)/modulus) dx for each y."""
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        return np.zeros(0, dtype=complex)
    ymax = float(np.max(ys))
    # cycles of the Bessel phase across the support
    cycles = 2 * math.sqrt(ymax) * (math.sqrt(g.b) - math.sqrt(g.a)) / modulus
    panels = panels or int(2 * cycles + 24)
    x, w = composite_gl(g.a, g.b, panels)
    gw = g(x) * w
    out = np.empty(ys.size)
    step = max(1, 4_000_000 // x.size)
    for s in range(0, ys.size, step):
        y = ys[s : s + step]
        out[s : s + step] = bessel_j(k - 1, 4 * np.pi * np.sqrt(np.outer(y, x)) / modulus) @ gw
    return 2 * np.pi * (1j**k) * out


def transform_H(n: np.ndarray, case: VoronoiCase) -> np.ndarray:
    return hankel_transform(np.atleast_1d(n), case.c, case.g, case.k)


def transform_H1(y: np.ndarray, case: VoronoiCase) -> np.ndarray:
    if not case.twisted:
        raise ValueError("H1 needs the twist prime")
    return hankel_transform(np.atleast_1d(y), case.p * case.c, case.g, case.k)


@dataclass(frozen=True)
class DualTerms:
    """Hankel transform values for n = 1..length with the tail estimate used to cut there."""

    values: np.ndarray
    length: int
    tail_bound: float


def dual_transform(
    modulus: float, g: BumpFunction, k: int, tail_target: float, d: np.ndarray, cap: int
) -> DualTerms:
    """H(n) for n = 1, 2, ... until the trivial tail bound falls below ``tail_target``.

    The envelope of |H| is sampled at 16 log-spaced points of each trial range;
    the tail bound sums d(n) times the envelope over the next doubling of the
    range, which dominates the remaining terms once |H| decays faster than 1/n^2.
    """
    length = 64
    while True:
        length = min(length, cap)
        probe = np.unique(np.geomspace(length, 2 * length, 16).astype(int))
        env = np.abs(hankel_transform(probe, modulus, g, k))
        dmax = float(np.max(d[length : min(2 * length, d.size - 1) + 1])) if 2 * length < d.size else float(np.log2(2 * length) ** 2)
        tail = float(np.max(env)) * dmax * length * 2
        if tail < tail_target or length >= cap:
            values = hankel_transform(np.arange(1, length + 1), modulus, g, k)
            return DualTerms(values, length, tail)
        length *= 2


def classical_sides(case: VoronoiCase, coeffs: HeckeCoefficients, rel_tol: float = 1e-5) -> dict:
    lam = coeffs.lam
    m = np.arange(math.ceil(case.g.a), math.floor(case.g.b) + 1)
    gm = case.g(m.astype(float))
    lhs_terms = lam[m] * gm * e_frac(case.a * m, case.c)
    scale = math.fsum(np.abs(lam[m] * gm).tolist())
    tol = rel_tol * scale
    d = divisor_counts(coeffs.n_max)
    dual = dual_transform(case.c, case.g, case.k, 1e-2 * tol * case.c, d, coeffs.n_max)
    n = np.arange(1, dual.length + 1)
    rhs_terms = lam[n] * e_frac(-case.d * n, case.c) * dual.values / case.c
    return {
        "lhs": csum(lhs_terms),
        "rhs": csum(rhs_terms),
        "scale": scale,
        "dual_length": dual.length,
        "tail_bound": dual.tail_bound / case.c,
    }


def classical_voronoi_check(case: VoronoiCase, coeffs: HeckeCoefficients, rel_tol: float = 1e-5) -> VerificationReport:
    s = classical_sides(case, coeffs, rel_tol)
    rep = VerificationReport(f"classical Voronoi c={case.c} a={case.a} g=[{case.g.a:g},{case.g.b:g}]")
    err = abs(s["lhs"] - s["rhs"]) / s["scale"]
    rep.add("classical-voronoi", "Voronoi summation for level-1 forms", err, rel_tol, **s)
    rep.add("truncation", "dual tail below 1e-2 of tolerance", s["tail_bound"] / s["scale"], 1e-2 * rel_tol)
    return rep


def ep_orthogonality(m: int, r: int, p: int) -> complex:
    """(1/p) sum_t sum*_h e((r hbar - h t + m t)/p), which equals e_p(r mbar) or 0 when p | m."""
    t = np.arange(p)[:, None]
    h = np.arange(1, p)[None, :]
    hbar = np.array([pow(int(x), -1, p) for x in range(1, p)])[None, :]
    return csum(e_frac(r * hbar - h * t + m * t, p).ravel()) / p


def ep_orthogonality_check(r: int, p: int) -> VerificationReport:
    rep = VerificationReport(f"additive expansion of e_p(r mbar), r={r} p={p}")
    worst = 0.0
    for m in range(p):
        expected = complex(e_frac(r * pow(m, -1, p), p)) if m % p else 0.0
        worst = max(worst, abs(ep_orthogonality(m, r, p) - expected))
    rep.add("ep-expansion", "additive expansion of e_p(r mbar)", worst, 1e-12)
    return rep


def modified_sides(case: VoronoiCase, coeffs: HeckeCoefficients, rel_tol: float = 1e-5, kl3_sign: int = 1) -> dict:
    """Both sides of the twisted formula, the dual side split into its four sums.

    ``kl3_sign`` selects Kl3(+- n cbar^2 r, 1, 1; p) in the first dual sum.
    """
    p, c, a, r, k = case.p, case.c, case.a, case.r, case.k
    lam = coeffs.lam
    m = np.arange(math.ceil(case.g.a), math.floor(case.g.b) + 1)
    m = m[m % p != 0]
    gm = case.g(m.astype(float))
    mbar = np.array([pow(int(x), -1, p) for x in m % p])
    lhs_terms = lam[m] * e_frac(r * mbar, p) * e_frac(-a * m, c) * gm
    scale = math.fsum(np.abs(lam[m] * gm).tolist())
    tol = rel_tol * scale
    d = divisor_counts(coeffs.n_max)

    cbar = pow(c, -1, p)
    inv_ap2 = pow(a * p * p, -1, c) if c > 1 else 0
    abar = pow(a, -1, c) if c > 1 else 0
    kl = kl3_family(p)

    # sums over n against H1(n): the modulus is pc
    long = dual_transform(p * c, case.g, k, 1e-2 * tol * p * p * c, d, coeffs.n_max)
    n = np.arange(1, long.length + 1)
    base = lam[n] * long.values * e_frac(inv_ap2 * n, c) / (p * p * c)
    unit = n % p != 0
    s1 = base[unit] * kl[np.mod(kl3_sign * n[unit] * cbar * cbar * r, p)]
    s2 = base[(n % p == 0) & (n % (p * p) != 0)]

    # sums over n against H1(p^2 n) = H(n): the modulus is c
    short = dual_transform(c, case.g, k, 1e-2 * tol * p * c, d, coeffs.n_max // p)
    n2 = np.arange(1, short.length + 1)
    tw = short.values * e_frac(abar * n2, c)
    s3 = lam[n2 * p] * lam[p] * tw / (p * p * c)
    s4 = -(1 + 1 / p) * lam[n2] * tw / (p * c)
    parts = [csum(s1), csum(s2), csum(s3), csum(s4)]
    return {
        "lhs": csum(lhs_terms),
        "rhs": sum(parts),
        "parts": parts,
        "scale": scale,
        "dual_lengths": (long.length, short.length),
        "tail_bound": long.tail_bound / (p * p * c) + short.tail_bound / (p * c),
    }


def modified_voronoi_check(case: VoronoiCase, coeffs: HeckeCoefficients, rel_tol: float = 1e-5) -> VerificationReport:
    s = modified_sides(case, coeffs, rel_tol)
    rep = VerificationReport(f"twisted Voronoi p={case.p} r={case.r} c={case.c} a={case.a} g=[{case.g.a:g},{case.g.b:g}]")
    err = abs(s["lhs"] - s["rhs"]) / s["scale"]
    rep.add("twisted-voronoi", "Voronoi summation twisted by e_p(r mbar)", err, rel_tol, **s)
    rep.add("truncation", "dual tail below 1e-2 of tolerance", s["tail_bound"] / s["scale"], 1e-2 * rel_tol)
    rep.extend(ep_orthogonality_check(case.r, case.p))
    return rep


def hecke_recombination_check(coeffs: HeckeCoefficients, p: int, upto: int = 100) -> VerificationReport:
    """The p^2-divisible dual terms recombine through lambda(p^2 n) = lambda(p) lambda(pn) - lambda(n)."""
    rep = VerificationReport(f"Hecke recombination p={p}")
    n = np.arange(1, upto + 1)
    lam = coeffs.lam
    lhs = lam[p * p * n]
    rhs = lam[p] * lam[p * n] - lam[n]
    rep.add("hecke-recombination", "lambda(p^2 n) = lambda(p) lambda(pn) - lambda(n)", float(np.max(np.abs(lhs - rhs))), 1e-10)
    return rep


def case_matrix(weights: tuple[BumpFunction, ...] | None = None) -> list[tuple[VoronoiCase, VoronoiCase]]:
    """(classical, twisted) pairs over c in {1,2,3,5}, p in {3,5} and two test weights."""
    weights = weights or (BumpFunction(1000.0, 3000.0), BumpFunction(1500.0, 6000.0))
    out = []
    for g in weights:
        for p in (3, 5):
            for c in (1, 2, 3, 5):
                if gcd(c, p) != 1:
                    continue
                a = 1 if c <= 2 else 2
                r = 1 if p == 3 else 2
                out.append((VoronoiCase(12, c, a, g), VoronoiCase(12, c, a, g, p=p, r=r)))
    return out


def export_case_csv(path: Path, rows: list[tuple]) -> None:
    write_csv(path, ["kind", "p", "c", "a", "r", "g_a", "g_b", "rel_error", "dual_length"], rows)
