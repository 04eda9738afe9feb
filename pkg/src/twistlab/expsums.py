"""Complete exponential sums: Ramanujan, Kloosterman, Kl3 and quadratic Gauss sums."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from math import gcd
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .characters import e_frac, enumerate_characters, gauss_sum
from .report import VerificationReport, write_csv
from .residue import PrimePower, divisor_count, inverse_table, is_prime, legendre


@dataclass(frozen=True)
class ExpSumValue:
    value: complex
    terms: int
    modulus: int

    def __complex__(self) -> complex:
        return self.value

    @property
    def real(self) -> float:
        return self.value.real


def csum(values: np.ndarray) -> complex:
    """Correctly rounded sum of a complex array, independent of summation order."""
    values = np.asarray(values, dtype=complex)
    return complex(math.fsum(values.real.tolist()), math.fsum(values.imag.tolist()))


@lru_cache(maxsize=256)
def _units(c: int) -> tuple[np.ndarray, np.ndarray]:
    if c == 1:
        return np.array([0]), np.array([0])
    inv = inverse_table(c)
    u = np.nonzero(inv >= 0)[0]
    return u, inv[u]


def ramanujan_sum(n: int, c: int) -> ExpSumValue:
    if c < 1:
        raise ValueError("modulus must be >= 1")
    d, _ = _units(c)
    return ExpSumValue(csum(e_frac(d * (n % c), c)), len(d), c)


def kloosterman(a: int, b: int, c: int) -> ExpSumValue:
    if c < 1:
        raise ValueError("modulus must be >= 1")
    m, mbar = _units(c)
    return ExpSumValue(csum(e_frac(a % c * m + b % c * mbar, c)), len(m), c)


def kloosterman_row(a: int, c: int) -> np.ndarray:
    """S(a, b; c) for every b mod c, via one pass over the units."""
    m, mbar = _units(c)
    phases = e_frac(a % c * m, c)
    out = np.zeros(c, dtype=complex)
    for b in range(c):
        out[b] = np.sum(phases * e_frac(b * mbar, c))
    return out


def weil_bound(a: int, b: int, c: int) -> float:
    return divisor_count(c) * math.sqrt(gcd(gcd(a, b), c)) * math.sqrt(c)


def weil_bound_check(a: int, b: int, c: int) -> VerificationReport:
    rep = VerificationReport(f"Weil bound S({a},{b};{c})")
    s = abs(kloosterman(a, b, c).value)
    rep.add("weil-bound", "Weil bound for Kloosterman sums", s / weil_bound(a, b, c), 1.0 + 1e-12, ratio=s / weil_bound(a, b, c))
    return rep


def kl3(x: int, y: int, z: int, p: int) -> ExpSumValue:
    """Sum over abc = 1 mod p of e((ax + by + cz)/p)."""
    a, abar = _units(p)
    aa, bb = np.meshgrid(a, a, indexing="ij")
    inv = inverse_table(p)
    cc = inv[(aa * bb) % p]
    vals = e_frac(x * aa + y * bb + z * cc, p)
    return ExpSumValue(csum(vals.ravel()), (p - 1) ** 2, p)


def kl3_family(p: int) -> np.ndarray:
    """Kl3(r, 1, 1; p) for every r mod p in O(p^2) operations.

    Grouping by the first variable, Kl3(r,1,1) = sum_a e(ra/p) S(1, abar; p).
    """
    a, abar = _units(p)
    kl2 = np.array([np.sum(e_frac(a + t * abar, p)) for t in range(p)])
    weights = kl2[abar]
    r = np.arange(p)
    return np.array([csum(e_frac(rr * a, p) * weights) for rr in r])


def gauss_decomposition(r: int, p: int, conjugate: bool = True) -> complex:
    """(1/phi(p)) sum over all chi mod p of tau(chi)^3 chi-bar(r).

    With ``conjugate=False`` the literal chi(r) pairing is used, which gives
    Kl3(rbar, 1, 1; p) instead.
    """
    pp = PrimePower(p, 1)
    total = []
    for chi in enumerate_characters(pp):
        val = chi(r)
        total.append(gauss_sum(chi) ** 3 * (val.conjugate() if conjugate else val))
    return csum(np.array(total)) / (p - 1)


def kl3_gauss_decomposition_check(r: int, p: int) -> VerificationReport:
    if r % p == 0:
        raise ValueError("r must be a unit mod p")
    rep = VerificationReport(f"Kl3 Gauss decomposition r={r} p={p}")
    direct = kl3(r, 1, 1, p).value
    dec = gauss_decomposition(r, p, conjugate=True)
    literal = gauss_decomposition(r, p, conjugate=False)
    rep.add(
        "kl3-gauss-decomposition",
        "Kl3 as a cubic moment of Gauss sums",
        abs(direct - dec),
        1e-8 * p,
        direct=direct,
        decomposition=dec,
        literal_chi_r_residual=abs(direct - literal),
    )
    return rep


def epsilon_p(p: int) -> complex:
    return 1.0 if p % 4 == 1 else 1j


def quadratic_gauss_direct(c: int, k: int, p: int) -> complex:
    y = np.arange(p)
    return csum(e_frac(-c * y * y + k * y, p))


def quadratic_gauss_closed_form(c_alpha: int, k_alpha: int, p: int) -> complex:
    """Closed form of sum_y e((-c y^2 + k y)/p).

    Completing the square leaves e(k^2 (4c)^{-1}/p) times the Gauss sum of -c,
    which is (-c/p) eps_p sqrt(p).
    """
    if c_alpha % p == 0:
        raise ValueError("p divides c_alpha")
    shift = k_alpha * k_alpha * pow(4 * c_alpha, -1, p)
    return complex(e_frac(shift, p)) * epsilon_p(p) * math.sqrt(p) * legendre(-c_alpha, p)


def _first_odd_primes(count: int) -> list[int]:
    out, n = [], 3
    while len(out) < count:
        if is_prime(n):
            out.append(n)
        n += 2
    return out


def epsilon_self_test(count: int = 10) -> float:
    """Worst |sum_y e(y^2/p) - eps_p sqrt p| over the first ``count`` odd primes."""
    worst = 0.0
    for p in _first_odd_primes(count):
        y = np.arange(p)
        worst = max(worst, abs(csum(e_frac(y * y, p)) - epsilon_p(p) * math.sqrt(p)))
    return worst


_SELF_TEST = epsilon_self_test()
if _SELF_TEST > 1e-9:
    raise RuntimeError(f"eps_p table disagrees with brute-force Gauss sums ({_SELF_TEST:g})")


def dump_family_csv(path: Path, rows: Iterable[tuple[str, int, Sequence[int], complex]]) -> None:
    """rows of (family, modulus, parameters, value)."""
    out = []
    for family, modulus, params, value in rows:
        out.append((family, modulus, " ".join(str(int(v)) for v in params), float(value.real), float(value.imag)))
    write_csv(path, ["family", "modulus", "parameters", "re", "im"], out)
