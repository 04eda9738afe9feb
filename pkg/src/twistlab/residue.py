"""Exact arithmetic in Z/p^kZ: unit-group tables, inverses, Legendre symbols, CRT."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd

import numpy as np


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def euler_phi(n: int) -> int:
    result = n
    for q in prime_factors(n):
        result -= result // q
    return result


def divisor_count(n: int) -> int:
    count = 1
    d = 2
    while d * d <= n:
        e = 0
        while n % d == 0:
            n //= d
            e += 1
        count *= e + 1
        d += 1
    if n > 1:
        count *= 2
    return count


@dataclass(frozen=True)
class PrimePower:
    p: int
    k: int

    def __post_init__(self) -> None:
        if self.p == 2 or not is_prime(self.p):
            raise ValueError(f"p must be an odd prime, got {self.p}")
        if self.k < 1:
            raise ValueError(f"exponent must be >= 1, got {self.k}")

    @property
    def modulus(self) -> int:
        return self.p**self.k

    @property
    def phi(self) -> int:
        return self.p ** (self.k - 1) * (self.p - 1)


@dataclass(frozen=True)
class UnitGroupTable:
    """Cyclic structure of (Z/p^kZ)^x.

    ``dlog[u]`` is the exponent of ``u`` against ``generator`` and -1 on
    non-units, so the array doubles as a unit mask.
    """

    base: PrimePower
    generator: int
    order: int
    dlog: np.ndarray = field(repr=False)
    powers: np.ndarray = field(repr=False)

    @property
    def modulus(self) -> int:
        return self.base.modulus

    def log(self, n: int) -> int:
        e = int(self.dlog[n % self.modulus])
        if e < 0:
            raise ValueError(f"{n} is not a unit mod {self.modulus}")
        return e


def _is_primitive_root(g: int, m: int, order: int) -> bool:
    if gcd(g, m) != 1:
        return False
    return all(pow(g, order // ell, m) != 1 for ell in prime_factors(order))


def smallest_primitive_root(p: int) -> int:
    for g in range(2, p):
        if _is_primitive_root(g, p, p - 1):
            return g
    return 1  # p = 2 is rejected earlier; unreachable for odd primes > 2


@lru_cache(maxsize=None)
def build_unit_group(pp: PrimePower) -> UnitGroupTable:
    m = pp.modulus
    order = pp.phi
    g = smallest_primitive_root(pp.p)
    # g mod p lifts to a generator mod p^k unless g^(p-1) = 1 mod p^2; then g + p does
    if not _is_primitive_root(g, m, order):
        g += pp.p
    if not _is_primitive_root(g, m, order):
        raise RuntimeError(f"failed to lift primitive root to {m}")
    dlog = np.full(m, -1, dtype=np.int64)
    powers = np.empty(order, dtype=np.int64)
    x = 1
    for e in range(order):
        powers[e] = x
        dlog[x] = e
        x = x * g % m
    dlog.setflags(write=False)
    powers.setflags(write=False)
    return UnitGroupTable(base=pp, generator=g, order=order, dlog=dlog, powers=powers)


def inverse(n: int, modulus: int) -> int:
    if gcd(n, modulus) != 1:
        raise ValueError(f"{n} is not invertible mod {modulus}")
    return pow(n, -1, modulus)


def inverse_table(modulus: int) -> np.ndarray:
    """Inverse of every residue mod ``modulus``, -1 on non-units."""
    inv = np.full(modulus, -1, dtype=np.int64)
    for a in range(modulus):
        if gcd(a, modulus) == 1:
            inv[a] = pow(a, -1, modulus) if modulus > 1 else 0
    return inv


def legendre(a: int, p: int) -> int:
    if p == 2 or not is_prime(p):
        raise ValueError(f"p must be an odd prime, got {p}")
    a %= p
    if a == 0:
        return 0
    # quadratic residue test by squaring table; Euler's criterion is the test oracle
    return 1 if any(y * y % p == a for y in range(1, (p + 1) // 2)) else -1


def crt_split(x: int, k: int, p: int) -> tuple[int, int]:
    return x % k, x % p


def crt_join(xk: int, xp: int, k: int, p: int) -> int:
    """Unique x mod k*p with x = xk mod k and x = xp mod p, gcd(k, p) = 1."""
    if gcd(k, p) != 1:
        raise ValueError("moduli must be coprime")
    c = k * p
    if k == 1:
        return xp % p
    return (xk * p * pow(p, -1, k) + xp * k * pow(k, -1, p)) % c
