"""Dirichlet characters modulo p^k indexed by their exponent against a fixed generator."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .report import VerificationReport, write_csv
from .residue import PrimePower, UnitGroupTable, build_unit_group


@lru_cache(maxsize=None)
def root_table(order: int) -> np.ndarray:
    """exp(2 pi i j / order) for 0 <= j < order."""
    j = np.arange(order)
    t = 2.0 * np.pi * j / order
    table = np.cos(t) + 1j * np.sin(t)
    table.setflags(write=False)
    return table


def e(x: float) -> complex:
    return cmath.exp(2j * math.pi * x)


def e_frac(num: np.ndarray | int, den: int) -> np.ndarray | complex:
    """e(num/den) evaluated through the reduced residue num mod den."""
    table = root_table(den)
    return table[np.mod(num, den)]


@dataclass(frozen=True)
class DirichletCharacter:
    modulus: PrimePower
    exponent: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "exponent", self.exponent % self.modulus.phi)

    @property
    def q(self) -> int:
        return self.modulus.modulus

    @property
    def table(self) -> UnitGroupTable:
        return build_unit_group(self.modulus)

    @property
    def primitive(self) -> bool:
        if self.modulus.k == 1:
            return self.exponent != 0
        return self.exponent % self.modulus.p != 0

    @property
    def parity(self) -> int:
        """chi(-1) = (-1)^exponent, since -1 is the generator to the power phi/2."""
        return -1 if self.exponent % 2 else 1

    @property
    def is_principal(self) -> bool:
        return self.exponent == 0

    def __call__(self, n: int) -> complex:
        return complex(self.values(np.asarray([n]))[0])

    def values(self, n: np.ndarray | Sequence[int]) -> np.ndarray:
        """Vectorized evaluation; zero off the units."""
        n = np.asarray(n, dtype=np.int64)
        tab = self.table
        logs = tab.dlog[np.mod(n, self.q)]
        phi = tab.order
        out = root_table(phi)[np.mod(self.exponent * np.maximum(logs, 0), phi)].copy()
        out[logs < 0] = 0.0
        return out

    def log_values(self, n: np.ndarray) -> np.ndarray:
        """Integer e*dlog(n) mod phi, the exact phase in units of 1/phi; -1 off units."""
        tab = self.table
        logs = tab.dlog[np.mod(n, self.q)]
        out = np.mod(self.exponent * logs, tab.order)
        out[logs < 0] = -1
        return out

    def conj(self) -> "DirichletCharacter":
        return DirichletCharacter(self.modulus, -self.exponent)

    def lift(self, target: PrimePower) -> "DirichletCharacter":
        """The same character viewed modulo a higher power of p."""
        if target.p != self.modulus.p or target.k < self.modulus.k:
            raise ValueError("can only lift to a higher power of the same prime")
        big = build_unit_group(target)
        small = self.table
        if big.generator % small.modulus != small.generator:
            raise RuntimeError("generator tables are not compatible under reduction")
        return DirichletCharacter(target, self.exponent * target.p ** (target.k - self.modulus.k))


def enumerate_characters(pp: PrimePower) -> list[DirichletCharacter]:
    return [DirichletCharacter(pp, e) for e in range(pp.phi)]


def product(chi1: DirichletCharacter, chi2: DirichletCharacter) -> DirichletCharacter:
    if chi1.modulus.p != chi2.modulus.p:
        raise ValueError("characters must have moduli that are powers of the same prime")
    big = chi1.modulus if chi1.modulus.k >= chi2.modulus.k else chi2.modulus
    a, b = chi1.lift(big), chi2.lift(big)
    return DirichletCharacter(big, a.exponent + b.exponent)


def gauss_sum(chi: DirichletCharacter) -> complex:
    q = chi.q
    a = np.arange(q)
    return complex(np.sum(chi.values(a) * e_frac(a, q)))


def gauss_sum_exact_check(chi: DirichletCharacter) -> float:
    return abs(abs(gauss_sum(chi)) - math.sqrt(chi.q)) / math.sqrt(chi.q)


@dataclass(frozen=True)
class PostnikovConstant:
    a_alpha: int
    p: int


def postnikov_constant(alpha: DirichletCharacter) -> PostnikovConstant:
    """a with alpha(n + p^2 l) conj(alpha(n)) = e_p(a l n^{-1}), verified for all units n and l."""
    pp = alpha.modulus
    if pp.k != 3 or not alpha.primitive:
        raise ValueError("alpha must be primitive modulo p^3")
    p, phi = pp.p, pp.phi
    tab = alpha.table
    # alpha(1 + p^2) = e(exponent * dlog(1+p^2) / phi); this phase is a multiple of 1/p
    step = alpha.exponent * int(tab.dlog[1 + p * p]) % phi
    if step % (phi // p) != 0:
        raise RuntimeError("alpha(1 + p^2) is not a p-th root of unity")
    a = step // (phi // p)
    if a == 0:
        raise RuntimeError("a_alpha = 0 contradicts primitivity")
    if not postnikov_holds(alpha, a):
        raise RuntimeError("no single constant fits the conductor-drop identity")
    return PostnikovConstant(a_alpha=a, p=p)


def postnikov_holds(alpha: DirichletCharacter, a: int) -> bool:
    """Exhaustive integer-exact check over all units n mod p^3 and l in 1..p."""
    pp = alpha.modulus
    p, q, phi = pp.p, pp.modulus, pp.phi
    n = np.arange(q)
    n = n[n % p != 0]
    nbar_p = np.array([pow(int(x), -1, p) for x in n % p])
    base = alpha.log_values(n)
    for l in range(1, p + 1):
        lhs = np.mod(alpha.log_values(n + p * p * l) - base, phi)
        rhs = np.mod(a * l * nbar_p, p) * (phi // p)
        if not np.array_equal(lhs, rhs):
            return False
    return True


def orthogonality_check(pp: PrimePower, samples: int = 200, seed: int = 0) -> VerificationReport:
    """sum over psi mod p^2 of psi(m nbar) equals phi(p^2)[m = n mod p^2], else 0."""
    p = pp.p
    sub = PrimePower(p, 2)
    chars = enumerate_characters(sub)
    phi2 = sub.phi
    rng = np.random.default_rng(seed)
    units = np.array([u for u in range(1, pp.modulus) if u % p])
    report = VerificationReport(f"character orthogonality mod {p}^2")
    pairs = [(int(u), int(u)) for u in units[:5]]
    pairs += [(int(u + p * p), int(u)) for u in units[:5]]
    pairs += [(int(a), int(b)) for a, b in rng.choice(units, size=(samples, 2))]
    worst = 0.0
    worst_pair = None
    for m, n in pairs:
        r = m * pow(n, -1, p * p) % (p * p)
        total = sum(chi.values(np.array([r]))[0] for chi in chars)
        expected = phi2 if (m - n) % (p * p) == 0 else 0.0
        err = abs(total - expected)
        if err > worst:
            worst, worst_pair = err, (m, n)
    report.add(
        "psi-orthogonality",
        "orthogonality over psi mod p^2",
        worst / phi2,
        1e-9,
        offending_pair=worst_pair,
        pairs=len(pairs),
    )
    return report


def full_table_orthogonality(pp: PrimePower) -> float:
    """Largest entry error of (1/phi) X X^* - I over units, X the full character table."""
    units = np.array([u for u in range(pp.modulus) if u % pp.p])
    table = np.array([chi.values(units) for chi in enumerate_characters(pp)])
    gram = table.conj().T @ table / pp.phi
    return float(np.max(np.abs(gram - np.eye(len(units)))))


def export_characters_csv(path: Path, chars: Iterable[DirichletCharacter]) -> None:
    rows = [(c.q, c.exponent, int(c.primitive), c.parity) for c in chars]
    write_csv(path, ["modulus", "exponent", "primitive", "parity"], rows)
