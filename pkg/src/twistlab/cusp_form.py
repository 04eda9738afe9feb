"""Coefficients of the weight-12 level-1 eigenform Delta and checks on them."""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .report import VerificationReport, write_csv

try:
    import gmpy2

    def _mul(x: int, y: int) -> int:
        return int(gmpy2.mpz(x) * gmpy2.mpz(y))

except ImportError:  # pragma: no cover - plain ints are correct, only slower

    def _mul(x: int, y: int) -> int:
        return x * y


CACHE_ENV = "TWISTLAB_CACHE_DIR"
_MAGIC = b"TWLTAU01"
_HEADER = struct.Struct("<8siq")


@dataclass(frozen=True)
class HeckeCoefficients:
    """tau[n] and lam[n] = tau(n)/n^((k-1)/2) for 1 <= n <= n_max; index 0 is unused."""

    weight: int
    n_max: int
    tau: list[int] = field(repr=False)
    lam: np.ndarray = field(repr=False)

    def lambda_at(self, n: np.ndarray | int) -> np.ndarray:
        n = np.asarray(n)
        if np.any(n > self.n_max):
            raise IndexError(f"coefficient requested beyond cached range {self.n_max}")
        return self.lam[n]


def pentagonal_series(length: int) -> list[int]:
    """Coefficients of prod_{n>=1} (1 - q^n) below q^length (Euler's pentagonal theorem)."""
    out = [0] * length
    k = 0
    while True:
        hit = False
        for j in (k, -k) if k else (0,):
            deg = j * (3 * j - 1) // 2
            if deg < length:
                out[deg] += -1 if j % 2 else 1
                hit = True
        if not hit:
            break
        k += 1
    return out


def _poly_mul(x: list[int], y: list[int], length: int) -> list[int]:
    """Truncated product of integer polynomials via Kronecker substitution."""
    mx = max((abs(v) for v in x), default=0)
    my = max((abs(v) for v in y), default=0)
    bound = min(len(x), len(y)) * mx * my + 1
    nbytes = (bound.bit_length() + 2 + 7) // 8
    half = 1 << (8 * nbytes - 1)
    X = _pack(x, nbytes, half)
    Y = _pack(y, nbytes, half)
    Z = _mul(X, Y)
    total_bits = 8 * nbytes * length
    W = (Z + half * _ones(nbytes, length)) & ((1 << total_bits) - 1)
    raw = W.to_bytes(nbytes * length, "little")
    return [int.from_bytes(raw[i * nbytes : (i + 1) * nbytes], "little") - half for i in range(length)]


def _pack(coeffs: list[int], nbytes: int, half: int) -> int:
    """sum c_i 2^(8 nbytes i) for signed c_i with |c_i| < half."""
    chunks = b"".join((c + half).to_bytes(nbytes, "little") for c in coeffs)
    shifted = int.from_bytes(chunks, "little")
    return shifted - half * _ones(nbytes, len(coeffs))


def _ones(nbytes: int, count: int) -> int:
    """sum of 2^(8 nbytes i) for i < count."""
    return int.from_bytes((b"\x01" + b"\x00" * (nbytes - 1)) * count, "little")


def tau_table(n_max: int) -> list[int]:
    """[0, tau(1), ..., tau(n_max)] from q * prod (1 - q^n)^24 in exact integers."""
    length = n_max
    eta = pentagonal_series(length)
    cube = _poly_mul(_poly_mul(eta, eta, length), eta, length)
    poly = cube
    for _ in range(3):
        poly = _poly_mul(poly, poly, length)
    return [0] + poly


def generate_coefficients(n_max: int, weight: int = 12) -> HeckeCoefficients:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if weight != 12:
        raise NotImplementedError("only the weight-12 form Delta is implemented")
    return _from_tau(weight, tau_table(n_max))


def _from_tau(weight: int, tau: list[int]) -> HeckeCoefficients:
    n_max = len(tau) - 1
    half = (weight - 1) / 2
    lam = np.zeros(n_max + 1)
    n = np.arange(1, n_max + 1, dtype=float)
    lam[1:] = np.array([float(t) for t in tau[1:]]) / n**half
    lam.setflags(write=False)
    return HeckeCoefficients(weight, n_max, tau, lam)


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "twistlab"


def cache_path(cache_dir: Path, weight: int) -> Path:
    return Path(cache_dir) / f"tau_weight{weight}.bin"


def write_cache(path: Path, coeffs: HeckeCoefficients) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    body = b"".join(t.to_bytes(16, "little", signed=True) for t in coeffs.tau[1:])
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(_HEADER.pack(_MAGIC, coeffs.weight, coeffs.n_max) + body)
    tmp.replace(path)


def read_cache(path: Path) -> HeckeCoefficients:
    raw = Path(path).read_bytes()
    magic, weight, n_max = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path} is not a coefficient cache")
    start = _HEADER.size
    if len(raw) != start + 16 * n_max:
        raise ValueError(f"{path} is truncated")
    tau = [0] + [int.from_bytes(raw[start + 16 * i : start + 16 * (i + 1)], "little", signed=True) for i in range(n_max)]
    return _from_tau(weight, tau)


def load_coefficients(n_max: int, weight: int = 12, cache_dir: Path | None = None) -> HeckeCoefficients:
    """Read the disk cache if it covers n_max, regenerate and rewrite it otherwise."""
    path = cache_path(cache_dir or default_cache_dir(), weight)
    if path.exists():
        try:
            cached = read_cache(path)
            if cached.weight == weight and cached.n_max >= n_max:
                return cached
        except (ValueError, struct.error):
            pass
    coeffs = generate_coefficients(n_max, weight)
    try:
        write_cache(path, coeffs)
    except OSError:
        pass
    return coeffs


def hecke_relation_check(coeffs: HeckeCoefficients, p: int, n: int) -> VerificationReport:
    if n % p == 0:
        raise ValueError("the relation is checked for gcd(n, p) = 1 only")
    if p * p * n > coeffs.n_max:
        raise ValueError("p^2 n exceeds the cached range")
    rep = VerificationReport(f"Hecke relation p={p} n={n}")
    t = coeffs.tau
    exact = t[p * p * n] == t[p] * t[p * n] - p ** (coeffs.weight - 1) * t[n]
    lam = coeffs.lam
    lhs = lam[p * p * n]
    rhs = lam[p] * lam[p * n] - lam[n]
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    rep.add("hecke-exact", "lambda(p^2 n) = lambda(p) lambda(pn) - lambda(n)", 0.0 if exact else 1.0, 0.0, quadruple=(p, n, t[p * p * n], t[p] * t[p * n] - p**11 * t[n]))
    rep.add("hecke-normalized", "lambda(p^2 n) = lambda(p) lambda(pn) - lambda(n)", rel, 1e-12 if abs(lhs) > 1e-8 else 1e-6, lhs=lhs, rhs=rhs)
    return rep


def fourth_moment_partial(coeffs: HeckeCoefficients, x: int) -> float:
    if x > coeffs.n_max:
        raise ValueError("x exceeds the cached range")
    return math.fsum((coeffs.lam[1 : x + 1] ** 4).tolist())


@lru_cache(maxsize=4)
def divisor_counts(n_max: int) -> np.ndarray:
    d = np.zeros(n_max + 1, dtype=np.int64)
    for k in range(1, n_max + 1):
        d[k::k] += 1
    d.setflags(write=False)
    return d


def deligne_bound_check(coeffs: HeckeCoefficients) -> VerificationReport:
    rep = VerificationReport("Deligne bound |lambda(n)| <= d(n)")
    d = divisor_counts(coeffs.n_max)
    ratio = np.abs(coeffs.lam[1:]) / d[1:]
    worst = int(np.argmax(ratio)) + 1
    rep.add("deligne-bound", "|lambda(n)| <= d(n)", float(ratio.max()), 1.0, worst_n=worst)
    return rep


def export_coefficients_csv(path: Path, coeffs: HeckeCoefficients, upto: int | None = None) -> None:
    upto = min(upto or coeffs.n_max, coeffs.n_max)
    rows = ((n, coeffs.tau[n], float(coeffs.lam[n])) for n in range(1, upto + 1))
    write_csv(path, ["n", "tau", "lambda"], rows)
