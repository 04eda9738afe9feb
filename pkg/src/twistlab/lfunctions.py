"""Central values L(1/2, f x chi) from the approximate functional equation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import loggamma

from .characters import DirichletCharacter, enumerate_characters, gauss_sum, product, root_table
from .cusp_form import HeckeCoefficients
from .report import VerificationReport, write_csv
from .residue import PrimePower, build_unit_group

KERNELS = ("gamma", "exp_square", "cos16")


def kernel_G(s: np.ndarray, kernel: str) -> np.ndarray:
    """Even weight, holomorphic on the strip used, with G(0) = 1.

    "gamma" is G = 1, for which V(y) is the normalized incomplete gamma
    function Gamma(k/2, 2 pi y)/Gamma(k/2) and decays like exp(-2 pi y).
    The other two grow along the real axis, so their V decay far more
    slowly: like exp(-(log y)^2/4) for exp_square and polynomially for cos16.
    """
    if kernel == "gamma":
        return np.ones_like(s)
    if kernel == "exp_square":
        return np.exp(s * s)
    if kernel == "cos16":
        # poles at s = +-4, outside both contours
        return np.cos(np.pi * s / 8) ** -16
    raise ValueError(f"unknown kernel {kernel!r}")


def gamma_ratio(s: np.ndarray, k: int) -> np.ndarray:
    """gamma(1/2 + s)/gamma(1/2) with gamma(s) = (2 pi)^-s Gamma(s + (k-1)/2)."""
    return np.exp(loggamma(s + k / 2) - loggamma(k / 2) - s * math.log(2 * math.pi))


def analytic_conductor_scale(k: int) -> float:
    """q_infinity for the weight-k gamma factor at the central point: (k/2 + 3)(k/2 + 4)."""
    return (k / 2 + 3) * (k / 2 + 4)


@lru_cache(maxsize=16)
def _contour(k: int, kernel: str, sigma: float, height: float, step: float) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(-height, height + step / 2, step)
    s = sigma + 1j * t
    w = np.full(t.size, step)
    w[0] = w[-1] = step / 2
    return s, w * gamma_ratio(s, k) * kernel_G(s, kernel) / s / (2 * np.pi)


def cutoff_V(
    y: np.ndarray | float, k: int = 12, kernel: str = "gamma", height: float = 40.0, step: float = 0.05
) -> np.ndarray:
    """(1/2 pi i) int_(2) gamma(1/2+s)/gamma(1/2) G(s) y^-s ds/s by the trapezoid rule.

    For y < 1 the line is moved to Re s = -2 and the residue 1 at s = 0 added,
    which avoids the cancellation of y^-2 against a value near 1.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y <= 0):
        raise ValueError("y must be positive")
    left = -min(2.0, k / 4)
    out = np.empty(y.size)
    logy = np.log(y)
    for sigma, mask, offset in ((2.0, y >= 1, 0.0), (left, y < 1, 1.0)):
        if not np.any(mask):
            continue
        s, w = _contour(k, kernel, sigma, height, step)
        ly = logy[mask]
        vals = np.empty(ly.size)
        chunk = max(1, 2_000_000 // s.size)
        for i in range(0, ly.size, chunk):
            phase = np.exp(-np.outer(ly[i : i + chunk], s))
            vals[i : i + chunk] = (phase @ w).real
        out[mask] = vals + offset
    return out


@lru_cache(maxsize=32)
def cutoff_length(k: int, kernel: str, threshold: float) -> float:
    """Smallest y beyond which |V| stays below ``threshold`` (V decays monotonically past sqrt(q_inf))."""
    ys = np.geomspace(1.0, 1e5, 2501)
    v = np.abs(cutoff_V(ys, k, kernel))
    above = np.nonzero(v >= threshold)[0]
    if above.size == 0:
        return 1.0
    if above[-1] == ys.size - 1:
        raise RuntimeError("V has not decayed by y = 1e5")
    return float(ys[above[-1] + 1])


@dataclass(frozen=True)
class TwistedLSeries:
    coeffs: HeckeCoefficients
    chi: DirichletCharacter

    def __post_init__(self) -> None:
        if not self.chi.primitive:
            raise ValueError("the twisting character must be primitive")

    @property
    def weight(self) -> int:
        return self.coeffs.weight

    @property
    def q(self) -> int:
        return self.chi.q

    @property
    def conductor(self) -> int:
        return self.q**2

    @property
    def q_inf(self) -> float:
        return analytic_conductor_scale(self.weight)


@dataclass(frozen=True)
class AfeConfig:
    X: float = 1.0
    threshold: float = 1e-10
    kernel: str = "gamma"
    height: float = 40.0
    step: float = 0.05

    def __post_init__(self) -> None:
        if not 0.25 <= self.X <= 4.0:
            raise ValueError("X must lie in [1/4, 4]")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")


def root_number(series: TwistedLSeries) -> complex:
    """i^k tau(chi)^2 / q for level-1 f and primitive chi mod q."""
    return (1j**series.weight) * gauss_sum(series.chi) ** 2 / series.q


def required_length(q: int, cfg: AfeConfig, k: int = 12) -> int:
    """Largest n either AFE sum needs before V drops below the threshold."""
    y = cutoff_length(k, cfg.kernel, cfg.threshold)
    return int(math.ceil(y * q * max(cfg.X, 1 / cfg.X)))


@dataclass(frozen=True)
class AfeParts:
    """first = sum lambda chi(n) n^-1/2 V(n/(Xq)), dual = sum lambda chibar(n) n^-1/2 V(nX/q)."""

    first: complex
    dual: complex
    epsilon: complex

    @property
    def value(self) -> complex:
        return self.first + self.epsilon * self.dual


def _weights(coeffs: HeckeCoefficients, q: int, cfg: AfeConfig, scale: float, lam_factor: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """n and lambda(n) n^-1/2 V(n scale / q) for all n up to the cutoff."""
    length = int(math.ceil(cutoff_length(coeffs.weight, cfg.kernel, cfg.threshold) * q / scale))
    if length > coeffs.n_max:
        raise IndexError(f"AFE needs {length} coefficients, cache holds {coeffs.n_max}")
    n = np.arange(1, length + 1)
    v = cutoff_V(n * scale / q, coeffs.weight, cfg.kernel, cfg.height, cfg.step)
    return n, lam_factor * coeffs.lam[n] * v / np.sqrt(n)


def central_value_parts(series: TwistedLSeries, cfg: AfeConfig, epsilon: complex | None = None) -> AfeParts:
    """Direct evaluation for one character."""
    q = series.q
    n1, a1 = _weights(series.coeffs, q, cfg, 1 / cfg.X)
    n2, a2 = _weights(series.coeffs, q, cfg, cfg.X)
    first = complex(np.sum(a1 * series.chi.values(n1)))
    dual = complex(np.sum(a2 * np.conj(series.chi.values(n2))))
    eps = root_number(series) if epsilon is None else epsilon
    return AfeParts(first, dual, eps)


def central_value(series: TwistedLSeries, cfg: AfeConfig | None = None) -> complex:
    return central_value_parts(series, cfg or AfeConfig()).value


def coset_family(alpha: DirichletCharacter) -> list[DirichletCharacter]:
    """alpha psi for psi mod p^2 in exponent order."""
    sub = PrimePower(alpha.modulus.p, 2)
    return [product(alpha, psi) for psi in enumerate_characters(sub)]


def _bucket(n: np.ndarray, a: np.ndarray, q_pp: PrimePower) -> np.ndarray:
    """b[j] = sum of a(n) over units n with dlog(n mod q) = j."""
    logs = build_unit_group(q_pp).dlog[n % q_pp.modulus]
    unit = logs >= 0
    return np.bincount(logs[unit], weights=a[unit], minlength=q_pp.phi)


def family_parts(
    coeffs: HeckeCoefficients, chars: list[DirichletCharacter], cfg: AfeConfig, coeff_scale: float = 1.0
) -> list[AfeParts]:
    """AFE parts for many characters mod the same q from one bucketed pass over n.

    With b[j] the coefficient mass on dlog class j, each sum is
    sum_j b[j] zeta^(e j), an exact-root DFT of length phi(q).
    """
    pp = chars[0].modulus
    q, phi = pp.modulus, pp.phi
    n1, a1 = _weights(coeffs, q, cfg, 1 / cfg.X, coeff_scale)
    n2, a2 = _weights(coeffs, q, cfg, cfg.X, coeff_scale)
    b1 = _bucket(n1, a1, pp)
    b2 = _bucket(n2, a2, pp)
    roots = root_table(phi)
    j = np.arange(phi)
    out = []
    for chi in chars:
        if chi.modulus != pp:
            raise ValueError("all characters must share one modulus")
        z = roots[(chi.exponent * j) % phi]
        series = TwistedLSeries(coeffs, chi)
        out.append(AfeParts(complex(b1 @ z), complex(b2 @ np.conj(z)), root_number(series)))
    return out


def family_values(coeffs: HeckeCoefficients, alpha: DirichletCharacter, cfg: AfeConfig | None = None) -> np.ndarray:
    return np.array([part.value for part in family_parts(coeffs, coset_family(alpha), cfg or AfeConfig())])


def x_invariance_check(
    coeffs: HeckeCoefficients,
    alpha: DirichletCharacter,
    xs: tuple[float, ...] = (0.5, 1.0, 2.0),
    kernel: str = "gamma",
    threshold: float = 1e-10,
    tol: float = 1e-4,
    epsilon_sign: int = 1,
) -> VerificationReport:
    """Relative spread of L(1/2) across X for each member of the coset family.

    ``epsilon_sign = -1`` negates the root number, which must destroy the agreement.
    """
    chars = coset_family(alpha)
    rep = VerificationReport(f"X-invariance p={alpha.modulus.p} alpha={alpha.exponent} kernel={kernel}")
    values = []
    for x in xs:
        parts = family_parts(coeffs, chars, AfeConfig(X=x, kernel=kernel, threshold=threshold))
        values.append([p.first + epsilon_sign * p.epsilon * p.dual for p in parts])
    values = np.array(values)
    scale = np.maximum(np.max(np.abs(values), axis=0), 1e-300)
    spread = (np.max(values.real, axis=0) - np.min(values.real, axis=0) + np.max(values.imag, axis=0) - np.min(values.imag, axis=0)) / scale
    worst = int(np.argmax(spread))
    label = "X-invariance" if epsilon_sign == 1 else "X-invariance-wrong-root-number"
    rep.add(
        label,
        "the AFE value does not depend on X",
        float(spread.max()),
        tol,
        worst_psi=worst,
        min_spread=float(spread.min()),
        xs=list(xs),
    )
    return rep


def export_values_csv(path: Path, values: np.ndarray) -> None:
    rows = [(j, float(v.real), float(v.imag), float(abs(v) ** 2)) for j, v in enumerate(values)]
    write_csv(path, ["psi_exponent", "re_L", "im_L", "abs_L_sq"], rows)
