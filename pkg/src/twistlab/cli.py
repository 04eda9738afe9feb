"""Command-line front end: verification suites and moment experiments, JSON reports and CSV tables."""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .characters import DirichletCharacter, full_table_orthogonality, orthogonality_check, postnikov_constant
from .cusp_form import CACHE_ENV, HeckeCoefficients, deligne_bound_check, hecke_relation_check, load_coefficients
from .expsums import (
    dump_family_csv,
    kl3,
    kl3_gauss_decomposition_check,
    kloosterman,
    quadratic_gauss_closed_form,
    quadratic_gauss_direct,
    weil_bound_check,
)
from .lfunctions import AfeConfig, export_values_csv, required_length
from .moments import (
    MomentResult,
    MomentRunConfig,
    append_result,
    delta_pipeline_check,
    first_moment,
    nonvanishing_count,
    orthogonality_reduction_check,
    s4_remaining_terms,
    second_moment,
    shifted_convolution_grid,
)
from .report import VerificationReport, write_csv, write_json
from .residue import PrimePower, is_prime
from .smooth import QuadratureError, DeltaSymbolConfig, delta_direct, export_regime_csv, regime_scan, regime_scan_points
from .voronoi import case_matrix, classical_sides, export_case_csv, hecke_recombination_check, modified_sides, ep_orthogonality_check

SUBCOMMANDS = (
    "verify-identities",
    "expsum",
    "voronoi",
    "delta",
    "moment2",
    "moment1",
    "shifted-conv",
    "s4-terms",
    "nonvanish",
    "regime-scan",
    "coeff-cache",
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    outputs: list[str] = field(default_factory=list)
    timestamp: str = ""
    version: str = __version__


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# suites


def identity_suite(primes=(3, 5, 7, 11, 13), c_values=(16, 32, 64), gauss_primes_max: int = 31) -> VerificationReport:
    """Exact identities: conductor drop, orthogonality, delta symbol, Kl3 and quadratic Gauss."""
    rep = VerificationReport("exact identities")
    for p in primes:
        alpha = DirichletCharacter(PrimePower(p, 3), 1)
        a = postnikov_constant(alpha).a_alpha
        rep.add(f"conductor-drop p={p}", "alpha(n + p^2 l) conj(alpha(n)) = e_p(a l nbar) for all n, l", 0.0, 0.0, a_alpha=a)
        rep.extend(orthogonality_check(PrimePower(p, 3)))
        rep.add(f"character-table p={p}", "full character table is unitary", full_table_orthogonality(PrimePower(p, 2)), 1e-9)
        worst = 0.0
        for r in range(1, p):
            sub = kl3_gauss_decomposition_check(r, p)
            worst = max(worst, sub.checks[0].measured)
        rep.add(f"kl3-gauss p={p}", "Kl3 as a cubic moment of Gauss sums", worst, 1e-8 * p)
    for C in c_values:
        cfg = DeltaSymbolConfig(float(C * C))
        two_n = int(2 * cfg.N)
        worst = max(abs(delta_direct(n, cfg) - (1.0 if n == 0 else 0.0)) for n in range(-two_n, two_n + 1))
        rep.add(f"delta-symbol C={C}", "delta_direct is the Kronecker delta on |n| <= 2N", worst, 1e-12)
    worst = 0.0
    for p in (q for q in range(3, gauss_primes_max + 1) if is_prime(q)):
        for c in range(1, p):
            for k in range(p):
                worst = max(worst, abs(quadratic_gauss_direct(c, k, p) - quadratic_gauss_closed_form(c, k, p)) / math.sqrt(p))
    rep.add("quadratic-gauss", "closed form of the quadratic Gauss sum", worst, 1e-9)
    return rep


def voronoi_suite(coeffs, rel_tol: float = 1e-5, threads: int = 1) -> tuple[VerificationReport, list[tuple]]:
    rep = VerificationReport("Voronoi case matrix")
    cases = case_matrix()

    def one(pair):
        cl, tw = pair
        return classical_sides(cl, coeffs, rel_tol), modified_sides(tw, coeffs, rel_tol)

    outs = _pmap(one, cases, threads)
    rows = []
    for (cl, tw), (sc, st) in zip(cases, outs):
        tag = f"c={cl.c} a={cl.a} g=[{cl.g.a:g},{cl.g.b:g}]"
        ec = abs(sc["lhs"] - sc["rhs"]) / sc["scale"]
        et = abs(st["lhs"] - st["rhs"]) / st["scale"]
        rep.add(f"classical-voronoi {tag}", "Voronoi summation for level-1 forms", ec, rel_tol, dual_length=sc["dual_length"])
        rep.add(f"twisted-voronoi p={tw.p} r={tw.r} {tag}", "Voronoi summation twisted by e_p(r mbar)", et, rel_tol, dual_lengths=st["dual_lengths"])
        rows.append(("classical", "", cl.c, cl.a, "", cl.g.a, cl.g.b, ec, sc["dual_length"]))
        rows.append(("twisted", tw.p, tw.c, tw.a, tw.r, tw.g.a, tw.g.b, et, st["dual_lengths"][0]))
    for p, r in ((3, 1), (5, 2)):
        rep.extend(ep_orthogonality_check(r, p))
        rep.extend(hecke_recombination_check(coeffs, p))
    return rep, rows


def reduction_suite(coeffs, seed: int = 0) -> VerificationReport:
    rep = VerificationReport("reductions")
    for p, N in ((3, 64), (5, 256)):
        rep.extend(orthogonality_reduction_check(coeffs, MomentRunConfig(p), N))
    rep.extend(s4_remaining_terms(seed=seed))
    rep.extend(delta_pipeline_check(coeffs, MomentRunConfig(3), 512))
    return rep


def _pmap(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def moment_coefficients(p: int, cache_dir: Path | None, X: float = 1.0):
    q = p**3
    need = max(required_length(q, AfeConfig(X=min(max(X, 0.25), 4.0))), 16 * q + 16)
    return load_coefficients(need, cache_dir=cache_dir)


# ---------------------------------------------------------------------------
# argument handling


def _prime(text: str) -> int:
    try:
        p = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from exc
    if p < 3 or not is_prime(p):
        raise argparse.ArgumentTypeError(f"{p} is not an odd prime")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twistlab", description="Numerical checks for twisted central values over a coset of characters.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--p", type=_prime, default=None, help="odd prime")
        sp.add_argument("--weight", type=int, default=12)
        sp.add_argument("--alpha", default="1", help="exponent of alpha mod p^3, or 'all'")
        sp.add_argument("--N", type=float, default=None, help="dyadic scale (coefficient count for coeff-cache)")
        sp.add_argument("--X", type=float, default=None, help="AFE balance parameter")
        sp.add_argument("--tol", type=float, default=None, help="override the headline relative tolerance")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, default=Path("twistlab-out"))
        sp.add_argument("--cache-dir", type=Path, default=None, help=f"coefficient cache (default ${CACHE_ENV} or ~/.cache/twistlab)")
    return parser


def _alphas(args, p: int) -> list[int]:
    phi = (p - 1) * p * p
    if args.alpha == "all":
        return [e for e in range(1, phi) if e % p]
    try:
        e = int(args.alpha)
    except ValueError as exc:
        raise UsageError(f"--alpha must be an integer or 'all', not {args.alpha!r}") from exc
    if e % p == 0:
        raise UsageError(f"alpha exponent {e} gives an imprimitive character mod {p}^3")
    return [e]


def _validate(args) -> None:
    if args.weight != 12:
        raise UsageError("only weight 12 is implemented")
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if args.X is not None and not 0.25 <= args.X <= 4.0:
        raise UsageError("--X must lie in [1/4, 4]")
    if args.tol is not None and not args.tol > 0:
        raise UsageError("--tol must be positive")
    if args.N is not None and args.N <= 0:
        raise UsageError("--N must be positive")
    if args.p is not None:
        _alphas(args, args.p)


def _with_tol(default: float, args) -> float:
    return default if args.tol is None else args.tol


# ---------------------------------------------------------------------------
# subcommands; each returns (report, extra payload, csv tables)


def cmd_verify_identities(args):
    primes = (args.p,) if args.p else (3, 5, 7, 11, 13)
    return identity_suite(primes), {}, {}


def cmd_expsum(args):
    p = args.p or 7
    rep = VerificationReport(f"exponential sums p={p}")
    rows = []
    for b in range(1, p):
        rep.extend(weil_bound_check(1, b, p))
        rows.append(("kloosterman", p, (1, b), kloosterman(1, b, p).value))
    for r in range(1, p):
        rep.extend(kl3_gauss_decomposition_check(r, p))
        rows.append(("kl3", p, (r, 1, 1), kl3(r, 1, 1, p).value))
    worst = max(abs(quadratic_gauss_direct(c, k, p) - quadratic_gauss_closed_form(c, k, p)) for c in range(1, p) for k in range(p))
    rep.add("quadratic-gauss", "closed form of the quadratic Gauss sum", worst / math.sqrt(p), 1e-9)
    return rep, {}, {"family.csv": ("family", rows)}


def cmd_voronoi(args):
    coeffs = load_coefficients(60000, cache_dir=args.cache_dir)
    rep, rows = voronoi_suite(coeffs, _with_tol(1e-5, args), args.threads)
    return rep, {}, {"cases.csv": ("voronoi", rows)}


def cmd_delta(args):
    p = args.p or 3
    N = int(args.N or 512)
    if N > 4096:
        raise UsageError("--N must be at most 4096 for the delta pipeline")
    # the dual cell reads lambda(n) up to its n-length of 8000
    coeffs = load_coefficients(max(4 * N, 8000) + 64, cache_dir=args.cache_dir)
    rep = delta_pipeline_check(coeffs, MomentRunConfig(p, alpha_exponent=_alphas(args, p)[0]), N)
    if args.tol is not None:
        for chk in rep.checks:
            if chk.name == "pre-voronoi":
                chk.tolerance = args.tol
                chk.passed = chk.measured <= args.tol
    return rep, {}, {}


def _ledger(args, cfg: MomentRunConfig, result: MomentResult) -> None:
    append_result(args.out / "results.jsonl", cfg, result)


def cmd_moment2(args):
    p = args.p or 5
    coeffs = moment_coefficients(p, args.cache_dir, args.X or 1.0)
    rep = VerificationReport(f"second moment p={p}")
    values_out, extra = {}, {"results": []}
    for e in _alphas(args, p):
        cfg = MomentRunConfig(p, alpha_exponent=e, seed=args.seed)
        res, values = second_moment(coeffs, cfg, args.X or 1.0)
        rep.add(f"nonnegative alpha={e}", "M >= 0", -res.second_moment, 0.0)
        rep.add(f"single-term alpha={e}", "M >= |L(1/2, f x alpha)|^2", res.extra["single_term"] - res.second_moment, 0.0)
        rep.add(
            f"conjugation alpha={e}",
            "M over psi equals M over conj(psi)",
            abs(res.extra["conjugate_order_M"] - res.second_moment) / res.second_moment,
            1e-9,
        )
        extra["results"].append(asdict(res))
        values_out[f"values_alpha{e}.csv"] = ("values", values)
        _ledger(args, cfg, res)
    return rep, extra, values_out


def cmd_moment1(args):
    p = args.p or 5
    coeffs = moment_coefficients(p, args.cache_dir, math.sqrt(p))
    rep = VerificationReport(f"first moment p={p}")
    extra = {"results": []}
    for e in _alphas(args, p):
        cfg = MomentRunConfig(p, alpha_exponent=e, seed=args.seed)
        res, sub = first_moment(coeffs, cfg)
        if args.tol is not None:
            for chk in sub.checks:
                if chk.name == "routes-agree":
                    chk.tolerance = args.tol
                    chk.passed = chk.measured <= args.tol
        for chk in sub.checks:
            chk.name = f"{chk.name} alpha={e}"
        rep.extend(sub)
        extra["results"].append(asdict(res))
        _ledger(args, cfg, res)
    return rep, extra, {}


def cmd_nonvanish(args):
    p = args.p or 5
    coeffs = moment_coefficients(p, args.cache_dir, math.sqrt(p))
    rep = VerificationReport(f"non-vanishing p={p}")
    extra = {"results": []}
    for e in _alphas(args, p):
        cfg = MomentRunConfig(p, alpha_exponent=e, seed=args.seed)
        res, values = second_moment(coeffs, cfg, args.X or 1.0)
        count, sub = nonvanishing_count(values)
        res.nonvanishing = count
        res.first_moment = complex(np.sum(values))
        for chk in sub.checks:
            chk.name = f"{chk.name} alpha={e}"
        rep.extend(sub)
        extra["results"].append(asdict(res))
        _ledger(args, cfg, res)
    return rep, extra, {}


def cmd_shifted_conv(args):
    primes = (args.p,) if args.p else (3, 5, 7)
    coeffs = load_coefficients(8 * max(primes) ** 3 + 64, cache_dir=args.cache_dir)
    fractions = (args.N / max(primes) ** 3,) if args.N else (0.25, 0.5, 1.0, 2.0)
    rows, rep = shifted_convolution_grid(coeffs, primes, fractions, _alphas(args, primes[0])[0])
    table = [(r["p"], r["N"], r["S1"].real, r["S1"].imag, r["ratio"], abs(r["S2"]), r["S2_bound"], r["l_max"]) for r in rows]
    return rep, {"rows": rows}, {"table.csv": ("table", (["p", "N", "re_S", "im_S", "abs_S_over_N", "abs_S2", "S2_trivial_bound", "l_max"], table))}


def cmd_s4_terms(args):
    return s4_remaining_terms(seed=args.seed), {}, {}


def cmd_regime_scan(args):
    primes = (args.p,) if args.p else None
    pts = regime_scan_points(primes) if primes else regime_scan_points()
    rep, results = regime_scan(pts, args.threads)
    return rep, {}, {"points.csv": ("regime", results)}


def cmd_coeff_cache(args):
    n_max = int(args.N or 60000)
    t0 = time.perf_counter()
    cached = load_coefficients(n_max, args.weight, args.cache_dir)
    print(f"twistlab: cache holds {cached.n_max} coefficients", file=sys.stderr)
    # checks run on the requested range so the report does not depend on earlier runs
    coeffs = HeckeCoefficients(cached.weight, n_max, cached.tau[: n_max + 1], cached.lam[: n_max + 1])
    rep = VerificationReport(f"coefficient cache n_max={n_max}")
    rep.timings["load"] = time.perf_counter() - t0
    rep.add("tau-2", "tau(2) = -24", abs(coeffs.tau[2] + 24), 0.0)
    for p, n in ((2, 3), (3, 5), (5, 7)):
        if p * p * n <= coeffs.n_max:
            rep.extend(hecke_relation_check(coeffs, p, n))
    rep.extend(deligne_bound_check(coeffs))
    return rep, {"n_max": n_max}, {}


HANDLERS = {
    "verify-identities": cmd_verify_identities,
    "expsum": cmd_expsum,
    "voronoi": cmd_voronoi,
    "delta": cmd_delta,
    "moment2": cmd_moment2,
    "moment1": cmd_moment1,
    "shifted-conv": cmd_shifted_conv,
    "s4-terms": cmd_s4_terms,
    "nonvanish": cmd_nonvanish,
    "regime-scan": cmd_regime_scan,
    "coeff-cache": cmd_coeff_cache,
}


def _write_tables(out: Path, stem: str, tables: dict) -> list[str]:
    written = []
    for name, (kind, payload) in tables.items():
        path = out / f"{stem}_{name}"
        if kind == "family":
            dump_family_csv(path, payload)
        elif kind == "voronoi":
            export_case_csv(path, payload)
        elif kind == "values":
            export_values_csv(path, payload)
        elif kind == "regime":
            export_regime_csv(path, payload)
        else:
            header, rows = payload
            write_csv(path, header, rows)
        written.append(str(path))
    return written


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(args)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except UsageError as exc:
        print(f"twistlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in ("subcommand", "out")}
    manifest = RunManifest(args.subcommand, params, timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
    try:
        t0 = time.perf_counter()
        rep, extra, tables = HANDLERS[args.subcommand](args)
        rep.timings["total"] = time.perf_counter() - t0
    except UsageError as exc:
        print(f"twistlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IndexError, OSError, QuadratureError, RuntimeError, MemoryError) as exc:
        print(f"twistlab: resource failure: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    args.out.mkdir(parents=True, exist_ok=True)
    stem = args.subcommand.replace("-", "_")
    manifest.outputs = _write_tables(args.out, stem, tables)
    report_path = args.out / f"{stem}.json"
    manifest.outputs.insert(0, str(report_path))
    payload = {"manifest": asdict(manifest), "report": rep.as_dict(), "extra": extra}
    write_json(report_path, payload)
    for line in rep.summary_lines():
        print(line)
    print(f"{'PASS' if rep.passed else 'FAIL'} {rep.title} -> {report_path}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def main() -> None:
    sys.exit(run())
