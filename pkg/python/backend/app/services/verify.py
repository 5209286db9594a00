"""
Cross-route check suite behind `jacobichain verify`.

Every check draws its instances from one seeded numpy Generator, so a given
(seed, max_N, perturb, cases) always produces the same report.  A check
returns CheckResult(name, max_error, tol, passed); the suite passes when all
of them do.

perturb != 0 adds that amount to J_0 of every chain handed to the oracle,
which must break triple agreement.
"""
from __future__ import annotations

import cmath
import logging
import math
from typing import Callable

import numpy as np
from scipy.linalg import expm

from app.models import CheckResult, FamilyKind, FamilySpec, Method, VerifyReport
from app.services import chain as chain_svc
from app.services import dynamics, oracle, polyfam

logger = logging.getLogger("jacobichain.verify")

FINITE_ORDER = (FamilyKind.KRAWTCHOUK, FamilyKind.HAHN, FamilyKind.DUALHAHN, FamilyKind.RACAH)

_L0 = np.diag([0.5, -0.5]).astype(complex)
_LPLUS = np.array([[0, 1], [0, 0]], dtype=complex)
_LMINUS = _LPLUS.T.copy()


def _result(name: str, err: float, tol: float) -> CheckResult:
    err = float(err)
    passed = math.isfinite(err) and err <= tol
    return CheckResult(name=name, max_error=err, tol=tol, passed=passed)


# ── Random instances ──────────────────────────────────────────────────────────

def random_spec(kind: FamilyKind, rng: np.random.Generator, max_N: int) -> FamilySpec:
    N = int(rng.integers(1, max_N + 1))
    if kind == FamilyKind.KRAWTCHOUK:
        return FamilySpec.krawtchouk(N, float(rng.uniform(0.05, 0.95)))
    if kind == FamilyKind.HAHN:
        return FamilySpec.hahn(N, float(rng.uniform(-0.9, 4.0)), float(rng.uniform(-0.9, 4.0)))
    if kind == FamilyKind.DUALHAHN:
        return FamilySpec.dualhahn(N, float(rng.uniform(-0.9, 4.0)), float(rng.uniform(-0.9, 4.0)))
    if kind == FamilyKind.RACAH:
        gamma = float(rng.uniform(-0.9, 3.0))
        delta = float(rng.uniform(-0.9, 3.0))
        beta = gamma + N + float(rng.uniform(0.5, 5.0))
        return FamilySpec.racah(N, beta, gamma, delta)
    raise ValueError(f"no random finite spec for {kind}")


def _oracle_chain(spec: FamilySpec, perturb: float):
    built = chain_svc.build_chain(spec)
    if perturb and built.N >= 1:
        return chain_svc.perturb(built, 0, perturb)
    return built


# ── Checks ────────────────────────────────────────────────────────────────────

def check_triple_agreement(
    kind: FamilyKind, rng: np.random.Generator, max_N: int, cases: int, perturb: float
) -> list[CheckResult]:
    """|closed - spectral| and |spectral - oracle| over random (spec, r, s, t)."""
    closed_err = oracle_err = 0.0
    for _ in range(cases):
        spec = random_spec(kind, rng, min(max_N, 16))
        r = int(rng.integers(0, spec.N + 1))
        s = int(rng.integers(0, spec.N + 1))
        t = float(rng.uniform(0.0, 2 * math.pi))
        spectral = dynamics.amplitude_spectral(spec, r, s, t)
        closed = dynamics.amplitude_closed(spec, r, s, t)
        column = oracle.evolve_oracle(_oracle_chain(spec, perturb), s, t)
        closed_err = max(closed_err, abs(closed - spectral))
        oracle_err = max(oracle_err, abs(spectral - column[r]))
    return [
        _result(f"triple_agreement.{kind.value}.closed_vs_spectral", closed_err, 1e-9),
        _result(f"triple_agreement.{kind.value}.spectral_vs_oracle", oracle_err, 1e-9),
    ]


def check_unitarity(rng: np.random.Generator, max_N: int) -> CheckResult:
    worst = 0.0
    for kind in FINITE_ORDER:
        spec = random_spec(kind, rng, max_N)
        F = dynamics.amplitude_matrix_spectral(spec, float(rng.uniform(0.0, 2 * math.pi)))
        worst = max(worst, float(np.max(np.abs(F.conj().T @ F - np.eye(spec.N + 1)))))
    return _result("unitarity", worst, 1e-9)


def check_t_zero(rng: np.random.Generator, max_N: int) -> CheckResult:
    worst = 0.0
    for kind in FINITE_ORDER:
        spec = random_spec(kind, rng, min(max_N, 8))
        for r in range(spec.N + 1):
            for s in range(spec.N + 1):
                for method in (Method.SPECTRAL, Method.CLOSED):
                    value = dynamics.amplitude(spec, r, s, 0.0, method)
                    worst = max(worst, abs(value - (1.0 if r == s else 0.0)))
    return _result("t_zero_delta", worst, 1e-12)


def check_periodicity(rng: np.random.Generator, max_N: int) -> CheckResult:
    """Integer spectra: f(t) = f(t + 2 pi)."""
    N = min(max_N, 12)
    gamma = float(rng.uniform(-0.5, 2.0))
    specs = [
        FamilySpec.krawtchouk(N, float(rng.uniform(0.1, 0.9))),
        FamilySpec.hahn(N, float(rng.uniform(-0.5, 3.0)), float(rng.uniform(-0.5, 3.0))),
        FamilySpec.dualhahn(N, gamma, float(int(rng.integers(1, 4))) - gamma),
    ]
    worst = 0.0
    for spec in specs:
        for _ in range(4):
            r = int(rng.integers(0, N + 1))
            s = int(rng.integers(0, N + 1))
            t = float(rng.uniform(0.1, 3.0))
            a = dynamics.amplitude_spectral(spec, r, s, t)
            b = dynamics.amplitude_spectral(spec, r, s, t + 2 * math.pi)
            worst = max(worst, abs(a - b))
    return _result("periodicity_2pi", worst, 1e-10)


def check_symmetry(rng: np.random.Generator, max_N: int) -> CheckResult:
    """f_{r,s} = f_{s,r}: the closed form at (r, s) against the eigen-decomposed chain at (s, r)."""
    worst = 0.0
    for kind in FINITE_ORDER:
        spec = random_spec(kind, rng, min(max_N, 12))
        t = float(rng.uniform(0.1, 6.0))
        U = oracle.evolve_matrix(chain_svc.build_chain(spec), t)
        worst = max(worst, float(np.max(np.abs(U - U.T))))
        for _ in range(4):
            r = int(rng.integers(0, spec.N + 1))
            s = int(rng.integers(0, spec.N + 1))
            worst = max(worst, abs(dynamics.amplitude_closed(spec, r, s, t) - U[s, r]))
    return _result("symmetry_rs", worst, 1e-9)


def check_equivalences(rng: np.random.Generator, max_N: int) -> list[CheckResult]:
    """Sign flip f' = (-1)^{r+s} f and affine f'(t) = e^{-i t mu} f(lam t) on Krawtchouk chains."""
    flip_err = affine_err = 0.0
    for _ in range(20):
        spec = random_spec(FamilyKind.KRAWTCHOUK, rng, min(max_N, 16))
        built = chain_svc.build_chain(spec)
        t = float(rng.uniform(0.0, 2 * math.pi))
        lam = float(rng.uniform(0.2, 3.0)) * (1 if rng.random() < 0.5 else -1)
        mu = float(rng.uniform(-3.0, 3.0))
        base = oracle.evolve_matrix(built, t)
        signs = np.array([[(-1.0) ** (r + s) for s in range(built.size)] for r in range(built.size)])
        flipped = oracle.evolve_matrix(chain_svc.flip_sign(built), t)
        flip_err = max(flip_err, float(np.max(np.abs(flipped - signs * base))))
        moved = oracle.evolve_matrix(chain_svc.affine_transform(built, lam, mu), t)
        expected = cmath.exp(-1j * t * mu) * oracle.evolve_matrix(built, lam * t)
        affine_err = max(affine_err, float(np.max(np.abs(moved - expected))))
    return [_result("sign_flip", flip_err, 1e-11), _result("affine", affine_err, 1e-11)]


def check_krawtchouk_pst() -> CheckResult:
    worst = 0.0
    for N in (4, 16, 64):
        spec = FamilySpec.krawtchouk(N, 0.5)
        for r in range(N + 1):
            value = abs(dynamics.amplitude_krawtchouk(spec, r, 0, math.pi))
            worst = max(worst, abs(value - (1.0 if r == N else 0.0)))
    return _result("krawtchouk_pst", worst, 1e-9)


def check_hahn_bound() -> CheckResult:
    """|f_{N,0}(pi)| < 1 and increasing in alpha = beta (reported error <= 0 when that holds)."""
    values = [dynamics.hahn_fN0_abs_symmetric(a, 8, math.pi) for a in (0.0, 1.0, 5.0, 50.0)]
    violation = max([v - 1.0 for v in values] + [a - b for a, b in zip(values, values[1:])])
    return CheckResult(
        name="hahn_fN0_bound", max_error=max(violation, 0.0), tol=0.0, passed=bool(violation < 0.0)
    )


def check_dualhahn_pst() -> CheckResult:
    worst = 0.0
    for p, q in ((0, 1), (1, 2), (2, 3)):
        g, t_star = dynamics.dualhahn_pst_parameter(p, q)
        for N in (3, 8):
            spec = FamilySpec.dualhahn(N, g, g)
            worst = max(worst, 1.0 - abs(dynamics.amplitude_dualhahn(spec, N, 0, t_star)))
    return _result("dualhahn_pst", worst, 1e-8)


def check_dualhahn_odd_sum(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(20):
        odd = int(rng.choice([1, 3, 5]))
        gamma = float(rng.uniform(-0.9, odd - 0.1))
        N = int(rng.integers(1, 11))
        spec = FamilySpec.dualhahn(N, gamma, odd - gamma)
        expected = dynamics.dualhahn_fN0_at_pi(gamma, odd - gamma, N)
        got = dynamics.amplitude_dualhahn(spec, N, 0, math.pi)
        worst = max(worst, abs(got - expected) / abs(expected))
    return _result("dualhahn_fN0_at_pi", worst, 1e-10)


def check_racah(rng: np.random.Generator) -> list[CheckResult]:
    limit_err = sum_err = 0.0
    for _ in range(10):
        odd = int(rng.choice([1, 3]))
        gamma = float(rng.uniform(-0.9, odd - 0.1))
        N = int(rng.integers(1, 9))
        racah = dynamics.racah_fN0_at_pi(1e8, gamma, odd - gamma, N)
        dual = dynamics.dualhahn_fN0_at_pi(gamma, odd - gamma, N)
        limit_err = max(limit_err, abs(racah - dual))
    for _ in range(20):
        spec = random_spec(FamilyKind.RACAH, rng, 8)
        t = float(rng.uniform(0.0, 2 * math.pi))
        sum_err = max(sum_err, abs(dynamics.racah_fN0(spec, t) - dynamics.amplitude_spectral(spec, spec.N, 0, t)))
    return [_result("racah_limit_beta", limit_err, 1e-6), _result("racah_sum_vs_spectral", sum_err, 1e-9)]


def _spread_checks(name: str, spec: FamilySpec, closed_fr0, formula, r_max: int) -> list[CheckResult]:
    formula_err = 0.0
    total = 0.0
    for r in range(r_max + 1):
        value = closed_fr0(r)
        formula_err = max(formula_err, abs(value - formula(r)))
    # Sum of squares needs the whole tail, not only r <= r_max.
    K = polyfam.dynamic_kmax(spec)
    for r in range(K + 1):
        total += abs(closed_fr0(r)) ** 2
    column = oracle.evolve_oracle(oracle.truncated_chain(spec, K), 0, math.pi)
    oracle_err = max(abs(column[r] - closed_fr0(r)) for r in range(r_max + 1))
    return [
        _result(f"{name}.fr0_at_pi", formula_err, 1e-12),
        _result(f"{name}.sum_of_squares", abs(total - 1.0), 1e-10),
        _result(f"{name}.truncated_oracle", oracle_err, 1e-8),
    ]


def check_charlier_spread() -> list[CheckResult]:
    out: list[CheckResult] = []
    for alpha in (0.5, 1.0, 2.0):
        spec = FamilySpec.charlier(alpha)
        out.extend(
            _spread_checks(
                f"charlier[alpha={alpha:g}]",
                spec,
                lambda r, a=alpha: dynamics.amplitude_charlier(a, r, 0, math.pi),
                lambda r, a=alpha: dynamics.charlier_fr0_at_pi(a, r),
                20,
            )
        )
    return out


def check_meixner_spread() -> list[CheckResult]:
    spec = FamilySpec.meixner(1.0, 0.5)
    return _spread_checks(
        "meixner[b=1,c=0.5]",
        spec,
        lambda r: dynamics.amplitude_meixner(1.0, 0.5, r, 0, math.pi),
        lambda r: (1.0 / 3.0) * (math.sqrt(8.0) / 3.0) ** r,
        15,
    )


def check_limits() -> list[CheckResult]:
    amp_err = 0.0
    alpha = 1.0
    N = 2000
    kraw = FamilySpec.krawtchouk(N, alpha / N)
    for r in range(5):
        for s in range(5):
            amp_err = max(
                amp_err,
                abs(dynamics.amplitude_krawtchouk(kraw, r, s, 1.0) - dynamics.amplitude_charlier(alpha, r, s, 1.0)),
            )
    poly_kc = max(polyfam.limit_krawtchouk_to_charlier(n, x, alpha, 20000) for n in range(4) for x in range(4))
    poly_hm = max(polyfam.limit_hahn_to_meixner(n, x, 1.5, 0.4, 20000) for n in range(4) for x in range(4))
    return [
        _result("limit.krawtchouk_to_charlier.amplitude", amp_err, 5e-3),
        _result("limit.krawtchouk_to_charlier.polynomial", poly_kc, 1e-2),
        _result("limit.hahn_to_meixner.polynomial", poly_hm, 1e-2),
    ]


def check_bch(rng: np.random.Generator) -> list[CheckResult]:
    product_err = element_err = 0.0
    for _ in range(100):
        p = float(rng.uniform(0.02, 0.98))
        t = float(rng.uniform(-2 * math.pi, 2 * math.pi))
        direct = expm(-1j * t * (2 * p - 1) * _L0 + 1j * t * math.sqrt(p * (1 - p)) * (_LPLUS + _LMINUS))
        product_err = max(product_err, float(np.max(np.abs(dynamics.bch_su2_product(p, t) - direct))))
    for _ in range(10):
        p = float(rng.uniform(0.05, 0.95))
        t = float(rng.uniform(0.1, 6.0))
        N = int(rng.integers(1, 7))
        spec = FamilySpec.krawtchouk(N, p)
        for r in range(N + 1):
            for s in range(N + 1):
                element_err = max(
                    element_err,
                    abs(dynamics.bch_matrix_element(p, N, r, s, t) - dynamics.amplitude_krawtchouk(spec, r, s, t)),
                )
    return [_result("bch.su2_product", product_err, 1e-12), _result("bch.matrix_element", element_err, 1e-10)]


# ── Suite ─────────────────────────────────────────────────────────────────────

def run_verify(seed: int = 0, max_N: int = 16, perturb: float = 0.0, cases: int = 20) -> VerifyReport:
    """Run every check; instances are drawn in a fixed order from default_rng(seed)."""
    rng = np.random.default_rng(seed)
    report = VerifyReport(seed=seed, max_N=max_N, perturb=perturb)
    steps: list[Callable[[], object]] = [
        *(lambda k=k: check_triple_agreement(k, rng, max_N, cases, perturb) for k in FINITE_ORDER),
        lambda: check_unitarity(rng, max_N),
        lambda: check_t_zero(rng, max_N),
        lambda: check_periodicity(rng, max_N),
        lambda: check_symmetry(rng, max_N),
        lambda: check_equivalences(rng, max_N),
        check_krawtchouk_pst,
        check_hahn_bound,
        check_dualhahn_pst,
        lambda: check_dualhahn_odd_sum(rng),
        lambda: check_racah(rng),
        check_charlier_spread,
        check_meixner_spread,
        check_limits,
        lambda: check_bch(rng),
    ]
    for step in steps:
        produced = step()
        for result in produced if isinstance(produced, list) else [produced]:
            report.checks.append(result)
            if result.passed:
                logger.info("[verify] %s ok (max_error=%.3g)", result.name, result.max_error)
            else:
                logger.warning(
                    "[verify] %s FAILED (max_error=%.3g tol=%.3g)", result.name, result.max_error, result.tol
                )
    return report
