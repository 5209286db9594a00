"""
Transition amplitudes f_{r,s}(t) = (r| exp(-i t M) |s) of the family chains.

Routes
------
  spectral   sum_j U_{rj} U_{sj} exp(-i t eps_j) from chain.spectral_data
  closed     per-family hypergeometric expressions (below)
  oracle     numerical eigen-decomposition of the (truncated) chain

Closed forms (z = exp(-i t)):
  krawtchouk  sqrt(C(N,r) C(N,s)) (p(1-p))^{(r+s)/2} (1-z)^{r+s} (1-p+pz)^{N-r-s}
              2F1(-r, -s; -N; -z / (p(1-p)(1-z)^2))
  charlier    sqrt(alpha^{r+s} / (r! s!)) (1-z)^{r+s} e^{-alpha + alpha z}
              2F0(-r, -s; ; z / (alpha (1-z)^2))
  meixner     (1-c)^b sqrt((b)_r (b)_s / (r! s!)) c^{(r+s)/2} (1-z)^{r+s} / (1-cz)^{b+r+s}
              2F1(-r, -s; b; c (1 - 1/c)^2 z / (1-z)^2)
  hahn        S(r,s) / sqrt(d_r d_s) from the very-well-poised 8F7(-1) product formula
  dualhahn    m-sum of 4F3(1) values times a k-sum over the quadratic spectrum
  racah       f_{N,0} single sum; other pairs go through the spectral route

In the Hahn and dual Hahn sums the outer factors (r-N)_m, (s-N)_m are paired
with the inner denominators (N+1-r-m)_j, (N+1-s-m)_j:

    (r-N)_m / (N+1-r-m)_j = (-1)^m (N+1-r-m+j)_{m-j}

which is finite for every j <= m, so both sums are evaluated without 0/0.
"""
from __future__ import annotations

import cmath
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar

from app.config import settings
from app.exceptions import InvalidSpec, OutOfSupport
from app.models import (
    AmplitudeGrid,
    DenseSpectrum,
    FamilyKind,
    FamilySpec,
    Method,
    PstEvent,
    SignConvention,
)
from app.services import chain as chain_svc
from app.services import oracle, polyfam
from app.services.hypergeom import (
    HypSeriesSpec,
    SignedLog,
    eval_phq_stable,
    log_binomial,
    log_factorial,
    log_pochhammer,
    mp_context,
    nonpositive_integer,
    series_terms,
    slog_prod,
)

logger = logging.getLogger("jacobichain.dynamics")

# Working precision (decimal digits) of the Hahn / dual Hahn / Racah sums
_CLOSED_DPS = 40


# ── Helpers ───────────────────────────────────────────────────────────────────

def _z(t: float) -> complex:
    return cmath.exp(-1j * t)


def _one_minus_z(t: float) -> complex:
    """1 - exp(-i t) as 2i sin(t/2) exp(-i t/2), without cancellation at small t."""
    return 2j * math.sin(0.5 * t) * cmath.exp(-0.5j * t)


def _near_identity(t: float) -> bool:
    """z = 1 up to Z_ONE_TOL: the integer-spectrum closed forms have a removable singularity there."""
    return abs(1.0 - _z(t)) < settings.Z_ONE_TOL


def _at_origin(t: float) -> bool:
    # quadratic spectra are not 2 pi periodic
    return abs(t) < settings.Z_ONE_TOL


def _delta(r: int, s: int) -> complex:
    return complex(1.0 if r == s else 0.0)


def _check_sites(spec: FamilySpec, *sites: int) -> None:
    for x in sites:
        if x < 0:
            raise OutOfSupport(f"site {x} < 0")
        if spec.is_finite and x > spec.N:
            raise OutOfSupport(f"site {x} outside 0..{spec.N}")


def _inv_sqrt_norms(spec: FamilySpec, r: int, s: int) -> float:
    return (polyfam.norm_d(spec, r) * polyfam.norm_d(spec, s)).sqrt().inverse().to_float()


def _paired(ctx: mpmath.MPContext, N: int, r: int, m: int, j: int):
    """(r-N)_m / (N+1-r-m)_j as the finite product (-1)^m (N+1-r-m+j)_{m-j}."""
    value = ctx.rf(N + 1 - r - m + j, m - j)
    return -value if m % 2 else value


def _hyp_scaled(numerators, denominators, w: complex, log_prefactor: complex) -> complex:
    """exp(log_prefactor) pFq(numerators; denominators; w), multiplied out before rounding.

    Near z = 1 the series outgrows the float range while the prefactor
    underflows; both stay mpmath numbers until the product is formed.
    """
    ctx = mp_context(_CLOSED_DPS)
    series = ctx.convert(eval_phq_stable(HypSeriesSpec.of(numerators, denominators, w), exact=True))
    return complex(series * ctx.exp(ctx.mpc(log_prefactor)))


# ── Spectral route ────────────────────────────────────────────────────────────

def amplitude_spectral(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    """sum_j U_{rj} U_{sj} exp(-i t eps_j)."""
    spec.check()
    if not spec.is_finite:
        raise InvalidSpec(f"{spec.kind.value} has no finite spectrum; use the closed form or the oracle")
    _check_sites(spec, r, s)
    data = chain_svc.spectral_data(spec)
    return complex(np.sum(data.U[r, :] * data.U[s, :] * np.exp(-1j * t * data.eigenvalues)))


def amplitude_matrix_spectral(spec: FamilySpec, t: float) -> np.ndarray:
    data = chain_svc.spectral_data(spec)
    return (data.U * np.exp(-1j * t * data.eigenvalues)) @ data.U.T


# ── Krawtchouk ────────────────────────────────────────────────────────────────

def amplitude_krawtchouk(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    spec.check()
    if spec.kind != FamilyKind.KRAWTCHOUK:
        raise InvalidSpec(f"expected krawtchouk, got {spec.kind.value}")
    _check_sites(spec, r, s)
    if _near_identity(t):
        return _delta(r, s)
    N, p = spec.N, spec.p
    if r + s > N:
        # Mirror image of the chain is the Krawtchouk chain with 1 - p.
        return amplitude_krawtchouk(FamilySpec.krawtchouk(N, 1.0 - p), N - r, N - s, t)
    z = _z(t)
    omz = _one_minus_z(t)
    q = p * (1.0 - p)
    tail = 1.0 - p * omz
    if tail == 0 and N > r + s:
        return 0j
    log_pref = (
        (log_binomial(N, r) * log_binomial(N, s)).sqrt().logmag
        + 0.5 * (r + s) * math.log(q)
        + (r + s) * cmath.log(omz)
        + ((N - r - s) * cmath.log(tail) if N > r + s else 0.0)
    )
    return _hyp_scaled([-r, -s], [-N], -z / (q * omz ** 2), log_pref)


def krawtchouk_fr0_abs_half(N: int, r: int, t: float) -> float:
    """|f_{r,0}(t)| at p = 1/2: sqrt(C(N,r)) |sin(t/2)|^r |cos(t/2)|^{N-r}."""
    return math.sqrt(math.comb(N, r)) * abs(math.sin(t / 2)) ** r * abs(math.cos(t / 2)) ** (N - r)


# ── Charlier / Meixner ────────────────────────────────────────────────────────

def amplitude_charlier(alpha: float, r: int, s: int, t: float) -> complex:
    FamilySpec.charlier(alpha, K_max=max(r, s, 1))
    if r < 0 or s < 0:
        raise OutOfSupport(f"sites ({r}, {s}) must be >= 0")
    if _near_identity(t):
        return _delta(r, s)
    z = _z(t)
    omz = _one_minus_z(t)
    log_pref = (
        0.5 * ((r + s) * math.log(alpha) - log_factorial(r) - log_factorial(s))
        + (r + s) * cmath.log(omz)
        - alpha * omz
    )
    return _hyp_scaled([-r, -s], [], z / (alpha * omz ** 2), log_pref)


def charlier_fr0_at_pi(alpha: float, r: int) -> float:
    """f_{r,0}(pi) = e^{-2 alpha} sqrt((4 alpha)^r / r!)."""
    return math.exp(-2.0 * alpha + 0.5 * (r * math.log(4.0 * alpha) - log_factorial(r)))


def amplitude_meixner(b: float, c: float, r: int, s: int, t: float) -> complex:
    FamilySpec.meixner(b, c, K_max=max(r, s, 1))
    if r < 0 or s < 0:
        raise OutOfSupport(f"sites ({r}, {s}) must be >= 0")
    if _near_identity(t):
        return _delta(r, s)
    z = _z(t)
    log_pref = (
        b * math.log1p(-c)
        + 0.5 * (log_pochhammer(b, r).logmag + log_pochhammer(b, s).logmag - log_factorial(r) - log_factorial(s))
        + 0.5 * (r + s) * math.log(c)
    )
    omz = _one_minus_z(t)
    w = c * (1.0 - 1.0 / c) ** 2 * z / omz ** 2
    log_pref += (r + s) * cmath.log(omz) - (b + r + s) * cmath.log(1.0 - c * z)
    return _hyp_scaled([-r, -s], [b], w, log_pref)


def meixner_fr0_at_pi(b: float, c: float, r: int) -> float:
    """f_{r,0}(pi) = (1-c)^b sqrt((b)_r / r!) (2 sqrt(c))^r / (1+c)^{b+r}."""
    return math.exp(
        b * math.log1p(-c)
        + 0.5 * (log_pochhammer(b, r).logmag - log_factorial(r))
        + r * math.log(2.0 * math.sqrt(c))
        - (b + r) * math.log1p(c)
    )


# ── Hahn ──────────────────────────────────────────────────────────────────────

def _hahn_direct_sum(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    """S(r,s) = sum_k w(k) Q_r(k) Q_s(k) z^k."""
    z = _z(t)
    total = 0j
    for k in range(spec.N + 1):
        w = polyfam.weight(spec, k).to_float()
        total += w * polyfam.poly_eval(spec, r, k) * polyfam.poly_eval(spec, s, k) * z ** k
    return total


def hahn_sum_S(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    """S(r,s) through the 8F7(-1) product formula (direct sum when (c-m)/2 hits a pole)."""
    N = spec.N
    ctx = mp_context(_CLOSED_DPS)
    a = ctx.mpf(spec.alpha)
    b = ctx.mpf(spec.beta)
    c = N + 1 + a + b
    z = ctx.expj(-t)
    total = ctx.mpc(0)
    for m in range(N + 1):
        half = (c - m) / 2
        if nonpositive_integer(float(half)) is not None:
            logger.debug("[dynamics] hahn 8F7 pole at m=%d, using the direct sum", m)
            return _hahn_direct_sum(spec, r, s, t)
        outer = (
            (-z) ** m
            * (1 - z) ** (N - m)
            * ctx.rf(-r - c, m)
            * ctx.rf(-s - c, m)
            / (ctx.factorial(m) * ctx.rf(-N, m) * ctx.rf(-N - b, m) * ctx.rf(-c, m))
        )
        jmax = min(m, r, s)
        terms = series_terms(
            [c - m, 1 + half, N + b + 1 - m, -m, -r, -s, c + r - N, c + s - N],
            [half, a + 1, c + 1, c + 1 + r - m, c + 1 + s - m],
            ctx.mpf(-1),
            jmax + 1,
        )
        inner = ctx.fsum(T * _paired(ctx, N, r, m, j) * _paired(ctx, N, s, m, j) for j, T in enumerate(terms))
        total += outer * inner
    return complex(total * ctx.rf(b + 1, N) / ctx.factorial(N))


def amplitude_hahn(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    spec.check()
    if spec.kind != FamilyKind.HAHN:
        raise InvalidSpec(f"expected hahn, got {spec.kind.value}")
    _check_sites(spec, r, s)
    if _near_identity(t):
        return _delta(r, s)
    return hahn_sum_S(spec, r, s, t) * _inv_sqrt_norms(spec, r, s)


def amplitude_hahn_r0(spec: FamilySpec, r: int, t: float, form: str = "pfaff") -> complex:
    """f_{r,0}(t) from the s = 0 reduction.

    form="pfaff":  (beta+1)_N / N! (1-z)^r 2F1(r-N, r+alpha+1; -N-beta; z)
    form="direct": (beta+1)_N / N! (1-z)^N 2F1(r-N, -r-c; -N-beta; z/(z-1))
    """
    spec.check()
    _check_sites(spec, r)
    if _near_identity(t):
        return _delta(r, 0)
    N, a, b = spec.N, spec.alpha, spec.beta
    c = N + 1 + a + b
    z = _z(t)
    omz = _one_minus_z(t)
    log_lead = (log_pochhammer(b + 1, N) / SignedLog(1, log_factorial(N))).logmag
    log_lead -= 0.5 * (polyfam.norm_d(spec, r) * polyfam.norm_d(spec, 0)).logmag
    if form == "pfaff":
        return _hyp_scaled([r - N, r + a + 1], [-N - b], z, log_lead + r * cmath.log(omz))
    if form == "direct":
        return _hyp_scaled([r - N, -r - c], [-N - b], -z / omz, log_lead + N * cmath.log(omz))
    raise ValueError(f"unknown form {form!r}")


def hahn_fN0(spec: FamilySpec, t: float) -> complex:
    """f_{N,0}(t) = ((alpha+1, beta+1)_N / ((alpha+beta+2)_N (N+alpha+beta+1)_N))^{1/2} (1-z)^N."""
    N, a, b = spec.N, spec.alpha, spec.beta
    amp = (
        (log_pochhammer(a + 1, N) * log_pochhammer(b + 1, N))
        / (log_pochhammer(a + b + 2, N) * log_pochhammer(N + a + b + 1, N))
    ).sqrt()
    return amp.to_float() * (1 - _z(t)) ** N


def hahn_fN0_abs(spec: FamilySpec, t: float) -> float:
    """|f_{N,0}(t)| with the 2^N |sin(t/2)|^N factor."""
    N, a, b = spec.N, spec.alpha, spec.beta
    amp = (
        (log_pochhammer(a + 1, N) * log_pochhammer(b + 1, N))
        / (log_pochhammer(a + b + 2, N) * log_pochhammer(N + a + b + 1, N))
    ).sqrt()
    return amp.to_float() * 2.0 ** N * abs(math.sin(t / 2)) ** N


def hahn_fN0_abs_symmetric(alpha: float, N: int, t: float) -> float:
    """|f_{N,0}(t)| for beta = alpha: ((alpha+1)_N / ((alpha+3/2)_{N-1} (alpha+N/2+1/2)))^{1/2} |sin(t/2)|^N."""
    ratio = log_pochhammer(alpha + 1, N) / (
        log_pochhammer(alpha + 1.5, N - 1) * SignedLog.from_float(alpha + N / 2 + 0.5)
    )
    return ratio.sqrt().to_float() * abs(math.sin(t / 2)) ** N


# ── Dual Hahn ─────────────────────────────────────────────────────────────────

def _quadratic_weight_factor(ctx: mpmath.MPContext, gd, N: int, k: int, m: int):
    """(g+k+1)_m (g+2k+1) / (g+k+1)_{N+1} with the k = m = 0 limit 1/(g+2)_N."""
    if k == 0 and m == 0:
        return 1 / ctx.rf(gd + 2, N)
    return (gd + 2 * k + 1) / ctx.rf(gd + k + 1 + m, N + 1 - m)


def amplitude_dualhahn(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    spec.check()
    if spec.kind != FamilyKind.DUALHAHN:
        raise InvalidSpec(f"expected dualhahn, got {spec.kind.value}")
    _check_sites(spec, r, s)
    if _at_origin(t):
        return _delta(r, s)
    N = spec.N
    ctx = mp_context(_CLOSED_DPS)
    g = ctx.mpf(spec.gamma)
    d = ctx.mpf(spec.delta)
    gd = g + d
    phases = [ctx.expj(-t * float(polyfam.lattice(spec, k))) for k in range(N + 1)]
    total = ctx.mpc(0)
    for m in range(N + 1):
        jmax = min(m, r, s)
        terms = series_terms([-m, -r, -s, -d - m], [g + 1], ctx.mpf(1), jmax + 1)
        inner = ctx.fsum(T * _paired(ctx, N, r, m, j) * _paired(ctx, N, s, m, j) for j, T in enumerate(terms))
        if inner == 0:
            continue
        coeff = inner / ctx.rf(d + 1, m)
        coeff *= (-1) ** m * ctx.factorial(N - m) ** 2 / (ctx.factorial(m) * ctx.factorial(N))
        ksum = ctx.fsum(
            ctx.rf(-N, k) * _quadratic_weight_factor(ctx, gd, N, k, m) / ctx.factorial(k - m) * phases[k]
            for k in range(m, N + 1)
        )
        total += coeff * ksum
    return complex(total) * _inv_sqrt_norms(spec, r, s)


def dualhahn_fN0(spec: FamilySpec, t: float) -> complex:
    """sqrt((gamma+1, delta+1)_N) sum_k (-N)_k (g+2k+1) / (k! (g+k+1)_{N+1}) z^{lambda(k)}."""
    N = spec.N
    lead = (log_pochhammer(spec.gamma + 1, N) * log_pochhammer(spec.delta + 1, N)).sqrt().to_float()
    ctx = mp_context(_CLOSED_DPS)
    gd = ctx.mpf(spec.gamma) + ctx.mpf(spec.delta)
    total = ctx.fsum(
        ctx.rf(-N, k)
        * _quadratic_weight_factor(ctx, gd, N, k, 0)
        / ctx.factorial(k)
        * ctx.expj(-t * float(polyfam.lattice(spec, k)))
        for k in range(N + 1)
    )
    return lead * complex(total)


def dualhahn_fN0_at_pi(gamma: float, delta: float, N: int) -> float:
    """sqrt((gamma+1)_N (delta+1)_N) / ((gamma+delta)/2 + 1)_N.

    |f_{N,0}(pi)| for gamma + delta an odd integer, and |f_{N,0}(q pi)| for
    gamma + delta = (2p+1)/q, where every phase z^{lambda(k)} is (-1)^k.
    """
    num = (log_pochhammer(gamma + 1, N) * log_pochhammer(delta + 1, N)).sqrt()
    return (num / log_pochhammer((gamma + delta) / 2 + 1, N)).to_float()


def dualhahn_pst_parameter(p: int, q: int) -> tuple[float, float]:
    """gamma = delta = (2p+1)/(2q), with perfect transfer 0 -> N at t = q pi."""
    if p < 0 or q < 1:
        raise InvalidSpec(f"need p >= 0 and q >= 1 (got p={p}, q={q})")
    g = (2 * p + 1) / (2 * q)
    return g, q * math.pi


# ── Racah ─────────────────────────────────────────────────────────────────────

def racah_fN0(spec: FamilySpec, t: float) -> complex:
    """f_{N,0}(t) = 1/sqrt(d_N d_0) sum_k (-N, g+1, (g+3)/2)_k / (k! (g+N+2, (g+1)/2)_k) z^{lambda(k)}."""
    N = spec.N
    ctx = mp_context(_CLOSED_DPS)
    gd = ctx.mpf(spec.gamma) + ctx.mpf(spec.delta)
    total = ctx.mpc(0)
    for k in range(N + 1):
        if k == 0:
            term = ctx.mpf(1)
        else:
            # (g+1)_k ((g+3)/2)_k / ((g+1)/2)_k = (g+2)_{k-1} (g+2k+1)
            term = (
                ctx.rf(-N, k)
                * ctx.rf(gd + 2, k - 1)
                * (gd + 2 * k + 1)
                / (ctx.factorial(k) * ctx.rf(gd + N + 2, k))
            )
        total += term * ctx.expj(-t * float(polyfam.lattice(spec, k)))
    return complex(total) * _inv_sqrt_norms(spec, N, 0)


def racah_fN0_at_pi(beta: float, gamma: float, delta: float, N: int) -> float:
    """sqrt((gamma+1-beta, delta+1+beta)_N / (beta, -beta)_N) times the dual Hahn value, gamma + delta odd."""
    ratio = (log_pochhammer(gamma + 1 - beta, N) * log_pochhammer(delta + 1 + beta, N)) / (
        log_pochhammer(beta, N) * log_pochhammer(-beta, N)
    )
    return ratio.sqrt().to_float() * dualhahn_fN0_at_pi(gamma, delta, N)


def amplitude_racah(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    spec.check()
    if spec.kind != FamilyKind.RACAH:
        raise InvalidSpec(f"expected racah, got {spec.kind.value}")
    _check_sites(spec, r, s)
    if (r, s) == (spec.N, 0) and spec.N > 0:
        if _at_origin(t):
            return _delta(r, s)
        return racah_fN0(spec, t)
    return amplitude_spectral(spec, r, s, t)


# ── Dispatch ──────────────────────────────────────────────────────────────────

def amplitude_closed(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    kind = spec.kind
    if kind == FamilyKind.KRAWTCHOUK:
        return amplitude_krawtchouk(spec, r, s, t)
    if kind == FamilyKind.HAHN:
        return amplitude_hahn(spec, r, s, t)
    if kind == FamilyKind.DUALHAHN:
        return amplitude_dualhahn(spec, r, s, t)
    if kind == FamilyKind.RACAH:
        return amplitude_racah(spec, r, s, t)
    if kind == FamilyKind.CHARLIER:
        return amplitude_charlier(spec.alpha, r, s, t)
    if kind == FamilyKind.MEIXNER:
        return amplitude_meixner(spec.b, spec.c, r, s, t)
    raise InvalidSpec(f"unknown family {kind}")


def oracle_spectrum(spec: FamilySpec, r: int = 0, s: int = 0) -> DenseSpectrum:
    """Numerical spectrum of the family chain.

    Infinite families are truncated at no fewer than dynamic_kmax(spec, r, s)
    sites: the weight-tail K_max only bounds which sites are reported.
    """
    if spec.is_finite:
        return oracle.eig_tridiagonal(chain_svc.build_chain(spec))
    K = max(spec.K_max or 0, polyfam.dynamic_kmax(spec, r, s))
    return oracle.eig_tridiagonal(oracle.truncated_chain(spec, K))


def amplitude_oracle(spec: FamilySpec, r: int, s: int, t: float) -> complex:
    spec.check()
    _check_sites(spec, r, s)
    return complex(oracle.evolve_from_spectrum(oracle_spectrum(spec, r, s), s, t)[r])


def amplitude(spec: FamilySpec, r: int, s: int, t: float, method: Method = Method.SPECTRAL) -> complex:
    if method == Method.SPECTRAL:
        return amplitude_spectral(spec, r, s, t)
    if method == Method.CLOSED:
        return amplitude_closed(spec, r, s, t)
    if method == Method.ORACLE:
        return amplitude_oracle(spec, r, s, t)
    raise ValueError(f"unknown method {method}")


def amplitude_for_convention(
    spec: FamilySpec, r: int, s: int, t: float, convention: SignConvention, method: Method = Method.SPECTRAL
) -> complex:
    """The family amplitudes are MinusJ; the PlusJ chain differs by (-1)^{r+s}."""
    value = amplitude(spec, r, s, t, method)
    if convention == SignConvention.PLUS_J and (r + s) % 2:
        return -value
    return value


# ── Grids ─────────────────────────────────────────────────────────────────────

def worker_count() -> int:
    threads = settings.JACOBI_CHAIN_THREADS
    return threads if threads > 0 else (os.cpu_count() or 1)


def amplitude_grid(
    spec: FamilySpec,
    sites: Sequence[tuple[int, int]],
    times: Sequence[float],
    method: Method = Method.SPECTRAL,
    threads: Optional[int] = None,
) -> AmplitudeGrid:
    """f_{r,s}(t) for every (site pair, time); each cell is written by exactly one task."""
    spec.check()
    sites = [(int(r), int(s)) for r, s in sites]
    times = [float(t) for t in times]
    values = np.zeros((len(sites), len(times)), dtype=complex)

    if method == Method.ORACLE:
        reach = max((max(r, s) for r, s in sites), default=0)
        spectrum = oracle_spectrum(spec, reach, reach)
        for i, (r, s) in enumerate(sites):
            _check_sites(spec, r, s)
            for j, t in enumerate(times):
                values[i, j] = oracle.evolve_from_spectrum(spectrum, s, t)[r]
        return AmplitudeGrid(family=spec, sites=sites, times=times, values=values, method=method)

    if method == Method.SPECTRAL:
        chain_svc.spectral_data(spec)   # warm the cache before fanning out

    def cell(ij: tuple[int, int]) -> None:
        i, j = ij
        r, s = sites[i]
        values[i, j] = amplitude(spec, r, s, times[j], method)

    cells = [(i, j) for i in range(len(sites)) for j in range(len(times))]
    workers = threads if threads is not None else worker_count()
    if workers <= 1 or len(cells) < 2:
        for ij in cells:
            cell(ij)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(cell, cells))
    logger.debug("[dynamics] grid %s %d x %d via %s", spec.kind.value, len(sites), len(times), method.value)
    return AmplitudeGrid(family=spec, sites=sites, times=times, values=values, method=method)


# ── Perfect state transfer ────────────────────────────────────────────────────

def detect_pst(
    spec: FamilySpec,
    s: int,
    r: int,
    t_grid: Sequence[float],
    threshold: float,
    method: Optional[Method] = None,
) -> list[PstEvent]:
    """Local maxima of |f_{r,s}| on the grid, refined in t; those reaching threshold."""
    if not 0 < threshold <= 1:
        raise InvalidSpec(f"threshold must lie in (0, 1] (got {threshold})")
    grid = sorted(float(t) for t in t_grid)
    if not grid:
        raise InvalidSpec("empty time grid")
    if method is None:
        method = Method.CLOSED if spec.kind != FamilyKind.RACAH or (r, s) == (spec.N, 0) else Method.SPECTRAL

    def fidelity(t: float) -> float:
        return abs(amplitude(spec, r, s, t, method))

    values = [fidelity(t) for t in grid]
    events: list[PstEvent] = []
    for i, v in enumerate(values):
        left = values[i - 1] if i > 0 else -1.0
        right = values[i + 1] if i + 1 < len(values) else -1.0
        if v < left or v < right:
            continue
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        t_best, f_best = grid[i], v
        if hi > lo:
            res = minimize_scalar(
                lambda t: -fidelity(t), bounds=(lo, hi), method="bounded", options={"xatol": settings.PST_XTOL}
            )
            if -res.fun > f_best:
                t_best, f_best = float(res.x), float(-res.fun)
        if f_best >= threshold and not any(abs(e.t - t_best) < 1e-6 for e in events):
            events.append(PstEvent(t=t_best, fidelity=min(f_best, 1.0)))
    logger.info("[dynamics] pst scan %s (%d -> %d): %d events", spec.kind.value, s, r, len(events))
    return events


# ── su(2) factorization ───────────────────────────────────────────────────────

def bch_su2_coefficients(p: float, t: float) -> tuple[complex, complex]:
    """(xi, eta) with exp(xi L-) exp(eta L0) exp(xi L+) = exp(-it(2p-1) L0 + it sqrt(p(1-p)) (L+ + L-))."""
    if not 0 < p < 1:
        raise InvalidSpec(f"krawtchouk requires 0 < p < 1 (got p={p})")
    u = math.cos(t / 2) - 1j * (2 * p - 1) * math.sin(t / 2)
    xi = 2j * math.sqrt(p * (1 - p)) * math.sin(t / 2) / u
    eta = 2 * cmath.log(u)
    return xi, eta


def bch_su2_product(p: float, t: float) -> np.ndarray:
    """exp(xi L-) exp(eta L0) exp(zeta L+) in the 2x2 representation."""
    xi, eta = bch_su2_coefficients(p, t)
    lower = np.array([[1, 0], [xi, 1]], dtype=complex)
    cartan = np.diag([cmath.exp(eta / 2), cmath.exp(-eta / 2)])
    upper = np.array([[1, xi], [0, 1]], dtype=complex)
    return lower @ cartan @ upper


def bch_matrix_element(p: float, N: int, r: int, s: int, t: float) -> complex:
    """Krawtchouk amplitude assembled from (xi, eta) in the spin-N/2 representation."""
    xi, eta = bch_su2_coefficients(p, t)
    total = 0j
    for j in range(0, r + 1):
        k = s - r + j
        if k < 0 or k > s:
            continue
        weight = slog_prod(
            log_binomial(r, j), log_binomial(N - r + j, j), log_binomial(s, k), log_binomial(N - s + k, k)
        ).sqrt()
        if weight.sign == 0:
            continue
        total += xi ** (j + k) * weight.to_float() * cmath.exp(eta * (N / 2 - s + k))
    return cmath.exp(-1j * t * N / 2) * total
