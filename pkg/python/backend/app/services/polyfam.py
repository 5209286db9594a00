"""
Discrete orthogonal polynomial families.

Krawtchouk, Hahn, dual Hahn, Racah (alpha + 1 = -N), Charlier and Meixner:
weights w(x), squared norms d_n, point values P_n(x), the three-term
recurrence and the orthonormal values  sqrt(w(x) / d_n) P_n(x).

Every family is written in one recurrence shape

    y(x) P_n = -A_n P_{n+1} + (A_n + C_n) P_n - C_n P_{n-1},     A_n, C_n > 0

where y(x) = x, or lambda(x) = x (x + gamma + delta + 1) for dual Hahn and
Racah.  The Jacobi matrix of the family then has h_n = A_n + C_n and
couplings J_n = sqrt(A_n C_{n+1}), and d_{n+1} / d_n = C_{n+1} / A_n.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from scipy.special import betainc, gammainc

from app.config import settings
from app.exceptions import InvalidSpec, OutOfSupport
from app.models import FamilyKind, FamilySpec
from app.services.hypergeom import (
    HypSeriesSpec,
    SignedLog,
    eval_phq_stable,
    log_binomial,
    log_binomial_real,
    log_factorial,
    log_pochhammer,
    slog_prod,
)

logger = logging.getLogger("jacobichain.polyfam")

_KMAX_CAP = 100_000


# ── Truncation of the infinite families ───────────────────────────────────────

def _tail_index(tail, tol: float) -> int:
    """Smallest K >= 1 with tail(K) < tol, tail decreasing in K."""
    lo, hi = 1, 1
    while tail(hi) >= tol:
        lo, hi = hi, hi * 2
        if hi > _KMAX_CAP:
            raise InvalidSpec(f"truncation for tail tolerance {tol:g} exceeds {_KMAX_CAP} sites")
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) < tol:
            hi = mid
        else:
            lo = mid + 1
    return hi


def _charlier_tail(alpha: float):
    # P(Poisson(alpha) > K)
    return lambda K: float(gammainc(K + 1, alpha))


def _meixner_tail(b: float, c: float):
    # P(NegBin(b, c) > K) for the normalized weight (1-c)^b (b)_x c^x / x!
    return lambda K: float(betainc(K + 1, b, c))


def default_kmax(spec: FamilySpec) -> int:
    """Smallest K with sum_{x > K} w(x) < WEIGHT_TAIL_TOL (normalized weight)."""
    if spec.kind == FamilyKind.CHARLIER:
        return _tail_index(_charlier_tail(spec.alpha), settings.WEIGHT_TAIL_TOL)
    if spec.kind == FamilyKind.MEIXNER:
        return _tail_index(_meixner_tail(spec.b, spec.c), settings.WEIGHT_TAIL_TOL)
    raise InvalidSpec(f"{spec.kind.value} is a finite family; it has no truncation")


def dynamic_kmax(spec: FamilySpec, r: int = 0, s: int = 0) -> int:
    """Truncation for evolving the infinite chains.

    The evolved excitation spreads further than the weight: the spread at
    t = pi is Poisson(4 alpha) for Charlier and negative binomial with ratio
    4c / (1+c)^2 for Meixner.  The tail of that law below ORACLE_TAIL_TOL,
    plus room for the starting site, plus ORACLE_MARGIN.
    """
    if spec.kind == FamilyKind.CHARLIER:
        spread = _tail_index(_charlier_tail(4.0 * spec.alpha), settings.ORACLE_TAIL_TOL)
    elif spec.kind == FamilyKind.MEIXNER:
        q = 4.0 * spec.c / (1.0 + spec.c) ** 2
        spread = _tail_index(_meixner_tail(spec.b, q), settings.ORACLE_TAIL_TOL)
    else:
        raise InvalidSpec(f"{spec.kind.value} is a finite family; it has no truncation")
    return spread + 2 * max(r, s) + settings.ORACLE_MARGIN


def resolve(spec: FamilySpec) -> FamilySpec:
    """Fill in K_max for Charlier / Meixner when it was left open."""
    spec.check()
    if spec.is_finite or spec.K_max is not None:
        return spec
    K = default_kmax(spec)
    logger.debug("[polyfam] %s truncated at K_max=%d", spec.kind.value, K)
    return spec.model_copy(update={"K_max": K})


def _check_support(spec: FamilySpec, *indices: int) -> None:
    spec.check()
    for i in indices:
        if i < 0:
            raise OutOfSupport(f"index {i} < 0")
        if spec.is_finite and i > spec.N:
            raise OutOfSupport(f"index {i} outside 0..{spec.N} for {spec.kind.value}")


# ── Lattice and recurrence ────────────────────────────────────────────────────

def lattice(spec: FamilySpec, x: int) -> float:
    """Eigenvalue attached to support point x: x, or x (x + gamma + delta + 1)."""
    if spec.is_quadratic:
        return x * (x + spec.gamma + spec.delta + 1.0)
    return float(x)


def recurrence_coefficients(spec: FamilySpec, n: int) -> tuple[float, float]:
    """(A_n, C_n), both positive inside the support (A_N = 0, C_0 = 0)."""
    kind = spec.kind
    N = spec.N
    if kind == FamilyKind.KRAWTCHOUK:
        p = spec.p
        return p * (N - n), n * (1.0 - p)

    if kind == FamilyKind.HAHN:
        a, b = spec.alpha, spec.beta
        if n == 0:
            A = (a + 1.0) * N / (a + b + 2.0)
            return A, 0.0
        A = (n + a + b + 1) * (n + a + 1) * (N - n) / ((2 * n + a + b + 1) * (2 * n + a + b + 2))
        C = n * (n + a + b + N + 1) * (n + b) / ((2 * n + a + b) * (2 * n + a + b + 1))
        return A, C

    if kind == FamilyKind.DUALHAHN:
        g, d = spec.gamma, spec.delta
        return (n + g + 1.0) * (N - n), n * (d + N + 1.0 - n)

    if kind == FamilyKind.RACAH:
        a, b, g, d = spec.racah_alpha, spec.beta, spec.gamma, spec.delta
        if n == 0:
            A = -(a + 1) * (b + d + 1) * (g + 1) / (a + b + 2)
            return A, 0.0
        A = -(n + a + 1) * (n + a + b + 1) * (n + b + d + 1) * (n + g + 1) / (
            (2 * n + a + b + 1) * (2 * n + a + b + 2)
        )
        C = -n * (n + a + b - g) * (n + a - d) * (n + b) / ((2 * n + a + b) * (2 * n + a + b + 1))
        return A, C

    if kind == FamilyKind.CHARLIER:
        return spec.alpha, float(n)

    if kind == FamilyKind.MEIXNER:
        b, c = spec.b, spec.c
        return c * (n + b) / (1.0 - c), n / (1.0 - c)

    raise InvalidSpec(f"unknown family {kind}")


# ── Weights and norms ─────────────────────────────────────────────────────────

def weight(spec: FamilySpec, x: int) -> SignedLog:
    """Orthogonality weight w(x) in log form."""
    _check_support(spec, x)
    kind = spec.kind
    N = spec.N

    if kind == FamilyKind.KRAWTCHOUK:
        p = spec.p
        return log_binomial(N, x) * SignedLog(1, x * math.log(p) + (N - x) * math.log1p(-p))

    if kind == FamilyKind.HAHN:
        return log_binomial_real(spec.alpha + x, x) * log_binomial_real(N + spec.beta - x, N - x)

    if kind == FamilyKind.DUALHAHN:
        g, d = spec.gamma, spec.delta
        gd = g + d
        if x == 0:
            return SignedLog(1, log_factorial(N)) / log_pochhammer(gd + 2, N)
        return slog_prod(
            SignedLog.from_float(2 * x + gd + 1),
            log_pochhammer(g + 1, x),
            SignedLog(1, 2 * log_factorial(N) - log_factorial(N - x) - log_factorial(x)),
        ) / (log_pochhammer(x + gd + 1, N + 1) * log_pochhammer(d + 1, x))

    if kind == FamilyKind.RACAH:
        b, g, d = spec.beta, spec.gamma, spec.delta
        gd = g + d
        if x == 0:
            return SignedLog.one()
        num = slog_prod(
            log_pochhammer(-N, x),
            log_pochhammer(b + d + 1, x),
            log_pochhammer(g + 1, x),
            log_pochhammer(gd + 2, x - 1),
            SignedLog.from_float(2 * x + gd + 1),
        )
        den = slog_prod(
            log_pochhammer(N + gd + 2, x),
            log_pochhammer(g + 1 - b, x),
            log_pochhammer(d + 1, x),
            SignedLog(1, log_factorial(x)),
        )
        return num / den

    if kind == FamilyKind.CHARLIER:
        a = spec.alpha
        return SignedLog(1, x * math.log(a) - a - log_factorial(x))

    if kind == FamilyKind.MEIXNER:
        return log_pochhammer(spec.b, x) * SignedLog(1, x * math.log(spec.c) - log_factorial(x))

    raise InvalidSpec(f"unknown family {kind}")


def _racah_m(spec: FamilySpec) -> SignedLog:
    b, g, d, N = spec.beta, spec.gamma, spec.delta, spec.N
    return (log_pochhammer(-b, N) * log_pochhammer(g + d + 2, N)) / (
        log_pochhammer(g + 1 - b, N) * log_pochhammer(d + 1, N)
    )


def norm_d(spec: FamilySpec, n: int) -> SignedLog:
    """Squared norm d_n = sum_x w(x) P_n(x)^2."""
    _check_support(spec, n)
    kind = spec.kind
    N = spec.N

    if kind == FamilyKind.KRAWTCHOUK:
        p = spec.p
        return SignedLog(1, n * (math.log1p(-p) - math.log(p))) / log_binomial(N, n)

    if kind == FamilyKind.HAHN:
        a, b = spec.alpha, spec.beta
        head = SignedLog(1, log_factorial(n) + log_factorial(N - n) - 2 * log_factorial(N))
        if n == 0:
            return head * log_pochhammer(a + b + 2, N)
        return head * (
            log_pochhammer(n + a + b + 1, N + 1) * log_pochhammer(b + 1, n)
        ) / (SignedLog.from_float(2 * n + a + b + 1) * log_pochhammer(a + 1, n))

    if kind == FamilyKind.DUALHAHN:
        g, d = spec.gamma, spec.delta
        inv = log_pochhammer(g + 1, n) * log_pochhammer(d + 1, N - n) / SignedLog(
            1, log_factorial(n) + log_factorial(N - n)
        )
        return inv.inverse()

    if kind == FamilyKind.RACAH:
        a, b, g, d = spec.racah_alpha, spec.beta, spec.gamma, spec.delta
        if n == 0:
            return _racah_m(spec)
        num = slog_prod(
            _racah_m(spec),
            log_pochhammer(n + a + b + 1, n),
            log_pochhammer(a + b - g + 1, n),
            log_pochhammer(a - d + 1, n),
            log_pochhammer(b + 1, n),
            SignedLog(1, log_factorial(n)),
        )
        den = slog_prod(
            log_pochhammer(a + b + 2, 2 * n),
            log_pochhammer(a + 1, n),
            log_pochhammer(b + d + 1, n),
            log_pochhammer(g + 1, n),
        )
        return num / den

    if kind == FamilyKind.CHARLIER:
        return SignedLog(1, log_factorial(n) - n * math.log(spec.alpha))

    if kind == FamilyKind.MEIXNER:
        b, c = spec.b, spec.c
        return SignedLog(1, log_factorial(n) - n * math.log(c) - b * math.log1p(-c)) / log_pochhammer(b, n)

    raise InvalidSpec(f"unknown family {kind}")


# ── Point values ──────────────────────────────────────────────────────────────

def series_of(spec: FamilySpec, n: int, x: int) -> HypSeriesSpec:
    """The terminating hypergeometric series defining P_n at support point x."""
    kind = spec.kind
    N = spec.N
    if kind == FamilyKind.KRAWTCHOUK:
        return HypSeriesSpec.of([-n, -x], [-N], 1.0 / spec.p)
    if kind == FamilyKind.HAHN:
        a, b = spec.alpha, spec.beta
        return HypSeriesSpec.of([-n, n + a + b + 1, -x], [a + 1, -N], 1.0)
    if kind == FamilyKind.DUALHAHN:
        g, d = spec.gamma, spec.delta
        return HypSeriesSpec.of([-n, -x, x + g + d + 1], [g + 1, -N], 1.0)
    if kind == FamilyKind.RACAH:
        a, b, g, d = spec.racah_alpha, spec.beta, spec.gamma, spec.delta
        return HypSeriesSpec.of([-n, n + a + b + 1, -x, x + g + d + 1], [a + 1, b + d + 1, g + 1], 1.0)
    if kind == FamilyKind.CHARLIER:
        return HypSeriesSpec.of([-n, -x], [], -1.0 / spec.alpha)
    if kind == FamilyKind.MEIXNER:
        return HypSeriesSpec.of([-n, -x], [spec.b], 1.0 - 1.0 / spec.c)
    raise InvalidSpec(f"unknown family {kind}")


def poly_eval(spec: FamilySpec, n: int, x: int) -> float:
    """P_n at support point x from its hypergeometric definition."""
    _check_support(spec, n, x)
    return float(eval_phq_stable(series_of(spec, n, x)))


def poly_eval_recurrence(spec: FamilySpec, n: int, x: int) -> float:
    """P_n(x) by upward three-term recurrence from P_0 = 1."""
    _check_support(spec, n, x)
    y = lattice(spec, x)
    prev, cur = 0.0, 1.0
    for k in range(n):
        A, C = recurrence_coefficients(spec, k)
        prev, cur = cur, ((A + C - y) * cur - C * prev) / A
    return cur


def orthonormal_value(spec: FamilySpec, n: int, x: int) -> float:
    """sqrt(w(x) / d_n) P_n(x), assembled in log form with the sign of P_n(x)."""
    P = poly_eval(spec, n, x)
    if P == 0.0:
        return 0.0
    scale = (weight(spec, x) / norm_d(spec, n)).sqrt()
    return math.copysign(math.exp(math.log(abs(P)) + scale.logmag), P)


# ── Weight table ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class WeightTable:
    family: FamilySpec
    w: list[SignedLog]
    d: list[SignedLog]

    @classmethod
    def build(cls, spec: FamilySpec) -> "WeightTable":
        spec = resolve(spec)
        indices = range(spec.size)
        return cls(
            family=spec,
            w=[weight(spec, x) for x in indices],
            d=[norm_d(spec, n) for n in indices],
        )

    def total_weight(self) -> float:
        return sum(w.to_float() for w in self.w)

    def orthonormality_defect(self, n: int) -> float:
        """|sum_x w(x) P_n(x)^2 / d_n - 1| over the table's support."""
        spec = self.family
        total = 0.0
        for x, w in enumerate(self.w):
            P = poly_eval(spec, n, x)
            if P == 0.0:
                continue
            total += math.exp(w.logmag - self.d[n].logmag + 2 * math.log(abs(P)))
        return abs(total - 1.0)


# ── Limit relations ───────────────────────────────────────────────────────────

def limit_krawtchouk_to_charlier(n: int, x: int, alpha: float, N: int) -> float:
    """|K_n(x; alpha/N, N) - C_n(x; alpha)|; tends to 0 as N grows."""
    kraw = poly_eval(FamilySpec.krawtchouk(N, alpha / N), n, x)
    charlier = poly_eval(FamilySpec.charlier(alpha, K_max=max(n, x, 1)), n, x)
    return abs(kraw - charlier)


def limit_hahn_to_meixner(n: int, x: int, b: float, c: float, N: int) -> float:
    """|Q_n(x; b-1, N(1-c)/c, N) - M_n(x; b, c)|; tends to 0 as N grows."""
    hahn = poly_eval(FamilySpec.hahn(N, b - 1.0, N * (1.0 - c) / c), n, x)
    meixner = poly_eval(FamilySpec.meixner(b, c, K_max=max(n, x, 1)), n, x)
    return abs(hahn - meixner)
