"""
Terminating hypergeometric series and log-domain special numbers.

Provides
--------
  SignedLog            sign + log|x| representation (weights, norms, binomials)
  pochhammer           rising factorial (a)_n, real or complex a
  log_pochhammer       (a)_n as a SignedLog for real a
  log_binomial         C(n, k) for integer n, k
  log_binomial_real    C(a, k) for real upper argument a
  HypSeriesSpec        numerator / denominator parameters + argument of a pFq
  eval_phq             terminating pFq by term-ratio recurrence (float / complex)
  mp_context           thread-local mpmath context at a given precision
  eval_phq_mp          the same recurrence in mpmath at a given precision
  eval_phq_stable      mpmath evaluation with precision raised until cancellation is covered
  series_terms         first n terms of a (possibly non-terminating) pFq, no summation
  euler_2f1_transform  2F1(a,b;c;z) = (1-z)^(c-a-b) 2F1(c-a,c-b;c;z)

A series terminates at T = min(-a) over the numerator parameters a that are
non-positive integers (within settings.NONINT_TOL).  A denominator b that is a
non-positive integer is legal only when -b >= T.
"""
from __future__ import annotations

import cmath
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import mpmath
import numpy as np
from scipy.special import gammaln

from app.config import settings
from app.exceptions import DenominatorPole, InvalidSpec, NonTerminating

logger = logging.getLogger("jacobichain.hypergeom")

Number = Union[int, float, complex]

# Precision ladder for eval_phq_stable (decimal digits)
_BASE_DPS = 30
_GUARD_DIGITS = 20
_MAX_DPS = 600
_FLOAT_LOSS_DIGITS = 3


# ── SignedLog ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SignedLog:
    """Real number stored as sign in {-1, 0, +1} and natural log of |x|."""

    sign: int
    logmag: float = 0.0

    @classmethod
    def zero(cls) -> "SignedLog":
        return cls(0, -math.inf)

    @classmethod
    def one(cls) -> "SignedLog":
        return cls(1, 0.0)

    @classmethod
    def from_float(cls, x: float) -> "SignedLog":
        if x == 0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.logmag)

    def __float__(self) -> float:
        return self.to_float()

    def __mul__(self, other: "SignedLog") -> "SignedLog":
        if self.sign == 0 or other.sign == 0:
            return SignedLog.zero()
        return SignedLog(self.sign * other.sign, self.logmag + other.logmag)

    def __truediv__(self, other: "SignedLog") -> "SignedLog":
        if other.sign == 0:
            raise ZeroDivisionError("SignedLog division by zero")
        if self.sign == 0:
            return SignedLog.zero()
        return SignedLog(self.sign * other.sign, self.logmag - other.logmag)

    def __pow__(self, k: int) -> "SignedLog":
        if self.sign == 0:
            return SignedLog.one() if k == 0 else SignedLog.zero()
        return SignedLog(-1 if (self.sign < 0 and k % 2) else 1, self.logmag * k)

    def sqrt(self) -> "SignedLog":
        if self.sign < 0:
            raise ValueError("sqrt of a negative SignedLog")
        if self.sign == 0:
            return SignedLog.zero()
        return SignedLog(1, 0.5 * self.logmag)

    def inverse(self) -> "SignedLog":
        return SignedLog.one() / self


def slog_prod(*factors: SignedLog) -> SignedLog:
    out = SignedLog.one()
    for f in factors:
        out = out * f
    return out


# ── Pochhammer / binomial ────────────────────────────────────────────────────

def pochhammer(a: Number, n: int) -> Number:
    """Rising factorial (a)_n = a (a+1) ... (a+n-1); (a)_0 = 1."""
    if n < 0:
        raise ValueError(f"pochhammer requires n >= 0 (got n={n})")
    out: Number = 1
    for k in range(n):
        out *= a + k
        if out == 0:
            return 0
    return out


def log_pochhammer(a: float, n: int) -> SignedLog:
    """(a)_n for real a as a SignedLog.

    Factors a+k <= 0 are multiplied out explicitly (sign counting); the positive
    tail goes through log-gamma.
    """
    if n < 0:
        raise ValueError(f"log_pochhammer requires n >= 0 (got n={n})")
    if n == 0:
        return SignedLog.one()
    a = float(a)
    if a > 0:
        return SignedLog(1, float(gammaln(a + n) - gammaln(a)))
    k_neg = min(n, int(math.floor(-a)) + 1)
    head = a + np.arange(k_neg, dtype=float)
    if np.any(head == 0.0):
        return SignedLog.zero()
    logmag = float(np.sum(np.log(np.abs(head))))
    sign = -1 if k_neg % 2 else 1
    rest = n - k_neg
    if rest > 0:
        start = a + k_neg
        logmag += float(gammaln(start + rest) - gammaln(start))
    return SignedLog(sign, logmag)


def log_factorial(n: int) -> float:
    return float(gammaln(n + 1))


def log_binomial(n: int, k: int) -> SignedLog:
    """C(n, k) for non-negative integer n; zero outside 0 <= k <= n."""
    if k < 0 or k > n:
        return SignedLog.zero()
    return SignedLog(1, log_factorial(n) - log_factorial(k) - log_factorial(n - k))


def log_binomial_real(a: float, k: int) -> SignedLog:
    """Generalized binomial C(a, k) = (a-k+1)_k / k! for real a."""
    if k < 0:
        return SignedLog.zero()
    return log_pochhammer(a - k + 1, k) / SignedLog(1, log_factorial(k))


# ── Series parameters ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class HypSeriesSpec:
    """pFq(numerators; denominators; argument)."""

    numerator_params: tuple = field(default_factory=tuple)
    denominator_params: tuple = field(default_factory=tuple)
    argument: Number = 0.0

    @classmethod
    def of(cls, numerators: Sequence[Number], denominators: Sequence[Number], z: Number) -> "HypSeriesSpec":
        return cls(tuple(numerators), tuple(denominators), z)


def nonpositive_integer(a: Number, tol: Optional[float] = None) -> Optional[int]:
    """Return m >= 0 when a == -m within tol, else None."""
    tol = settings.NONINT_TOL if tol is None else tol
    a = complex(a)
    if abs(a.imag) > tol:
        return None
    nearest = round(a.real)
    if nearest <= 0 and abs(a.real - nearest) <= tol:
        return int(-nearest)
    return None


def termination_index(spec: HypSeriesSpec) -> int:
    """Index of the last non-zero term; raises NonTerminating / DenominatorPole."""
    orders = [m for m in (nonpositive_integer(a) for a in spec.numerator_params) if m is not None]
    if not orders:
        raise NonTerminating(
            f"no non-positive integer among numerator parameters {list(spec.numerator_params)}"
        )
    T = min(orders)
    for b in spec.denominator_params:
        m = nonpositive_integer(b)
        if m is not None and m < T:
            raise DenominatorPole(
                f"denominator parameter {b} vanishes at term {m + 1} before termination at {T}"
            )
    return T


def eval_phq(spec: HypSeriesSpec) -> Number:
    """Sum_{k=0}^{T} prod (a_i)_k / prod (b_j)_k * z^k / k! by running term ratios."""
    T = termination_index(spec)
    z = spec.argument
    term: Number = 1.0
    total: Number = 1.0
    for k in range(T):
        num: Number = 1.0
        for a in spec.numerator_params:
            num *= a + k
        den: Number = 1.0
        for b in spec.denominator_params:
            den *= b + k
        term = term * num / den * z / (k + 1)
        total += term
    return total


_contexts = threading.local()


def mp_context(dps: int) -> mpmath.MPContext:
    """mpmath context owned by the calling thread, fixed at dps digits.

    Arithmetic on its numbers never reads or writes the global mpmath.mp
    precision, so concurrent evaluations cannot change each other's rounding.
    """
    table = getattr(_contexts, "table", None)
    if table is None:
        table = _contexts.table = {}
    ctx = table.get(dps)
    if ctx is None:
        ctx = table[dps] = mpmath.MPContext()
        ctx.dps = dps
    return ctx


def _to_mp(ctx: mpmath.MPContext, x: Number):
    if isinstance(x, complex):
        return ctx.mpc(x.real, x.imag)
    return ctx.mpf(x)


def _from_mp(x) -> Number:
    if hasattr(x, "_mpc_"):
        return complex(x)
    return float(x)


def eval_phq_mp(spec: HypSeriesSpec, dps: int):
    """Term-ratio recurrence in mpmath arithmetic.

    Returns (sum, largest |term|) as numbers of mp_context(dps).
    """
    T = termination_index(spec)
    ctx = mp_context(dps)
    nums = [_to_mp(ctx, a) for a in spec.numerator_params]
    dens = [_to_mp(ctx, b) for b in spec.denominator_params]
    z = _to_mp(ctx, spec.argument)
    term = ctx.mpf(1)
    total = ctx.mpf(1)
    biggest = ctx.mpf(1)
    for k in range(T):
        num = ctx.mpf(1)
        for a in nums:
            num *= a + k
        den = ctx.mpf(1)
        for b in dens:
            den *= b + k
        term = term * num / den * z / (k + 1)
        total += term
        biggest = max(biggest, abs(term))
    return total, biggest


def _eval_phq_tracked(spec: HypSeriesSpec) -> tuple[Number, float]:
    T = termination_index(spec)
    z = spec.argument
    term: Number = 1.0
    total: Number = 1.0
    biggest = 1.0
    for k in range(T):
        num: Number = 1.0
        for a in spec.numerator_params:
            num *= a + k
        den: Number = 1.0
        for b in spec.denominator_params:
            den *= b + k
        term = term * num / den * z / (k + 1)
        total += term
        biggest = max(biggest, abs(term))
    return total, biggest


def eval_phq_stable(spec: HypSeriesSpec, exact: bool = False):
    """eval_phq with the working precision raised until cancellation is covered.

    Plain floats are accepted when at most _FLOAT_LOSS_DIGITS digits cancel;
    otherwise the sum is redone in mpmath.  With exact=True the result stays an
    mpmath number, so sums beyond the float range survive until the caller
    has applied its prefactor.
    """
    total, biggest = _eval_phq_tracked(spec)
    if total != 0 and math.isfinite(biggest) and biggest <= abs(total) * 10.0 ** _FLOAT_LOSS_DIGITS:
        return _to_mp(mp_context(_BASE_DPS), total) if exact else total
    dps = _BASE_DPS
    while True:
        total, biggest = eval_phq_mp(spec, dps)
        ctx = mp_context(dps)
        if total == 0:
            return ctx.mpf(0) if exact else 0.0
        lost = float(ctx.log10(biggest / abs(total)))
        if lost + _GUARD_DIGITS <= dps:
            return total if exact else _from_mp(total)
        if dps >= _MAX_DPS:
            # below the resolution of the widest precision: an exact zero
            logger.debug("[hypergeom] sum vanishes at %d digits (%d digits lost)", dps, int(lost))
            return ctx.mpf(0) if exact else 0.0
        dps = min(_MAX_DPS, 10 * math.ceil((lost + _GUARD_DIGITS + 10) / 10))
        logger.debug("[hypergeom] raising precision to %d digits", dps)


def series_terms(
    numerators: Sequence[Number], denominators: Sequence[Number], z: Number, n_terms: int
) -> list[Number]:
    """Terms t_0..t_{n_terms-1} of pFq(numerators; denominators; z), unsummed."""
    terms: list[Number] = []
    term: Number = 1.0
    for k in range(n_terms):
        terms.append(term)
        num: Number = 1.0
        for a in numerators:
            num *= a + k
        den: Number = 1.0
        for b in denominators:
            den *= b + k
        if den == 0:
            if num == 0 or k == n_terms - 1:
                term = 0.0
                continue
            raise DenominatorPole(f"denominator vanishes at term {k + 1}")
        term = term * num / den * z / (k + 1)
    return terms


# ── Transformations ──────────────────────────────────────────────────────────

def euler_2f1_transform(a: Number, b: Number, c: Number, z: Number):
    """Return (c-a, c-b, c, z, prefactor) with prefactor = (1-z)^(c-a-b)."""
    if z == 1:
        raise InvalidSpec("euler transform requires z != 1")
    exponent = c - a - b
    base = 1 - z
    e = complex(exponent)
    if e.imag == 0 and abs(e.real - round(e.real)) <= settings.NONINT_TOL:
        prefactor = base ** int(round(e.real))
    else:
        prefactor = cmath.exp(exponent * cmath.log(base))
    return c - a, c - b, c, z, prefactor


def phq(numerators: Sequence[Number], denominators: Sequence[Number], z: Number) -> Number:
    """Shorthand for eval_phq(HypSeriesSpec.of(...))."""
    return eval_phq(HypSeriesSpec.of(numerators, denominators, z))
