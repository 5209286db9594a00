"""
Data model shared by the services and the CLI.

  FamilyKind / FamilySpec   which polynomial family and its parameters
  SignConvention            off-diagonal sign of the stored Jacobi matrix
  JacobiChain               diagonal h, couplings J > 0, sign flag
  SpectralData              eigenvalues + orthogonal eigenvector matrix U
  DenseSpectrum             numerical eigen-decomposition from the oracle
  AmplitudeGrid             f_{r,s}(t) samples with provenance
  ChainRecord               JSON form of a chain
  RunConfig                 one CLI invocation
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.config import settings
from app.exceptions import InvalidSpec


# ── Enums ─────────────────────────────────────────────────────────────────────

class FamilyKind(str, Enum):
    KRAWTCHOUK = "krawtchouk"
    HAHN = "hahn"
    DUALHAHN = "dualhahn"
    RACAH = "racah"
    CHARLIER = "charlier"
    MEIXNER = "meixner"


FINITE_KINDS = {FamilyKind.KRAWTCHOUK, FamilyKind.HAHN, FamilyKind.DUALHAHN, FamilyKind.RACAH}
QUADRATIC_KINDS = {FamilyKind.DUALHAHN, FamilyKind.RACAH}


class SignConvention(str, Enum):
    PLUS_J = "plus"     # +J off-diagonals, the physical hopping Hamiltonian
    MINUS_J = "minus"   # -J off-diagonals, the polynomial Jacobi matrix


class SpectralSource(str, Enum):
    ANALYTIC = "analytic"
    NUMERICAL = "numerical"


class Method(str, Enum):
    SPECTRAL = "spectral"
    CLOSED = "closed"
    ORACLE = "oracle"


# ── FamilySpec ────────────────────────────────────────────────────────────────

# Parameters each family reads; anything else must stay unset.
_PARAMS: dict[FamilyKind, tuple[str, ...]] = {
    FamilyKind.KRAWTCHOUK: ("p",),
    FamilyKind.HAHN: ("alpha", "beta"),
    FamilyKind.DUALHAHN: ("gamma", "delta"),
    FamilyKind.RACAH: ("beta", "gamma", "delta"),
    FamilyKind.CHARLIER: ("alpha",),
    FamilyKind.MEIXNER: ("b", "c"),
}


class FamilySpec(BaseModel):
    """Tagged parameter record for one polynomial family.

    Finite families carry N (support 0..N).  Charlier and Meixner live on
    0, 1, 2, ... and carry a truncation K_max instead; K_max = None means
    "use the weight-tail rule" (see polyfam.resolve).
    """

    model_config = ConfigDict(frozen=True)

    kind: FamilyKind
    N: Optional[int] = None
    K_max: Optional[int] = None
    p: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    delta: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None

    # ── Constructors ──────────────────────────────────────────────────────────

    @classmethod
    def krawtchouk(cls, N: int, p: float) -> "FamilySpec":
        return cls.build(kind=FamilyKind.KRAWTCHOUK, N=N, p=p)

    @classmethod
    def hahn(cls, N: int, alpha: float, beta: float) -> "FamilySpec":
        return cls.build(kind=FamilyKind.HAHN, N=N, alpha=alpha, beta=beta)

    @classmethod
    def dualhahn(cls, N: int, gamma: float, delta: float) -> "FamilySpec":
        return cls.build(kind=FamilyKind.DUALHAHN, N=N, gamma=gamma, delta=delta)

    @classmethod
    def racah(cls, N: int, beta: float, gamma: float, delta: float) -> "FamilySpec":
        return cls.build(kind=FamilyKind.RACAH, N=N, beta=beta, gamma=gamma, delta=delta)

    @classmethod
    def charlier(cls, alpha: float, K_max: Optional[int] = None) -> "FamilySpec":
        return cls.build(kind=FamilyKind.CHARLIER, alpha=alpha, K_max=K_max)

    @classmethod
    def meixner(cls, b: float, c: float, K_max: Optional[int] = None) -> "FamilySpec":
        return cls.build(kind=FamilyKind.MEIXNER, b=b, c=c, K_max=K_max)

    @classmethod
    def build(cls, **fields) -> "FamilySpec":
        """Construct and validate; every failure surfaces as InvalidSpec."""
        try:
            spec = cls(**fields)
        except ValidationError as exc:
            raise InvalidSpec(str(exc)) from exc
        return spec.check()

    # ── Validity ──────────────────────────────────────────────────────────────

    def violations(self) -> list[str]:
        """Human-readable list of violated constraints (empty when valid)."""
        out: list[str] = []
        kind = self.kind
        for name in _PARAMS[kind]:
            if getattr(self, name) is None:
                out.append(f"{kind.value} requires parameter {name}")
        if out:
            return out

        if kind in FINITE_KINDS:
            if self.N is None or self.N < 0:
                out.append(f"{kind.value} requires N >= 0 (got N={self.N})")
                return out
        elif self.K_max is not None and self.K_max < 1:
            out.append(f"{kind.value} requires K_max >= 1 (got K_max={self.K_max})")

        N = self.N
        if kind == FamilyKind.KRAWTCHOUK:
            if not 0 < self.p < 1:
                out.append(f"krawtchouk requires 0 < p < 1 (got p={self.p})")
        elif kind == FamilyKind.HAHN:
            if self.alpha < -N and self.beta < -N:
                out.append("hahn branch alpha < -N, beta < -N is not supported; use alpha > -1 and beta > -1")
            elif not (self.alpha > -1 and self.beta > -1):
                out.append(f"hahn requires alpha > -1 and beta > -1 (got alpha={self.alpha}, beta={self.beta})")
        elif kind == FamilyKind.DUALHAHN:
            if self.gamma < -N and self.delta < -N:
                out.append("dualhahn branch gamma < -N, delta < -N is not supported; use gamma > -1 and delta > -1")
            elif not (self.gamma > -1 and self.delta > -1):
                out.append(f"dualhahn requires gamma > -1 and delta > -1 (got gamma={self.gamma}, delta={self.delta})")
        elif kind == FamilyKind.RACAH:
            if not self.gamma + 1 > 0:
                out.append(f"racah requires gamma + 1 > 0 (got gamma={self.gamma})")
            if not self.delta + 1 > 0:
                out.append(f"racah requires delta + 1 > 0 (got delta={self.delta})")
            if not self.beta > self.gamma + N:
                out.append(f"racah requires beta > gamma + N (got beta={self.beta}, gamma + N={self.gamma + N})")
        elif kind == FamilyKind.CHARLIER:
            if not self.alpha > 0:
                out.append(f"charlier requires alpha > 0 (got alpha={self.alpha})")
        elif kind == FamilyKind.MEIXNER:
            if not self.b > 0:
                out.append(f"meixner requires b > 0 (got b={self.b})")
            if not 0 < self.c < 1:
                out.append(f"meixner requires 0 < c < 1 (got c={self.c})")
        return out

    def check(self) -> "FamilySpec":
        problems = self.violations()
        if problems:
            raise InvalidSpec("; ".join(problems))
        return self

    # ── Derived ───────────────────────────────────────────────────────────────

    @property
    def is_finite(self) -> bool:
        return self.kind in FINITE_KINDS

    @property
    def is_quadratic(self) -> bool:
        """Spectrum on the lattice lambda(x) = x (x + gamma + delta + 1)."""
        return self.kind in QUADRATIC_KINDS

    @property
    def racah_alpha(self) -> int:
        """Racah runs with alpha + 1 = -N."""
        return -self.N - 1

    @property
    def last_index(self) -> int:
        """Largest site index: N, or K_max for the infinite families."""
        if self.is_finite:
            return self.N
        if self.K_max is None:
            raise InvalidSpec(f"{self.kind.value} spec has no truncation; call polyfam.resolve first")
        return self.K_max

    @property
    def size(self) -> int:
        return self.last_index + 1

    @property
    def params(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in _PARAMS[self.kind]}


# ── Chains and spectra ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class JacobiChain:
    """Real symmetric tridiagonal single-excitation Hamiltonian."""

    h: np.ndarray
    J: np.ndarray
    sign_convention: SignConvention = SignConvention.MINUS_J
    spec: Optional[FamilySpec] = None

    @property
    def size(self) -> int:
        return len(self.h)

    @property
    def N(self) -> int:
        return len(self.h) - 1

    @property
    def off_diagonal(self) -> np.ndarray:
        """Signed off-diagonal entries as they appear in the matrix."""
        if self.sign_convention == SignConvention.MINUS_J:
            return -self.J
        return self.J.copy()

    def matrix(self) -> np.ndarray:
        off = self.off_diagonal
        return np.diag(self.h) + np.diag(off, 1) + np.diag(off, -1)


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    U: np.ndarray
    source: SpectralSource = SpectralSource.ANALYTIC


@dataclass(frozen=True)
class DenseSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray     # columns


@dataclass
class AmplitudeGrid:
    """f_{r,s}(t) for each (r, s) in sites (rows) and t in times (columns)."""

    family: FamilySpec
    sites: list[tuple[int, int]]
    times: list[float]
    values: np.ndarray
    method: Method

    def column(self, s: int, t_index: int) -> dict[int, complex]:
        return {r: self.values[i, t_index] for i, (r, s2) in enumerate(self.sites) if s2 == s}

    def norm_defect(self, s: int, t_index: int) -> float:
        """|sum_r |f_{r,s}|^2 - 1| for a sender s whose full column is present."""
        col = self.column(s, t_index)
        return abs(sum(abs(v) ** 2 for v in col.values()) - 1.0)


@dataclass(frozen=True)
class PstEvent:
    t: float
    fidelity: float


# ── Serialization ─────────────────────────────────────────────────────────────

class ChainRecord(BaseModel):
    """JSON form: {"kind", "N", "params", "h", "J", "sign"}."""

    kind: Optional[FamilyKind] = None
    N: int
    params: dict[str, float] = {}
    h: list[float]
    J: list[float]
    sign: SignConvention = SignConvention.MINUS_J

    @model_validator(mode="after")
    def _lengths(self) -> "ChainRecord":
        if len(self.h) != self.N + 1 or len(self.J) != self.N:
            raise ValueError(f"chain of order N={self.N} needs {self.N + 1} h and {self.N} J values")
        return self


# ── CLI run configuration ─────────────────────────────────────────────────────

class Command(str, Enum):
    BUILD = "build"
    EVOLVE = "evolve"
    PST_SCAN = "pst-scan"
    VERIFY = "verify"


class MethodChoice(str, Enum):
    SPECTRAL = "spectral"
    CLOSED = "closed"
    ORACLE = "oracle"
    ALL = "all"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseModel):
    command: Command
    family: Optional[FamilySpec] = None
    s: int = 0
    r: Optional[int] = None
    times: Optional[list[float]] = None
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    steps: Optional[int] = None
    method: MethodChoice = MethodChoice.SPECTRAL
    output: Optional[str] = None
    fmt: OutputFormat = OutputFormat.CSV
    tol: float = Field(default_factory=lambda: settings.DISCREPANCY_TOL)
    threshold: float = 1.0 - 1e-6
    seed: int = 0
    max_N: int = 16
    perturb: float = 0.0

    @model_validator(mode="after")
    def _time_grid(self) -> "RunConfig":
        if self.command in (Command.EVOLVE, Command.PST_SCAN):
            if self.times is not None:
                if not self.times:
                    raise ValueError("time grid is empty")
            else:
                if self.t_min is None or self.t_max is None:
                    raise ValueError("give --times or --t-min/--t-max")
                if self.t_max < self.t_min:
                    raise ValueError(f"t_max < t_min ({self.t_max} < {self.t_min})")
                if self.steps is None or self.steps < 1:
                    raise ValueError(f"steps must be >= 1 (got {self.steps})")
        if not 0 < self.threshold <= 1:
            raise ValueError(f"threshold must lie in (0, 1] (got {self.threshold})")
        return self

    def time_grid(self) -> list[float]:
        """Explicit times, or a closed grid t_min..t_max with steps intervals."""
        if self.times is not None:
            return list(self.times)
        if self.t_max == self.t_min:
            return [self.t_min]
        return [float(t) for t in np.linspace(self.t_min, self.t_max, self.steps + 1)]


# ── Verify report ─────────────────────────────────────────────────────────────

class CheckResult(BaseModel):
    name: str
    max_error: float
    tol: float
    passed: bool


class VerifyReport(BaseModel):
    seed: int
    max_N: int
    perturb: float = 0.0
    checks: list[CheckResult] = []

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]
