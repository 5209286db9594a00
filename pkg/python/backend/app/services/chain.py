"""
Jacobi chains for the polynomial families.

build_chain turns a FamilySpec into the tridiagonal single-excitation
Hamiltonian (h_n = A_n + C_n, J_n = sqrt(A_n C_{n+1}), MinusJ convention);
spectral_data gives its exact eigenvalues and eigenvector matrix
U[n, x] = orthonormal_value(n, x).  The remaining helpers are the
equivalence transforms (sign flip, affine map), the mirror-periodicity
test and the JSON record.
"""
from __future__ import annotations

import json
import logging
import math
from functools import lru_cache
from typing import Optional

import numpy as np

from app.config import settings
from app.exceptions import InvalidSpec, OutOfSupport, ZeroScale
from app.models import (
    ChainRecord,
    FamilySpec,
    JacobiChain,
    SignConvention,
    SpectralData,
    SpectralSource,
)
from app.services import polyfam

logger = logging.getLogger("jacobichain.chain")


# ── Construction ──────────────────────────────────────────────────────────────

def build_chain(spec: FamilySpec) -> JacobiChain:
    """Jacobi matrix of the family; infinite families are truncated at K_max."""
    spec = polyfam.resolve(spec)
    last = spec.last_index
    coeffs = [polyfam.recurrence_coefficients(spec, n) for n in range(last + 1)]
    h = np.array([A + C for A, C in coeffs], dtype=float)
    J = np.array([math.sqrt(coeffs[n][0] * coeffs[n + 1][1]) for n in range(last)], dtype=float)
    if last and not np.all(J > 0):
        raise InvalidSpec(f"{spec.kind.value} parameters give a non-positive coupling: {spec.params}")
    logger.debug("[chain] built %s size=%d", spec.kind.value, len(h))
    return JacobiChain(h=h, J=J, sign_convention=SignConvention.MINUS_J, spec=spec)


@lru_cache(maxsize=256)
def spectral_data(spec: FamilySpec) -> SpectralData:
    """Exact spectrum: eigenvalues lattice(x) ascending, U[n, x] = orthonormal_value(n, x)."""
    spec.check()
    if not spec.is_finite:
        raise InvalidSpec(f"{spec.kind.value} has no finite spectrum; evolve its truncated chain with the oracle")
    size = spec.N + 1
    eigenvalues = np.array([polyfam.lattice(spec, x) for x in range(size)], dtype=float)
    U = np.empty((size, size), dtype=float)
    for n in range(size):
        for x in range(size):
            U[n, x] = polyfam.orthonormal_value(spec, n, x)
    eigenvalues.setflags(write=False)
    U.setflags(write=False)
    return SpectralData(eigenvalues=eigenvalues, U=U, source=SpectralSource.ANALYTIC)


def reconstruct(data: SpectralData) -> np.ndarray:
    """U D U^T."""
    return (data.U * data.eigenvalues) @ data.U.T


# ── Equivalence transforms ────────────────────────────────────────────────────

def flip_sign(chain: JacobiChain) -> JacobiChain:
    """M'_{jk} = (-1)^{j+k} M_{jk}: same h and J, opposite off-diagonal sign."""
    flipped = (
        SignConvention.PLUS_J if chain.sign_convention == SignConvention.MINUS_J else SignConvention.MINUS_J
    )
    return JacobiChain(h=chain.h.copy(), J=chain.J.copy(), sign_convention=flipped, spec=chain.spec)


def affine_transform(chain: JacobiChain, lam: float, mu: float) -> JacobiChain:
    """M' = lam M + mu I.  For lam < 0 the couplings stay positive and the sign flag toggles."""
    if lam == 0:
        raise ZeroScale("affine transform needs lambda != 0")
    out = JacobiChain(
        h=lam * chain.h + mu,
        J=abs(lam) * chain.J,
        sign_convention=chain.sign_convention,
        spec=chain.spec,
    )
    return flip_sign(out) if lam < 0 else out


def is_mirror_periodic(chain: JacobiChain, tol: Optional[float] = None) -> bool:
    """h_n = h_{N-n} and J_n = J_{N-1-n} up to tol times the largest entry."""
    tol = settings.MIRROR_TOL if tol is None else tol
    if tol <= 0:
        raise ValueError(f"tol must be > 0 (got {tol})")
    scale = max(np.max(np.abs(chain.h)), np.max(np.abs(chain.J), initial=0.0), 1e-300)
    dev = np.max(np.abs(chain.h - chain.h[::-1]))
    if len(chain.J):
        dev = max(dev, np.max(np.abs(chain.J - chain.J[::-1])))
    return bool(dev <= tol * scale)


def perturb(chain: JacobiChain, index: int, eps: float) -> JacobiChain:
    """Add eps to coupling J_index."""
    if not 0 <= index < len(chain.J):
        raise OutOfSupport(f"coupling index {index} outside 0..{len(chain.J) - 1}")
    J = chain.J.copy()
    J[index] += eps
    return JacobiChain(h=chain.h.copy(), J=J, sign_convention=chain.sign_convention, spec=chain.spec)


# ── Serialization ─────────────────────────────────────────────────────────────

def chain_to_record(chain: JacobiChain) -> ChainRecord:
    spec = chain.spec
    return ChainRecord(
        kind=spec.kind if spec else None,
        N=chain.N,
        params=spec.params if spec else {},
        h=[float(v) for v in chain.h],
        J=[float(v) for v in chain.J],
        sign=chain.sign_convention,
    )


def chain_from_record(record: ChainRecord) -> JacobiChain:
    spec = None
    if record.kind is not None:
        fields = dict(record.params)
        if record.kind.value in ("charlier", "meixner"):
            fields["K_max"] = record.N
        else:
            fields["N"] = record.N
        spec = FamilySpec.build(kind=record.kind, **fields)
    return JacobiChain(
        h=np.array(record.h, dtype=float),
        J=np.array(record.J, dtype=float),
        sign_convention=record.sign,
        spec=spec,
    )


def chain_to_json(chain: JacobiChain) -> str:
    """JSON text; floats use Python's shortest round-trip repr."""
    return json.dumps(chain_to_record(chain).model_dump(mode="json"), indent=2) + "\n"


def chain_from_json(text: str) -> JacobiChain:
    return chain_from_record(ChainRecord.model_validate_json(text))
