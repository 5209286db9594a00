"""
Reference dynamics with no polynomial theory in it.

  eig_tridiagonal    implicit-shift QL on the symmetric tridiagonal matrix
  evolve_oracle      column s of exp(-i t M)
  evolve_matrix      the whole of exp(-i t M)
  truncation_sweep   evolve_oracle on truncated Charlier / Meixner chains

The truncated infinite chains are written out here from their Hamiltonians
(Charlier h_k = k + alpha, J_k = sqrt(alpha (k+1)); Meixner
h_k = (k + c (k+b)) / (1-c), J_k = sqrt(c (k+1)(k+b)) / (1-c)) so this module
never reaches into polyfam or hypergeom.
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np

from app.config import settings
from app.exceptions import ConvergenceFailure, InvalidSpec, OutOfSupport
from app.models import DenseSpectrum, FamilyKind, FamilySpec, JacobiChain, SignConvention

logger = logging.getLogger("jacobichain.oracle")

# Components below this are treated as zero when fixing eigenvector signs
_SIGN_EPS = 1e-12


def eig_tridiagonal(chain: JacobiChain, max_iter: Optional[int] = None) -> DenseSpectrum:
    """Full eigen-decomposition, eigenvalues ascending, first nonzero component of each vector > 0."""
    max_iter = settings.QL_MAX_ITER if max_iter is None else max_iter
    n = chain.size
    if n < 1:
        raise OutOfSupport("empty chain")
    d = np.array(chain.h, dtype=float)
    e = np.zeros(n, dtype=float)
    e[: n - 1] = chain.off_diagonal
    # Row i of Z accumulates eigenvector i.
    Z = np.eye(n)

    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise ConvergenceFailure(f"QL did not converge for eigenvalue {l} after {max_iter} iterations")
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = Z[i].copy()
                Z[i] = c * zi - s * Z[i + 1]
                Z[i + 1] = s * zi + c * Z[i + 1]
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0

    order = np.argsort(d, kind="stable")
    values = d[order]
    vectors = Z[order].T.copy()
    for j in range(n):
        col = vectors[:, j]
        lead = np.flatnonzero(np.abs(col) > _SIGN_EPS)
        if len(lead) and col[lead[0]] < 0:
            vectors[:, j] = -col
    return DenseSpectrum(eigenvalues=values, eigenvectors=vectors)


def evolve_from_spectrum(spectrum: DenseSpectrum, s: int, t: float) -> np.ndarray:
    """V exp(-i t Lambda) V^T e_s."""
    V = spectrum.eigenvectors
    if not 0 <= s < V.shape[0]:
        raise OutOfSupport(f"site {s} outside 0..{V.shape[0] - 1}")
    return V @ (np.exp(-1j * t * spectrum.eigenvalues) * V[s, :])


def evolve_oracle(chain: JacobiChain, s: int, t: float) -> np.ndarray:
    return evolve_from_spectrum(eig_tridiagonal(chain), s, t)


def evolve_matrix(chain: JacobiChain, t: float, spectrum: Optional[DenseSpectrum] = None) -> np.ndarray:
    spectrum = spectrum or eig_tridiagonal(chain)
    V = spectrum.eigenvectors
    return (V * np.exp(-1j * t * spectrum.eigenvalues)) @ V.T


# ── Truncated infinite chains ─────────────────────────────────────────────────

def truncated_chain(spec: FamilySpec, K: int) -> JacobiChain:
    """Sites 0..K of the Charlier or Meixner Hamiltonian (MinusJ convention)."""
    spec.check()
    k = np.arange(K + 1, dtype=float)
    if spec.kind == FamilyKind.CHARLIER:
        a = spec.alpha
        h = k + a
        J = np.sqrt(a * (k[:-1] + 1.0))
    elif spec.kind == FamilyKind.MEIXNER:
        b, c = spec.b, spec.c
        h = (k + c * (k + b)) / (1.0 - c)
        J = np.sqrt(c * (k[:-1] + 1.0) * (k[:-1] + b)) / (1.0 - c)
    else:
        raise InvalidSpec(f"truncation applies to charlier / meixner, not {spec.kind.value}")
    return JacobiChain(h=h, J=J, sign_convention=SignConvention.MINUS_J, spec=spec.model_copy(update={"K_max": K}))


def truncation_sweep(spec: FamilySpec, r: int, s: int, t: float, K_list: Sequence[int]) -> list[complex]:
    """f_{r,s}(t) from truncated chains of each size in K_list."""
    out: list[complex] = []
    for K in K_list:
        if max(r, s) > K:
            raise OutOfSupport(f"sites ({r}, {s}) outside a chain truncated at K={K}")
        column = evolve_oracle(truncated_chain(spec, K), s, t)
        out.append(complex(column[r]))
        logger.debug("[oracle] %s K=%d f=%s", spec.kind.value, K, out[-1])
    return out
