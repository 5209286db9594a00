"""
Tests for chain construction, spectral data, equivalence transforms and JSON records.
"""
import math

import numpy as np
import pytest

from app.exceptions import InvalidSpec, OutOfSupport, ZeroScale
from app.models import FamilySpec, SignConvention
from app.services import chain as chain_svc


# ── build_chain ───────────────────────────────────────────────────────────────

def test_krawtchouk_half_chain():
    """N=2, p=1/2: h = [1, 1, 1], J = [1/sqrt(2)] * 2."""
    built = chain_svc.build_chain(FamilySpec.krawtchouk(2, 0.5))
    assert built.h == pytest.approx([1.0, 1.0, 1.0])
    assert built.J == pytest.approx([math.sqrt(0.5)] * 2)
    assert built.sign_convention == SignConvention.MINUS_J


def test_dualhahn_small_chain():
    """N=1, gamma=delta=1/2: h = [1.5, 1.5], J = [1.5]."""
    built = chain_svc.build_chain(FamilySpec.dualhahn(1, 0.5, 0.5))
    assert built.h == pytest.approx([1.5, 1.5])
    assert built.J == pytest.approx([1.5])


def test_single_site_chain():
    """N=0 is a 1x1 chain with no couplings."""
    built = chain_svc.build_chain(FamilySpec.hahn(0, 0.3, 0.7))
    assert built.size == 1 and len(built.J) == 0


def test_charlier_chain_uses_truncation():
    """Charlier: h_n = n + alpha, J_n = sqrt(alpha (n+1)) on 0..K_max."""
    built = chain_svc.build_chain(FamilySpec.charlier(1.5, K_max=5))
    assert built.h == pytest.approx(np.arange(6) + 1.5)
    assert built.J == pytest.approx(np.sqrt(1.5 * np.arange(1, 6)))


def test_invalid_spec_rejected():
    """p outside (0, 1) cannot be built."""
    with pytest.raises(InvalidSpec):
        chain_svc.build_chain(FamilySpec(kind="krawtchouk", N=2, p=1.5))


# ── spectral_data ─────────────────────────────────────────────────────────────

@pytest.mark.parametrize(
    "spec",
    [
        FamilySpec.krawtchouk(7, 0.3),
        FamilySpec.hahn(7, 0.5, 2.0),
        FamilySpec.dualhahn(7, 0.5, 2.0),
        FamilySpec.racah(7, 11.0, 0.5, 2.0),
    ],
    ids=lambda s: s.kind.value,
)
def test_spectral_data_reconstructs_chain(spec):
    """U is orthogonal and U D U^T is the Jacobi matrix."""
    data = chain_svc.spectral_data(spec)
    n = spec.N + 1
    assert np.max(np.abs(data.U @ data.U.T - np.eye(n))) < 1e-12
    built = chain_svc.build_chain(spec)
    scale = np.max(np.abs(built.matrix()))
    assert np.max(np.abs(chain_svc.reconstruct(data) - built.matrix())) < 1e-11 * scale


@pytest.mark.parametrize(
    "spec",
    [
        FamilySpec.krawtchouk(64, 0.3),
        FamilySpec.hahn(64, 0.5, 1.5),
        FamilySpec.dualhahn(64, 0.5, 1.5),
        FamilySpec.racah(64, 80.5, 0.7, 1.3),
    ],
    ids=lambda s: s.kind.value,
)
def test_dual_orthogonality_at_64(spec):
    """Rows and columns of U stay orthonormal at N = 64."""
    U = chain_svc.spectral_data(spec).U
    assert np.max(np.abs(U @ U.T - np.eye(65))) < 1e-10
    assert np.max(np.abs(U.T @ U - np.eye(65))) < 1e-10


def test_racah_chain_tends_to_dualhahn():
    """beta -> infinity: Racah h and J approach the dual Hahn chain with no rescaling."""
    racah = chain_svc.build_chain(FamilySpec.racah(6, 1e6, 0.7, 1.3))
    dual = chain_svc.build_chain(FamilySpec.dualhahn(6, 0.7, 1.3))
    assert np.max(np.abs(racah.h - dual.h) / np.abs(dual.h)) < 1e-4
    assert np.max(np.abs(racah.J - dual.J) / dual.J) < 1e-4
    nearer = chain_svc.build_chain(FamilySpec.racah(6, 1e3, 0.7, 1.3))
    assert np.max(np.abs(nearer.J - dual.J)) > np.max(np.abs(racah.J - dual.J))


def test_spectral_data_is_read_only(kraw_half):
    """Cached arrays cannot be mutated by callers."""
    data = chain_svc.spectral_data(kraw_half)
    with pytest.raises(ValueError):
        data.U[0, 0] = 2.0
    assert list(data.eigenvalues) == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_spectral_data_infinite_family():
    """Charlier has no finite spectrum."""
    with pytest.raises(InvalidSpec):
        chain_svc.spectral_data(FamilySpec.charlier(1.0, K_max=10))


# ── Equivalence transforms ────────────────────────────────────────────────────

def test_flip_sign_toggles_convention(kraw_skew):
    """Same h and J, opposite off-diagonal sign."""
    built = chain_svc.build_chain(kraw_skew)
    flipped = chain_svc.flip_sign(built)
    assert flipped.sign_convention == SignConvention.PLUS_J
    assert np.array_equal(flipped.off_diagonal, -built.off_diagonal)
    assert chain_svc.flip_sign(flipped).sign_convention == SignConvention.MINUS_J


def test_affine_transform_matrix(kraw_skew):
    """M' = lam M + mu I for both signs of lam."""
    built = chain_svc.build_chain(kraw_skew)
    for lam, mu in ((2.0, 0.5), (-1.5, 3.0)):
        moved = chain_svc.affine_transform(built, lam, mu)
        assert np.allclose(moved.matrix(), lam * built.matrix() + mu * np.eye(built.size), atol=1e-14)
        assert np.all(moved.J > 0)


def test_affine_transform_zero_scale(kraw_skew):
    """lam = 0 is rejected."""
    with pytest.raises(ZeroScale):
        chain_svc.affine_transform(chain_svc.build_chain(kraw_skew), 0.0, 1.0)


def test_mirror_periodicity():
    """p = 1/2 Krawtchouk and alpha = beta Hahn are mirror-periodic; p = 0.3 is not."""
    assert chain_svc.is_mirror_periodic(chain_svc.build_chain(FamilySpec.krawtchouk(6, 0.5)))
    assert chain_svc.is_mirror_periodic(chain_svc.build_chain(FamilySpec.hahn(6, 1.0, 1.0)))
    assert chain_svc.is_mirror_periodic(chain_svc.build_chain(FamilySpec.dualhahn(5, 0.5, 0.5)))
    assert not chain_svc.is_mirror_periodic(chain_svc.build_chain(FamilySpec.krawtchouk(6, 0.3)))


def test_mirror_periodicity_tolerance(kraw_half):
    """tol must be positive."""
    with pytest.raises(ValueError):
        chain_svc.is_mirror_periodic(chain_svc.build_chain(kraw_half), tol=0.0)


def test_perturb_coupling(kraw_half):
    """perturb adds eps to one coupling and leaves the original untouched."""
    built = chain_svc.build_chain(kraw_half)
    bumped = chain_svc.perturb(built, 0, 1e-3)
    assert bumped.J[0] == pytest.approx(built.J[0] + 1e-3)
    assert np.array_equal(bumped.J[1:], built.J[1:])
    with pytest.raises(OutOfSupport):
        chain_svc.perturb(built, 4, 1e-3)


# ── JSON record ───────────────────────────────────────────────────────────────

def test_chain_json_record(dualhahn_pst):
    """JSON carries kind, N, params, h, J and sign, and reads back the same chain."""
    built = chain_svc.build_chain(dualhahn_pst)
    text = chain_svc.chain_to_json(built)
    assert '"kind": "dualhahn"' in text and '"sign": "minus"' in text
    back = chain_svc.chain_from_json(text)
    assert np.array_equal(back.h, built.h) and np.array_equal(back.J, built.J)
    assert back.spec == built.spec


def test_chain_json_length_mismatch():
    """h must have N+1 entries and J must have N."""
    with pytest.raises(ValueError):
        chain_svc.chain_from_json('{"N": 2, "h": [1, 1], "J": [1, 1], "sign": "minus"}')
