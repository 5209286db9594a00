"""
Tests for the polynomial families: weights, norms, point values, recurrences.
"""
import math

import numpy as np
import pytest
from scipy.interpolate import BarycentricInterpolator

from app.exceptions import InvalidSpec, OutOfSupport
from app.models import FamilyKind, FamilySpec
from app.services import polyfam


FINITE_SPECS = [
    FamilySpec.krawtchouk(6, 0.3),
    FamilySpec.hahn(6, 0.5, 1.5),
    FamilySpec.dualhahn(6, 0.5, 1.5),
    FamilySpec.racah(6, 9.5, 0.7, 1.3),
]


# ── FamilySpec validation ─────────────────────────────────────────────────────

@pytest.mark.parametrize(
    "fields, fragment",
    [
        ({"kind": FamilyKind.KRAWTCHOUK, "N": 2, "p": 1.5}, "0 < p < 1"),
        ({"kind": FamilyKind.HAHN, "N": 3, "alpha": -1.0, "beta": 0.0}, "alpha > -1"),
        ({"kind": FamilyKind.DUALHAHN, "N": 3, "gamma": -5.0, "delta": -5.0}, "not supported"),
        ({"kind": FamilyKind.RACAH, "N": 4, "beta": 3.0, "gamma": 0.5, "delta": 0.5}, "beta > gamma + N"),
        ({"kind": FamilyKind.CHARLIER, "alpha": 0.0}, "alpha > 0"),
        ({"kind": FamilyKind.MEIXNER, "b": 1.0, "c": 1.0}, "0 < c < 1"),
        ({"kind": FamilyKind.KRAWTCHOUK, "N": -1, "p": 0.5}, "N >= 0"),
        ({"kind": FamilyKind.HAHN, "N": 3, "alpha": 1.0}, "requires parameter beta"),
    ],
)
def test_invalid_specs_name_the_constraint(fields, fragment):
    """Every violated constraint surfaces as InvalidSpec naming it."""
    with pytest.raises(InvalidSpec) as exc_info:
        FamilySpec.build(**fields)
    assert fragment in str(exc_info.value)


def test_pydantic_errors_become_invalid_spec():
    """A type error in a field is still an InvalidSpec."""
    with pytest.raises(InvalidSpec):
        FamilySpec.build(kind="krawtchouk", N="many", p=0.5)


# ── Weights and norms ─────────────────────────────────────────────────────────

@pytest.mark.parametrize("spec", FINITE_SPECS, ids=lambda s: s.kind.value)
def test_total_weight_is_d0(spec):
    """sum_x w(x) = d_0 (P_0 = 1)."""
    table = polyfam.WeightTable.build(spec)
    assert table.total_weight() == pytest.approx(table.d[0].to_float(), rel=1e-12)


@pytest.mark.parametrize("spec", FINITE_SPECS, ids=lambda s: s.kind.value)
def test_orthonormality(spec):
    """sum_x w(x) P_n(x)^2 / d_n = 1 for every degree."""
    table = polyfam.WeightTable.build(spec)
    for n in range(spec.N + 1):
        assert table.orthonormality_defect(n) < 1e-11


def test_dualhahn_weight_small_case():
    """N=2, gamma=delta=0: weights 1/3, 1/2, 1/6."""
    spec = FamilySpec.dualhahn(2, 0.0, 0.0)
    weights = [polyfam.weight(spec, x).to_float() for x in range(3)]
    assert weights == pytest.approx([1 / 3, 1 / 2, 1 / 6], rel=1e-12)


def test_krawtchouk_norm():
    """d_n = ((1-p)/p)^n / C(N, n)."""
    spec = FamilySpec.krawtchouk(5, 0.25)
    assert polyfam.norm_d(spec, 2).to_float() == pytest.approx(9.0 / 10.0, rel=1e-12)


def test_charlier_meixner_weights_sum_to_d0():
    """Truncated weight sums reach d_0 within the tail tolerance."""
    for spec in (FamilySpec.charlier(1.5), FamilySpec.meixner(2.0, 0.4)):
        table = polyfam.WeightTable.build(spec)
        assert table.total_weight() == pytest.approx(table.d[0].to_float(), rel=1e-14)


# ── Point values ──────────────────────────────────────────────────────────────

@pytest.mark.parametrize("spec", FINITE_SPECS, ids=lambda s: s.kind.value)
def test_recurrence_matches_hypergeometric(spec):
    """Upward recurrence reproduces the hypergeometric definition."""
    for n in range(spec.N + 1):
        for x in range(spec.N + 1):
            direct = polyfam.poly_eval(spec, n, x)
            assert polyfam.poly_eval_recurrence(spec, n, x) == pytest.approx(direct, rel=1e-8, abs=1e-9)


def test_krawtchouk_at_origin():
    """K_n(0) = 1."""
    spec = FamilySpec.krawtchouk(7, 0.4)
    assert all(polyfam.poly_eval(spec, n, 0) == 1 for n in range(8))


def test_large_krawtchouk_orthogonality():
    """N = 64, p = 1/2: exact precision control keeps U orthogonal."""
    spec = FamilySpec.krawtchouk(64, 0.5)
    col = [polyfam.orthonormal_value(spec, n, 32) for n in range(65)]
    assert sum(v * v for v in col) == pytest.approx(1.0, abs=1e-10)


INTERPOLATION_SPECS = [
    FamilySpec.krawtchouk(12, 0.3),
    FamilySpec.hahn(12, 0.5, 1.5),
    FamilySpec.dualhahn(10, 0.5, 1.5),
    FamilySpec.racah(10, 15.5, 0.7, 1.3),
]


@pytest.mark.parametrize("spec", INTERPOLATION_SPECS, ids=lambda s: s.kind.value)
def test_degree_by_interpolation(spec):
    """P_n through its values at 0..n reproduces P_n on n+1..N (in lambda(x) on quadratic lattices)."""
    for n in range(9):
        nodes = [polyfam.lattice(spec, x) for x in range(n + 1)]
        values = [polyfam.poly_eval(spec, n, x) for x in range(n + 1)]
        curve = BarycentricInterpolator(nodes, values)
        for x in range(n + 1, spec.N + 1):
            expected = polyfam.poly_eval(spec, n, x)
            scale = max(1.0, abs(expected), max(abs(v) for v in values))
            assert abs(float(curve(polyfam.lattice(spec, x))) - expected) <= 1e-8 * scale


@pytest.mark.parametrize(
    "spec",
    [FamilySpec.charlier(2.0, K_max=64), FamilySpec.meixner(1.0, 0.5, K_max=200)],
    ids=lambda s: s.kind.value,
)
def test_infinite_family_orthonormality(spec):
    """Low rows and low columns of U are orthonormal once the truncation holds the weight."""
    low = 8
    sites = range(spec.K_max + 1)
    rows = np.array([[polyfam.orthonormal_value(spec, n, x) for x in sites] for n in range(low + 1)])
    assert np.max(np.abs(rows @ rows.T - np.eye(low + 1))) < 1e-10
    columns = np.array([[polyfam.orthonormal_value(spec, n, x) for n in sites] for x in range(low + 1)])
    assert np.max(np.abs(columns @ columns.T - np.eye(low + 1))) < 1e-10


def test_out_of_support():
    """Points outside 0..N are rejected."""
    spec = FamilySpec.krawtchouk(3, 0.5)
    with pytest.raises(OutOfSupport):
        polyfam.poly_eval(spec, 4, 0)
    with pytest.raises(OutOfSupport):
        polyfam.weight(spec, -1)


def test_quadratic_lattice():
    """Dual Hahn / Racah eigenvalues sit on x (x + gamma + delta + 1)."""
    spec = FamilySpec.dualhahn(4, 0.5, 1.5)
    assert [polyfam.lattice(spec, x) for x in range(4)] == [0.0, 4.0, 10.0, 18.0]
    assert polyfam.lattice(FamilySpec.hahn(4, 1.0, 1.0), 3) == 3.0


# ── Truncation and limits ─────────────────────────────────────────────────────

def test_default_kmax_tail_rule():
    """The weight mass beyond K_max is below the tail tolerance."""
    spec = FamilySpec.charlier(2.0)
    K = polyfam.default_kmax(spec)
    tail = 1.0 - sum(math.exp(x * math.log(2.0) - 2.0 - math.lgamma(x + 1)) for x in range(K + 1))
    assert tail < 1e-15
    assert polyfam.resolve(spec).K_max == K


def test_dynamic_kmax_covers_spread():
    """Oracle truncation exceeds the weight-tail truncation."""
    spec = FamilySpec.meixner(1.0, 0.5)
    assert polyfam.dynamic_kmax(spec) > polyfam.default_kmax(spec)
    with pytest.raises(InvalidSpec):
        polyfam.default_kmax(FamilySpec.krawtchouk(3, 0.5))


def test_krawtchouk_to_charlier_limit():
    """K_n(x; alpha/N, N) -> C_n(x; alpha) as N grows."""
    coarse = polyfam.limit_krawtchouk_to_charlier(3, 2, 1.2, 200)
    fine = polyfam.limit_krawtchouk_to_charlier(3, 2, 1.2, 20000)
    assert fine < coarse
    assert fine < 1e-2


def test_hahn_to_meixner_limit():
    """Q_n(x; b-1, N(1-c)/c, N) -> M_n(x; b, c) as N grows."""
    coarse = polyfam.limit_hahn_to_meixner(3, 2, 1.5, 0.4, 200)
    fine = polyfam.limit_hahn_to_meixner(3, 2, 1.5, 0.4, 20000)
    assert fine < coarse
    assert fine < 1e-2
