# pylint: disable=redefined-outer-name

"""Tests for shift_algebra"""

import numpy as np
import pytest
from scipy import linalg

from electron_polariton_simulation.electron import Wavepacket
from electron_polariton_simulation.shift_algebra import (
    ConvergenceError,
    DimensionMismatchError,
    ShiftMatrix,
    ShiftPoly,
    apply_poly,
    cluster_momenta,
    find_momenta,
    mat_exp,
    momenta_match,
    poly_add,
    poly_dagger,
    poly_mul,
)

POTENTIALS = np.array([0.0, 0.31, 0.74])
SHARED_GRID = np.arange(-3, 4) * 0.25


@pytest.fixture
def hermitian_generator():
    """Graded Hermitian 3×3 generator with fixed pseudo-random amplitudes."""
    rng = np.random.default_rng(7)
    raw = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    amplitudes = 0.4 * (raw + raw.conj().T)
    np.fill_diagonal(amplitudes, 0.0)
    return ShiftMatrix(amplitudes=amplitudes, potentials=POTENTIALS)


# ─────────────────────────────────────────────────────────────
# TEST: Momentum tolerance
# ─────────────────────────────────────────────────────────────


def test_momenta_match_is_relative_and_absolute():
    assert momenta_match(1000.0, 1000.0 + 5e-7)
    assert not momenta_match(1.0, 1.0 + 1e-6)
    assert momenta_match(0.0, 5e-13)


def test_cluster_momenta_labels_follow_input_order():
    representatives, labels = cluster_momenta(np.array([0.5, 0.1, 0.5 + 1e-13, -0.2]))
    np.testing.assert_array_equal(representatives, [-0.2, 0.1, 0.5])
    np.testing.assert_array_equal(labels, [2, 1, 2, 0])


def test_find_momenta():
    grid = np.array([-1.0, 0.0, 0.25, 2.0])
    found = find_momenta(grid, [0.25 + 1e-14, 3.0, -1.0, 0.1])
    np.testing.assert_array_equal(found, [2, -1, 0, -1])
    assert find_momenta(np.zeros(0), [1.0])[0] == -1


# ─────────────────────────────────────────────────────────────
# TEST: ShiftPoly
# ─────────────────────────────────────────────────────────────


def test_canonical_merges_and_drops():
    poly = ShiftPoly.canonical([(1.0, 0.5), (2.0, 0.5 + 1e-12), (1.0, 0.1), (-1.0, 0.1)])
    assert len(poly.terms) == 1
    assert poly.terms[0][0] == 3.0
    assert ShiftPoly.canonical([(1e-17, 0.3)]).is_zero


def test_canonical_form_is_order_independent():
    terms = [(0.2 + 0.1j, 0.7), (1.0, -0.3), (0.5j, 0.7 + 1e-13), (0.3, 0.0)]
    assert ShiftPoly.canonical(terms) == ShiftPoly.canonical(list(reversed(terms)))


def test_products_add_momenta():
    product = poly_mul(ShiftPoly.monomial(2.0, 0.3), ShiftPoly.monomial(0.5j, -0.1))
    assert product.amplitude_at(0.2) == pytest.approx(1j)
    assert (ShiftPoly.one() * ShiftPoly.monomial(3.0, 1.0)).amplitude_at(1.0) == 3.0


def test_dagger_negates_momenta():
    poly = poly_dagger(ShiftPoly.monomial(1 + 2j, 0.4))
    assert poly.terms == ((1 - 2j, -0.4),)


def test_exact_merge_tolerance_keeps_close_terms():
    a, b = ShiftPoly.monomial(1.0, 0.5), ShiftPoly.monomial(1.0, 0.5 + 1e-12)
    assert len(poly_add(a, b, merge_tol=0.0).terms) == 2
    assert len(poly_add(a, b).terms) == 1



# ─────────────────────────────────────────────────────────────
# TEST: ShiftPoly algebra laws
# ─────────────────────────────────────────────────────────────


@pytest.fixture
def random_polys():
    """Seeded polys whose momenta lie on a shared dyadic grid, so sums of momenta are exact."""
    rng = np.random.default_rng(21)
    polys = []
    for _ in range(6):
        size = int(rng.integers(1, 5))
        momenta = rng.choice(SHARED_GRID, size=size)
        amplitudes = rng.normal(size=size) + 1j * rng.normal(size=size)
        polys.append(ShiftPoly.canonical(zip(amplitudes, momenta), rel_tol=0.0, abs_tol=0.0))
    return polys


def _assert_same_poly(left, right):
    momenta = {q for _, q in left.terms} | {q for _, q in right.terms}
    for q in momenta:
        assert left.amplitude_at(q) == pytest.approx(right.amplitude_at(q), abs=1e-12)


def test_product_is_associative_and_commutative(random_polys):
    a, b, c = random_polys[:3]
    _assert_same_poly(
        poly_mul(a, poly_mul(b, c, merge_tol=0.0), merge_tol=0.0),
        poly_mul(poly_mul(a, b, merge_tol=0.0), c, merge_tol=0.0),
    )
    _assert_same_poly(poly_mul(a, b, merge_tol=0.0), poly_mul(b, a, merge_tol=0.0))


def test_product_distributes_over_sum(random_polys):
    a, b, c = random_polys[3:]
    left = poly_mul(a, poly_add(b, c, merge_tol=0.0), merge_tol=0.0)
    right = poly_add(poly_mul(a, b, merge_tol=0.0), poly_mul(a, c, merge_tol=0.0), merge_tol=0.0)
    _assert_same_poly(left, right)


def test_dagger_reverses_products_and_is_an_involution(random_polys):
    for a, b in zip(random_polys, random_polys[1:]):
        _assert_same_poly(
            poly_dagger(poly_mul(a, b, merge_tol=0.0)),
            poly_mul(poly_dagger(b), poly_dagger(a), merge_tol=0.0),
        )
        assert poly_dagger(poly_dagger(a)) == a


# ─────────────────────────────────────────────────────────────
# TEST: ShiftMatrix
# ─────────────────────────────────────────────────────────────


def test_graded_product_matches_general_product(hermitian_generator):
    graded = hermitian_generator.matmul(hermitian_generator)
    general = hermitian_generator.general().matmul(hermitian_generator.general())
    assert not general.is_graded
    for i in range(3):
        for j in range(3):
            q = graded.momentum(i, j)
            assert general.entry(i, j).amplitude_at(q) == pytest.approx(graded.amplitudes[i, j], abs=1e-14)
            assert general.entry(i, j).norm() == pytest.approx(abs(graded.amplitudes[i, j]), abs=1e-14)


def test_dagger_transpose_of_hermitian_generator(hermitian_generator):
    difference = hermitian_generator.add(hermitian_generator.dagger_transpose().scale(-1.0))
    assert difference.total_norm() == pytest.approx(0.0, abs=1e-15)
    general = hermitian_generator.general()
    assert general.add(general.dagger_transpose().scale(-1.0)).total_norm() == pytest.approx(0.0, abs=1e-15)


def test_graded_exponential_matches_dense_expm(hermitian_generator):
    smatrix = mat_exp(hermitian_generator, -1j)
    np.testing.assert_allclose(smatrix.amplitudes, linalg.expm(-1j * hermitian_generator.amplitudes), atol=1e-13)
    assert smatrix.is_graded


def test_exponential_is_unitary(hermitian_generator):
    smatrix = mat_exp(hermitian_generator, -1j)
    assert smatrix.dagger_transpose().matmul(smatrix).subtract_identity_norm() < 1e-12


def test_squarings_do_not_change_the_result(hermitian_generator):
    direct = mat_exp(hermitian_generator, -1j)
    squared = mat_exp(hermitian_generator, -1j, squarings=3)
    np.testing.assert_allclose(squared.amplitudes, direct.amplitudes, atol=1e-12)


def test_general_exponential_matches_graded(hermitian_generator):
    graded = mat_exp(hermitian_generator, -1j)
    general = mat_exp(hermitian_generator.general(), -1j)
    assert general.add(graded.general().scale(-1.0)).total_norm() < 1e-12
    assert general.subtract_identity_norm() == pytest.approx(graded.subtract_identity_norm(), abs=1e-12)


def test_exponential_convergence_failure(hermitian_generator):
    with pytest.raises(ConvergenceError):
        mat_exp(hermitian_generator.scale(20.0), -1j, max_terms=3)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        ShiftMatrix.identity(2).matmul(ShiftMatrix.identity(3))
    with pytest.raises(DimensionMismatchError):
        ShiftMatrix(amplitudes=np.eye(2), potentials=np.zeros(3))


def test_constructor_needs_exactly_one_representation():
    with pytest.raises(ValueError):
        ShiftMatrix()
    with pytest.raises(ValueError):
        ShiftMatrix.zeros(2).momentum(0, 1)


# ─────────────────────────────────────────────────────────────
# TEST: Action on wavepackets
# ─────────────────────────────────────────────────────────────


def test_apply_poly_moves_amplitude():
    w = Wavepacket(10.0, np.array([10.0]), np.array([1.0 + 0j]))
    shifted = apply_poly(ShiftPoly.canonical([(0.5, 0.2), (0.5j, -0.2)]), w)
    np.testing.assert_allclose(shifted.momenta, [9.8, 10.2])
    np.testing.assert_allclose(shifted.amplitudes, [0.5, 0.5j])


def test_apply_poly_merges_returning_paths():
    w = Wavepacket(10.0, np.array([9.9, 10.1]), np.array([1.0, 1.0], dtype=complex))
    shifted = apply_poly(ShiftPoly.canonical([(1.0, 0.1), (1.0, -0.1)]), w)
    assert shifted.amplitude_at(10.0) == pytest.approx(2.0)
    assert shifted.momenta.size == 3


def test_apply_zero_poly_gives_empty_packet():
    w = Wavepacket(10.0, np.array([10.0]), np.array([1.0 + 0j]))
    assert apply_poly(ShiftPoly.zero(), w).momenta.size == 0
