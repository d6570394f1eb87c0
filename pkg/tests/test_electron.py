# pylint: disable=redefined-outer-name

"""Tests for electron"""

import math

import numpy as np
import pytest
from scipy import integrate

from electron_polariton_simulation.electron import (
    InconsistentSpeedError,
    InvalidCombError,
    KDistribution,
    NormalizationMismatchError,
    Wavepacket,
    comb,
    comb_overlap,
    delta_n,
    energy_change,
    monochromatic,
    nonrecoil_energy_change,
)
from electron_polariton_simulation.hilbert import ELECTRON_REST_ENERGY_EV, HBAR_C_EV_NM, PhysicalParams

SPEED = 0.1
LOSS_PROBABILITY = 0.1


@pytest.fixture
def q_cavity():
    """Momentum ω_c/v0 of one cavity quantum in 1/nm."""
    params = PhysicalParams(v0_over_c=SPEED)
    return params.hbar_omega_c / params.hbar_v0


@pytest.fixture
def lossy(q_cavity):
    """Electron that lost one cavity quantum with probability 0.1."""
    w = monochromatic(SPEED)
    amplitudes = [math.sqrt(LOSS_PROBABILITY), math.sqrt(1.0 - LOSS_PROBABILITY)]
    return w, Wavepacket.from_entries(w.k0, [w.k0 - q_cavity, w.k0], amplitudes)


# ─────────────────────────────────────────────────────────────
# TEST: Wavepackets and combs
# ─────────────────────────────────────────────────────────────


def test_monochromatic_state():
    w = monochromatic(SPEED)
    assert w.norm() == 1.0
    assert w.momenta[0] == w.k0
    assert w.amplitude_at(w.k0 + 1.0) == 0


def test_from_entries_merges_and_drops():
    w = Wavepacket.from_entries(5.0, [5.0, 5.0 + 1e-13, 6.0, 7.0], [0.5, 0.5, 1e-18, 1.0])
    np.testing.assert_allclose(w.momenta, [5.0, 7.0])
    assert w.amplitude_at(5.0) == pytest.approx(1.0)
    assert w.entries[7.0] == 1.0


def test_wavepacket_shapes_must_agree():
    with pytest.raises(ValueError):
        Wavepacket(1.0, np.array([1.0, 2.0]), np.array([1.0]))


def test_normalized_and_scaled():
    w = Wavepacket(1.0, np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    assert w.normalized().norm() == pytest.approx(1.0)
    assert w.scaled(1j).amplitude_at(2.0) == 4j
    with pytest.raises(ValueError):
        Wavepacket(1.0, np.zeros(0), np.zeros(0)).normalized()


def test_comb_layout():
    w = comb(SPEED, 0.2, 4, running_phase=0.3)
    assert w.momenta.size == 5
    assert w.norm() == pytest.approx(1.0)
    np.testing.assert_allclose(np.diff(w.momenta), 0.2)
    assert w.momenta[2] == w.k0
    assert w.amplitude_at(w.k0 + 0.2) == pytest.approx(np.exp(0.3j) / math.sqrt(5.0))


def test_comb_with_negative_spacing_is_sorted():
    w = comb(SPEED, -0.2, 2)
    assert np.all(np.diff(w.momenta) > 0)
    assert w.amplitude_at(w.k0 - 0.2) == pytest.approx(1.0 / math.sqrt(3.0))


def test_comb_without_teeth_is_monochromatic():
    w = comb(SPEED, 0.0, 0)
    np.testing.assert_array_equal(w.momenta, monochromatic(SPEED).momenta)


@pytest.mark.parametrize("n_teeth, q_mod", [(3, 0.1), (-2, 0.1), (4, 0.0), (2, math.inf)])
def test_invalid_comb(n_teeth, q_mod):
    with pytest.raises(InvalidCombError):
        comb(SPEED, q_mod, n_teeth)


def test_comb_overlap():
    """Neighbouring teeth overlap with N/(N+1)·e^{iξ}."""
    w = comb(SPEED, 0.2, 10, running_phase=0.5)
    assert comb_overlap(w, 0.2) == pytest.approx(10.0 / 11.0 * np.exp(0.5j))
    assert comb_overlap(w, 0.0) == pytest.approx(1.0)
    assert comb_overlap(w, 0.13) == 0


# ─────────────────────────────────────────────────────────────
# TEST: Population changes and energy
# ─────────────────────────────────────────────────────────────


def test_delta_n_of_a_loss(lossy, q_cavity):
    before, after = lossy
    change = delta_n(before, after, k_unit=q_cavity)
    assert change.total() == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(change.offsets, [-1.0, 0.0])
    np.testing.assert_allclose(change.delta_n, [LOSS_PROBABILITY, -LOSS_PROBABILITY])
    assert change.first_moment() == pytest.approx(-LOSS_PROBABILITY)


def test_delta_n_requires_equal_totals():
    w = monochromatic(SPEED)
    with pytest.raises(NormalizationMismatchError):
        delta_n(w, w.scaled(0.5))


def test_loss_lowers_the_electron_energy(lossy, q_cavity):
    before, after = lossy
    change = delta_n(before, after)
    expected = -LOSS_PROBABILITY * 2.0 + LOSS_PROBABILITY * (HBAR_C_EV_NM * q_cavity) ** 2 / (
        2.0 * ELECTRON_REST_ENERGY_EV
    )
    assert energy_change(change, SPEED) == pytest.approx(expected, rel=1e-9)
    assert nonrecoil_energy_change(change, SPEED) == pytest.approx(-LOSS_PROBABILITY * 2.0, rel=1e-9)


def test_speed_must_match_k0(lossy):
    change = delta_n(*lossy)
    with pytest.raises(InconsistentSpeedError):
        energy_change(change, 0.2)


def test_broadening_keeps_moments():
    change = KDistribution(0.0, 1.0, np.array([-1.0, 0.0]), np.array([0.3, -0.3]))
    offsets = np.linspace(-5.0, 5.0, 200_001)
    curve = change.broadened(offsets, 0.05)
    assert integrate.trapezoid(curve, offsets) == pytest.approx(0.0, abs=1e-6)
    assert integrate.trapezoid(offsets * curve, offsets) == pytest.approx(change.first_moment(), rel=1e-3)


def test_to_frame_columns(lossy):
    frame = delta_n(*lossy).to_frame()
    assert list(frame.columns) == ["k_offset_units", "delta_n"]
    assert len(frame) == 2
