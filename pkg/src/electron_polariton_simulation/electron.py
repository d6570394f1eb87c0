"""Free Electron Module.

This module represents the probing electron on a sparse set of momenta. The
exchanged momenta q = ΔE/ħv0 of the polariton ladder are incommensurate, so there
is no global uniform grid: a wavepacket stores the exact momenta it occupies and
merges momenta that agree within the shift-algebra tolerance. It includes:
- Wavepacket: sparse amplitudes B(k) around the central wave number k0
- MomentumDistribution: momentum populations after tracing out the target
- KDistribution: population changes Δn_k in units of ω_c/v0, with broadening
- monochromatic and comb (modulated beam) constructors
- comb_overlap, delta_n, energy_change and the nonrecoil energy bookkeeping
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from electron_polariton_simulation.hilbert import ELECTRON_REST_ENERGY_EV, HBAR_C_EV_NM, k0_from_speed
from electron_polariton_simulation.lineshape import lorentzian
from electron_polariton_simulation.shift_algebra import AMPLITUDE_FLOOR, find_momenta, merge_sparse

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9
SPEED_CONSISTENCY_TOLERANCE = 1e-9
BROADENING_CUTOFF = 40.0


class InvalidCombError(Exception):
    """Raised when a comb is requested with an odd or negative tooth count or a zero spacing."""


class NormalizationMismatchError(Exception):
    """Raised when two momentum distributions do not carry the same total population."""


class InconsistentSpeedError(Exception):
    """Raised when a distribution's k0 does not belong to the given electron speed."""


@dataclass(frozen=True, eq=False)
class Wavepacket:
    """Sparse electron state Σ_k B(k)|k⟩.

    Attributes:
        k0 (float): Central wave number m_e v0/ħ in 1/nm.
        momenta (np.ndarray): Sorted, pairwise distinct momenta in 1/nm.
        amplitudes (np.ndarray): Complex amplitudes B(k), aligned with momenta.
    """

    k0: float
    momenta: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        momenta = np.asarray(self.momenta, dtype=float)
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if momenta.shape != amplitudes.shape or momenta.ndim != 1:
            raise ValueError("momenta and amplitudes must be one-dimensional arrays of equal length.")
        if not np.all(np.isfinite(momenta)):
            raise ValueError("wavepacket momenta must be finite.")
        object.__setattr__(self, "momenta", momenta)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_entries(cls, k0: float, momenta, amplitudes) -> Wavepacket:
        """Builds a canonical wavepacket, merging coinciding momenta and dropping empty ones."""
        merged_momenta, merged_amplitudes = merge_sparse(np.asarray(momenta, dtype=float), amplitudes)
        keep = np.abs(merged_amplitudes) > AMPLITUDE_FLOOR
        return cls(k0, merged_momenta[keep], merged_amplitudes[keep])

    def with_entries(self, momenta, amplitudes) -> Wavepacket:
        """Returns a canonical wavepacket with the same k0 and new entries."""
        return Wavepacket.from_entries(self.k0, momenta, amplitudes)

    @property
    def entries(self) -> dict[float, complex]:
        """Mapping momentum → amplitude."""
        return dict(zip(self.momenta.tolist(), self.amplitudes.tolist()))

    def norm(self) -> float:
        """Σ_k |B(k)|²."""
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def normalized(self) -> Wavepacket:
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("cannot normalize an empty wavepacket.")
        return Wavepacket(self.k0, self.momenta, self.amplitudes / math.sqrt(norm))

    def amplitude_at(self, k: float) -> complex:
        """Amplitude at k, zero when k is not occupied."""
        index = find_momenta(self.momenta, k)[0]
        return complex(self.amplitudes[index]) if index >= 0 else 0j

    def scaled(self, factor: complex) -> Wavepacket:
        return Wavepacket(self.k0, self.momenta, factor * self.amplitudes)

    def populations(self) -> MomentumDistribution:
        return MomentumDistribution(self.k0, self.momenta, np.abs(self.amplitudes) ** 2)


@dataclass(frozen=True, eq=False)
class MomentumDistribution:
    """Momentum populations ⟨n_k⟩ of the electron after tracing out the target."""

    k0: float
    momenta: np.ndarray
    populations: np.ndarray

    def total(self) -> float:
        return float(np.sum(self.populations))


@dataclass(frozen=True, eq=False)
class KDistribution:
    """Population change Δn_k = ⟨n_k⟩ − ⟨n_k⟩⁰ on the union of both supports.

    Attributes:
        k0 (float): Central wave number in 1/nm.
        k_unit (float): Unit of the momentum offsets in 1/nm, usually ω_c/v0.
        momenta (np.ndarray): Absolute momenta in 1/nm, sorted.
        delta_n (np.ndarray): Population change per momentum.
    """

    k0: float
    k_unit: float
    momenta: np.ndarray
    delta_n: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        """(k − k0) in units of k_unit."""
        return (self.momenta - self.k0) / self.k_unit

    def total(self) -> float:
        """Σ Δn_k; zero for a number-conserving process."""
        return float(np.sum(self.delta_n))

    def first_moment(self) -> float:
        """Σ (k − k0)/k_unit · Δn_k."""
        return float(np.sum(self.offsets * self.delta_n))

    def broadened(self, offsets, width: float, cutoff: float = BROADENING_CUTOFF) -> np.ndarray:
        """
        Samples Σ_k Δn_k·L(x − x_k) on the given offsets.

        L is a unit-area Lorentzian of full width ``width`` (offset units), truncated at
        ±cutoff widths and renormalized, so the broadened curve keeps the zeroth and
        first moments of the line list.
        """
        offsets = np.asarray(offsets, dtype=float)
        result = np.zeros(offsets.shape)
        for center, value in zip(self.offsets, self.delta_n):
            if value != 0.0:
                result += value * lorentzian(offsets, center, width, cutoff)
        return result

    def to_frame(self):
        """Returns the line list as a DataFrame with columns k_offset_units and delta_n."""
        return pd.DataFrame({"k_offset_units": self.offsets, "delta_n": self.delta_n})


def monochromatic(v0_over_c: float) -> Wavepacket:
    """Single plane wave at k0 = m_e v0/ħ."""
    k0 = k0_from_speed(v0_over_c)
    return Wavepacket(k0, np.array([k0]), np.array([1.0 + 0j]))


def comb(v0_over_c: float, q_mod: float, n_teeth: int, running_phase: float = 0.0) -> Wavepacket:
    """
    Builds a modulated beam: N+1 equal-weight momentum peaks spaced by q_mod.

    The amplitudes are e^{inξ}/√(N+1) at k0 + n·q_mod for n = −N/2 … N/2.

    Args:
        v0_over_c (float): Electron speed in units of c.
        q_mod (float): Peak spacing in 1/nm.
        n_teeth (int): N, a non-negative even integer.
        running_phase (float): ξ in radians.

    Returns:
        Wavepacket: Normalized comb, the monochromatic state when N = 0.

    Raises:
        InvalidCombError: If N is odd or negative, or q_mod is zero for N > 0.
    """
    if int(n_teeth) != n_teeth or n_teeth < 0 or n_teeth % 2:
        raise InvalidCombError(f"n_teeth must be a non-negative even integer, got {n_teeth}.")
    if n_teeth and (q_mod == 0.0 or not math.isfinite(q_mod)):
        raise InvalidCombError(f"q_mod must be finite and nonzero, got {q_mod}.")
    k0 = k0_from_speed(v0_over_c)
    half = int(n_teeth) // 2
    n = np.arange(-half, half + 1)
    amplitudes = np.exp(1j * n * running_phase) / math.sqrt(n_teeth + 1)
    order = np.argsort(n * q_mod)
    return Wavepacket(k0, (k0 + n * q_mod)[order], amplitudes[order])


def comb_overlap(w: Wavepacket, q: float) -> complex:
    """Returns Σ_k B(k)·B*(k − q) with tolerance-matched momenta."""
    partner = find_momenta(w.momenta, w.momenta - q)
    matched = partner >= 0
    return complex(np.sum(w.amplitudes[matched] * np.conj(w.amplitudes[partner[matched]])))


def _as_distribution(marginal) -> MomentumDistribution:
    return marginal.populations() if isinstance(marginal, Wavepacket) else marginal


def delta_n(before, after, k_unit: float = 1.0) -> KDistribution:
    """
    Pointwise population difference between two momentum marginals.

    Args:
        before (MomentumDistribution | Wavepacket): Marginal before scattering.
        after (MomentumDistribution | Wavepacket): Marginal after scattering.
        k_unit (float): Unit of the reported momentum offsets in 1/nm.

    Returns:
        KDistribution: Δn on the union of both supports.

    Raises:
        NormalizationMismatchError: If the totals differ by more than 1e-9.
    """
    before, after = _as_distribution(before), _as_distribution(after)
    if abs(before.total() - after.total()) > NORMALIZATION_TOLERANCE:
        raise NormalizationMismatchError(
            f"total populations differ: {before.total():.12g} before, {after.total():.12g} after."
        )
    momenta, changes = merge_sparse(
        np.concatenate([after.momenta, before.momenta]),
        np.concatenate([after.populations, -np.asarray(before.populations)]),
    )
    return KDistribution(before.k0, k_unit, momenta, changes.real)


def _check_speed(k0: float, v0_over_c: float | None):
    if v0_over_c is None:
        return
    expected = k0_from_speed(v0_over_c)
    if abs(expected - k0) > SPEED_CONSISTENCY_TOLERANCE * expected:
        raise InconsistentSpeedError(f"k0 = {k0} 1/nm does not belong to v0 = {v0_over_c} c.")


def energy_change(dist: KDistribution, v0_over_c: float | None = None) -> float:
    """
    Expected electron energy change Σ_k E_k Δn_k in eV, with E_k = (ħk)²/2m_e.

    E_k is taken relative to E_{k0} as (ħc)²(k − k0)(k + k0)/(2m_e c²); the offset drops
    out because Σ Δn_k = 0.
    """
    _check_speed(dist.k0, v0_over_c)
    relative = HBAR_C_EV_NM**2 * (dist.momenta - dist.k0) * (dist.momenta + dist.k0) / (2.0 * ELECTRON_REST_ENERGY_EV)
    return float(np.sum(relative * dist.delta_n))


def nonrecoil_energy_change(dist: KDistribution, v0_over_c: float) -> float:
    """Linearized energy change Σ_k ħv0(k − k0)Δn_k in eV."""
    _check_speed(dist.k0, v0_over_c)
    return float(np.sum(HBAR_C_EV_NM * v0_over_c * (dist.momenta - dist.k0) * dist.delta_n))
