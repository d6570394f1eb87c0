"""Scattering Observables Module.

This module propagates product states of target and electron through the
scattering matrix and extracts what is measured afterwards. It includes
functionality for:
- Initial target states: weak coherent cavity driving and the ground/one-photon superposition
- scatter: the joint target ⊗ electron state after the interaction
- Reduced target density matrices and electron momentum marginals
- The cavity dipole operator and the long-time averaged emission power spectrum
- Peak heights and the I₀ reference intensity

A JointState holds one electron wavepacket per target basis state on a shared
momentum grid. Mixed initial target states are carried as incoherent branches,
one per eigenvector of the initial density matrix.
"""

import cmath
import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import pandas as pd

from electron_polariton_simulation.electron import MomentumDistribution, Wavepacket, monochromatic
from electron_polariton_simulation.em_couplings import induced_dipole_moment
from electron_polariton_simulation.hilbert import BareState, TargetSpace, bare_to_polariton
from electron_polariton_simulation.lineshape import lorentzian
from electron_polariton_simulation.scattering import ProbeConfig, build_interaction, require_padding, scattering_matrix
from electron_polariton_simulation.shift_algebra import DimensionMismatchError, ShiftMatrix, apply_poly, cluster_momenta

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-12
TRACE_TOLERANCE = 1e-10
EIGENVALUE_FLOOR = -1e-10
BRANCH_FLOOR = 1e-14
PADDING_FLOOR = 1e-12
DEGENERACY_TOLERANCE_EV = 1e-9


class AmplitudeOutOfRangeError(Exception):
    """Raised when a driving amplitude lies outside [0, 1]."""


class DensityMatrixError(Exception):
    """Raised when a matrix is not a valid density matrix."""


class ReferenceIntensityError(Exception):
    """Raised when the I₀ reference intensity vanishes."""


@dataclass(frozen=True, eq=False)
class TargetDensity:
    """Density matrix of the target in the polariton basis.

    Attributes:
        matrix (np.ndarray): Hermitian, unit-trace, positive semidefinite matrix.
        basis (str): Basis tag.
    """

    matrix: np.ndarray
    basis: str = "polariton"

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DensityMatrixError(f"density matrix must be square, got shape {matrix.shape}.")
        if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > HERMITIAN_TOLERANCE:
            raise DensityMatrixError("density matrix is not Hermitian.")
        trace = np.trace(matrix).real
        if abs(trace - 1.0) > TRACE_TOLERANCE:
            raise DensityMatrixError(f"density matrix trace is {trace:.12g}, expected 1.")
        if matrix.size and np.linalg.eigvalsh(matrix).min() < EIGENVALUE_FLOOR:
            raise DensityMatrixError("density matrix has a negative eigenvalue.")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def pure(cls, vector) -> "TargetDensity":
        vector = np.asarray(vector, dtype=complex)
        return cls(np.outer(vector, vector.conj()))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def populations(self) -> np.ndarray:
        """Diagonal of ρ."""
        return self.matrix.diagonal().real.copy()


@dataclass(frozen=True, eq=False)
class JointState:
    """State Σ_b Σ_i |ψ_i⟩ ⊗ |w_{b,i}⟩ of target and electron.

    Attributes:
        k0 (float): Central electron wave number in 1/nm.
        momenta (np.ndarray): Shared sorted momentum grid in 1/nm.
        amplitudes (np.ndarray): Array of shape (branches, target states, momenta).
    """

    k0: float
    momenta: np.ndarray
    amplitudes: np.ndarray

    @classmethod
    def from_wavepackets(cls, k0: float, branches: Sequence[Sequence[Wavepacket]]) -> "JointState":
        """Aligns per-state wavepackets of every branch on one momentum grid."""
        pieces = [(b, i, w) for b, row in enumerate(branches) for i, w in enumerate(row)]
        momenta = np.concatenate([w.momenta for _, _, w in pieces]) if pieces else np.zeros(0)
        grid, labels = cluster_momenta(momenta)
        n_states = max((len(row) for row in branches), default=0)
        amplitudes = np.zeros((len(branches), n_states, grid.size), dtype=complex)
        start = 0
        for b, i, w in pieces:
            stop = start + w.momenta.size
            np.add.at(amplitudes[b, i], labels[start:stop], w.amplitudes)
            start = stop
        return cls(k0, grid, amplitudes)

    @classmethod
    def product(cls, vector, w: Wavepacket) -> "JointState":
        """Unscattered product state |ψ⟩ ⊗ |w⟩."""
        vector = np.asarray(vector, dtype=complex)
        return cls(w.k0, w.momenta.copy(), (vector[:, None] * w.amplitudes[None, :])[None, :, :])

    @property
    def n_branches(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[1]

    def wavepacket(self, i: int, branch: int = 0) -> Wavepacket:
        """Electron amplitude w_i attached to target state i."""
        return Wavepacket.from_entries(self.k0, self.momenta, self.amplitudes[branch, i])

    def norm(self) -> float:
        """Σ_i ⟨w_i|w_i⟩ summed over branches."""
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True, eq=False)
class SpectrumLines:
    """Emission lines of the cavity dipole.

    Attributes:
        energies (np.ndarray): Line positions ħω₀ in eV.
        weights (np.ndarray): Line weights in (e·nm)².
        sigma (float): Lorentzian full width in eV; 0 leaves the lines unbroadened.
        transitions (tuple[tuple[str, str], ...]): (upper, lower) labels per line.
        reference (float): Intensity the sampled spectrum is divided by.
        normalization (str): "raw" or "i0".
    """

    energies: np.ndarray
    weights: np.ndarray
    sigma: float
    transitions: tuple[tuple[str, str], ...] = ()
    reference: float = 1.0
    normalization: str = "raw"

    def sample(self, omega) -> np.ndarray:
        """Broadened spectrum I(ω) at the given energies in eV; unbroadened lines fill their grid cell."""
        omega = np.asarray(omega, dtype=float)
        result = np.zeros(omega.shape)
        for energy, weight in zip(self.energies, self.weights):
            if weight != 0.0:
                result += weight * lorentzian(omega, energy, self.sigma)
        return result / self.reference

    def normalized(self, reference: float) -> "SpectrumLines":
        """Returns the same lines sampled relative to the reference intensity I₀."""
        if not reference > 0.0:
            raise ReferenceIntensityError(f"reference intensity must be positive, got {reference}.")
        return replace(self, reference=reference, normalization="i0")

    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def to_frame(self) -> pd.DataFrame:
        upper = [t[0] for t in self.transitions] or [""] * len(self.energies)
        lower = [t[1] for t in self.transitions] or [""] * len(self.energies)
        return pd.DataFrame({"omega_eV": self.energies, "weight": self.weights, "upper": upper, "lower": lower})


def pinem_initial(space: TargetSpace, f: float) -> np.ndarray:
    """
    Target after weak coherent driving of the cavity: √(1−f²)|0⟩_x|g⟩ + f|1⟩_x|g⟩.

    Raises:
        AmplitudeOutOfRangeError: If f lies outside [0, 1].
    """
    if not 0.0 <= f <= 1.0:
        raise AmplitudeOutOfRangeError(f"driving amplitude f must lie in [0, 1], got {f}.")
    return bare_to_polariton(space, {BareState(0, 0): math.sqrt(1.0 - f * f), BareState(0, 1): f})


def superposition_initial(space: TargetSpace, theta: float) -> np.ndarray:
    """Target state (√3|0⟩_x + e^{iθ}|1⟩_x)|g⟩/2 in the polariton basis."""
    amplitudes = {BareState(0, 0): math.sqrt(3.0) / 2.0, BareState(0, 1): cmath.exp(1j * theta) / 2.0}
    return bare_to_polariton(space, amplitudes)


def _branches(space: TargetSpace, target) -> list[np.ndarray]:
    """Splits a target vector or density matrix into amplitude vectors of incoherent branches."""
    if isinstance(target, TargetDensity) or np.ndim(target) == 2:
        density = target if isinstance(target, TargetDensity) else TargetDensity(target)
        if density.dimension != space.dimension:
            raise DimensionMismatchError(f"density of dimension {density.dimension} on a space of {space.dimension}.")
        values, vectors = np.linalg.eigh(density.matrix)
        return [math.sqrt(value) * vectors[:, n] for n, value in enumerate(values) if value > BRANCH_FLOOR]
    vector = np.asarray(target, dtype=complex)
    if vector.shape != (space.dimension,):
        raise DimensionMismatchError(f"state vector of shape {vector.shape} on a space of {space.dimension}.")
    return [vector]


def _scatter_graded(smatrix: ShiftMatrix, branches: list[np.ndarray], w: Wavepacket) -> JointState:
    potentials = smatrix.potentials
    n = smatrix.dimension
    populated = np.nonzero(np.any(np.abs(np.array(branches)) > 0.0, axis=0))[0]
    shifts = potentials[:, None] - potentials[None, populated]
    momenta = w.momenta[None, None, :] - shifts[:, :, None]
    grid, labels = cluster_momenta(momenta.ravel())
    labels = labels.reshape(momenta.shape)
    rows = np.broadcast_to(np.arange(n)[:, None, None], momenta.shape)
    amplitudes = np.zeros((len(branches), n, grid.size), dtype=complex)
    for b, vector in enumerate(branches):
        weights = smatrix.amplitudes[:, populated] * vector[None, populated]
        contribution = weights[:, :, None] * w.amplitudes[None, None, :]
        np.add.at(amplitudes[b], (rows, labels), contribution)
    return JointState(w.k0, grid, amplitudes)


def _scatter_general(smatrix: ShiftMatrix, branches: list[np.ndarray], w: Wavepacket) -> JointState:
    n = smatrix.dimension
    rows = []
    for vector in branches:
        row = []
        for i in range(n):
            pieces = [apply_poly(smatrix.entry(i, j), w).scaled(vector[j]) for j in np.nonzero(vector)[0]]
            momenta = np.concatenate([p.momenta for p in pieces]) if pieces else np.zeros(0)
            amplitudes = np.concatenate([p.amplitudes for p in pieces]) if pieces else np.zeros(0, dtype=complex)
            row.append(w.with_entries(momenta, amplitudes))
        rows.append(row)
    return JointState.from_wavepackets(w.k0, rows)


def scatter(
    space: TargetSpace,
    probe: ProbeConfig,
    target,
    w: Wavepacket,
    smatrix: ShiftMatrix | None = None,
) -> JointState:
    """
    Scatters a product of target state and electron wavepacket.

    The electron amplitude attached to target state i is w_i = Σ_j S_ij(b)·w·c_j.
    A precomputed scattering matrix may be passed to reuse it across a sweep; a
    graded matrix is applied in one vectorized step.

    Args:
        space (TargetSpace): Target space.
        probe (ProbeConfig): Electron probe, used for the padding check and when S has to be built.
        target (np.ndarray | TargetDensity): Initial target amplitudes or density matrix.
        w (Wavepacket): Initial electron wavepacket.
        smatrix (ShiftMatrix | None): Scattering matrix on ``space``.

    Returns:
        JointState: Final joint state.

    Raises:
        StateOutsideCapsError: If a populated state has no padding manifold above it.
    """
    branches = _branches(space, target)
    populated = np.nonzero(np.any(np.abs(np.array(branches)) > PADDING_FLOOR, axis=0))[0] if branches else []
    require_padding(space, probe, populated)
    if smatrix is None:
        smatrix = scattering_matrix(space, probe, build_interaction(space, probe, populated=populated))
    if smatrix.dimension != space.dimension:
        raise DimensionMismatchError(
            f"scattering matrix of dimension {smatrix.dimension} on a space of {space.dimension}."
        )
    if not w.momenta.size or not branches:
        return JointState(w.k0, np.zeros(0), np.zeros((len(branches), space.dimension, 0), dtype=complex))
    if smatrix.is_graded:
        return _scatter_graded(smatrix, branches, w)
    return _scatter_general(smatrix, branches, w)


def reduce_target(js: JointState) -> TargetDensity:
    """Traces out the electron: ρ_ij = Σ_b ⟨w_{b,j}|w_{b,i}⟩."""
    matrix = np.einsum("bik,bjk->ij", js.amplitudes, js.amplitudes.conj())
    return TargetDensity(0.5 * (matrix + matrix.conj().T))


def reduce_electron(js: JointState) -> MomentumDistribution:
    """Traces out the target: population Σ_i |w_i(k)|² per momentum."""
    return MomentumDistribution(js.k0, js.momenta, np.sum(np.abs(js.amplitudes) ** 2, axis=(0, 1)))


def dipole_operator(space: TargetSpace, hermitian: bool = False) -> np.ndarray:
    """
    Cavity dipole operator ξ = μ_c(a_x + a_z) in the polariton basis.

    Args:
        space (TargetSpace): Target space.
        hermitian (bool): Return ξ + ξ† instead of the lowering part ξ.

    Returns:
        np.ndarray: Matrix in e·nm.
    """
    xi = induced_dipole_moment(space.params) * (space.lowering_x + space.lowering_z)
    return xi + xi.conj().T if hermitian else xi


def _degeneracy_labels(space: TargetSpace) -> tuple[np.ndarray, np.ndarray]:
    return cluster_momenta(space.energies, rel_tol=0.0, abs_tol=DEGENERACY_TOLERANCE_EV)


def secular_part(rho, space: TargetSpace) -> np.ndarray:
    """Keeps only the elements of ρ between states of equal energy (within 1e-9 eV)."""
    matrix = rho.matrix if isinstance(rho, TargetDensity) else np.asarray(rho, dtype=complex)
    _, labels = _degeneracy_labels(space)
    return np.where(labels[:, None] == labels[None, :], matrix, 0.0)


def power_spectrum(rho, space: TargetSpace, sigma: float | None = None) -> SpectrumLines:
    """
    Long-time averaged emission spectrum of the cavity dipole.

    Under free evolution only coherences inside an energy-degeneracy class of upper
    states survive the time average. Each lower state b and class ε gives a line at
    ε − E_b with weight Σ_{a,a'∈ε} ρ_{aa'} ξ*_{ba'} ξ_{ba}, which is ⟨ξ†|b⟩⟨b|ξ⟩ on the
    secular part of ρ.

    Args:
        rho (TargetDensity | np.ndarray): Target density matrix; validated.
        space (TargetSpace): Target space.
        sigma (float | None): Lorentzian width in eV; defaults to ``space.params.sigma``.

    Returns:
        SpectrumLines: Positive-frequency lines with their weights.
    """
    density = rho if isinstance(rho, TargetDensity) else TargetDensity(rho)
    if density.dimension != space.dimension:
        raise DimensionMismatchError(f"density of dimension {density.dimension} on a space of {space.dimension}.")
    sigma = space.params.sigma if sigma is None else sigma
    xi = dipole_operator(space)
    representatives, labels = _degeneracy_labels(space)
    energies, weights, transitions = [], [], []
    for cls, upper_energy in enumerate(representatives):
        members = np.nonzero(labels == cls)[0]
        block = xi[:, members]
        coherence = density.matrix[np.ix_(members, members)]
        class_weights = np.einsum("ba,ac,bc->b", block, coherence, block.conj()).real
        for b in np.nonzero(np.any(block != 0.0, axis=1))[0]:
            frequency = upper_energy - space.energies[b]
            if frequency > DEGENERACY_TOLERANCE_EV:
                energies.append(frequency)
                weights.append(class_weights[b])
                transitions.append(("/".join(space.states[a].label for a in members), space.states[b].label))
    return SpectrumLines(np.array(energies), np.array(weights), sigma, tuple(transitions))


def peak_heights(lines: SpectrumLines, targets) -> np.ndarray:
    """
    Samples the broadened spectrum at the given energies, tails of all lines included.

    Unbroadened lines (sigma = 0) have no finite height; their summed weights at each
    target energy are returned instead.
    """
    targets = np.asarray(targets, dtype=float)
    if lines.sigma > 0.0:
        return lines.sample(targets)
    near = np.abs(targets[..., None] - lines.energies) <= DEGENERACY_TOLERANCE_EV
    return np.sum(np.where(near, lines.weights, 0.0), axis=-1) / lines.reference


def polariton_peak_positions(space: TargetSpace) -> dict[str, float]:
    """Emission energies of |1+⟩, |1z⟩ and |1−⟩ to the ground state, in eV."""
    ground = space.energies[space.index_of_label("G")]
    return {label: float(space.energies[space.index_of_label(label)] - ground) for label in ("1+", "1z", "1-")}


def i0_reference(space: TargetSpace, probe: ProbeConfig, sigma: float | None = None) -> float:
    """
    Reference intensity I₀: the mean |1±⟩ peak height of the EELS-driven spectrum
    with only the emitter channel active, at the probe's speed and impact parameter.

    Raises:
        ReferenceIntensityError: If the reference vanishes, e.g. for a dipole-free emitter.
    """
    emitter_only = replace(probe, enable_ec_x=False, enable_ec_z=False)
    js = scatter(space, emitter_only, space.ground_vector(), monochromatic(probe.v0_over_c))
    lines = power_spectrum(reduce_target(js), space, sigma)
    positions = polariton_peak_positions(space)
    reference = float(np.mean(peak_heights(lines, [positions["1+"], positions["1-"]])))
    if not reference > 0.0:
        raise ReferenceIntensityError("emitter-only driving produces no polariton emission.")
    logger.debug("I0 reference %.6e at v0 = %.4f c", reference, probe.v0_over_c)
    return reference
