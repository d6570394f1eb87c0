"""Electron-Target Scattering Module.

This module assembles the dimensionless interaction matrix of a passing electron
with the target and exponentiates it into the scattering matrix. It includes:
- ProbeConfig: electron speed, impact parameters and channel switches
- build_interaction / matrix_element_h: 𝒽_ij·b_{q_ij} with q_ij = (E_i − E_j)/ħv0
- scattering_matrix: S = exp(−i𝒽) over the shift-operator algebra
- joint_space_oracle: brute-force exponential on target ⊗ discrete electron momenta

The interaction Hamiltonian per momentum transfer q is

    ħ g_x(q) b_q (a_x† − a_x) sign(q) + ħ g_z(q) b_q (a_z† − a_z) sign(q)
        + ħ g_QE(q) e^{iqz_QE} b_q (σ† − σ) sign(q),

which is Hermitian because the couplings are even in q. With this sign of the
emitter term the ground-to-polariton elements are 𝒽_{G,1±} = (h_x ± h_QE)/√2 at
resonance, so the lower polariton is the one that can be switched dark.
"""

import logging
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from electron_polariton_simulation.em_couplings import reduced_g_ec, reduced_g_eqe
from electron_polariton_simulation.hilbert import (
    InvalidParameterError,
    PhysicalParams,
    StateOutsideCapsError,
    TargetSpace,
    polariton_energies,
)
from electron_polariton_simulation.shift_algebra import ABS_MERGE_TOL, REL_MERGE_TOL, ShiftMatrix, find_momenta, mat_exp

logger = logging.getLogger(__name__)

TRUNCATION_THRESHOLD = 1e-8
NONRECOIL_MAX_TRANSFER = 10.0
MAX_ORACLE_MOMENTA = 64


class IndexOutOfRangeError(Exception):
    """Raised when a basis index lies outside the target space."""


class GridNotShiftClosedError(Exception):
    """Raised when an oracle momentum grid is not a union of complete shift orbits."""


class OracleSizeError(Exception):
    """Raised when the joint-space oracle is requested on too many momenta."""


class TruncationWarning(UserWarning):
    """Issued when a populated state couples noticeably to a state beyond the caps."""


class NonrecoilWarning(UserWarning):
    """Issued when an exchanged momentum is not small against k0 or exceeds 10 ω_c/v0."""


@dataclass(frozen=True)
class ProbeConfig:
    """Electron probe: speed, impact parameters and channel switches.

    Attributes:
        v0_over_c (float): Electron speed in units of c.
        b_e_c (float): Impact parameter from the sphere center in nm.
        b_e_qe (float): Impact parameter from the emitter in nm.
        enable_ec_x (bool): Couple to the x dipolar cavity mode.
        enable_ec_z (bool): Couple to the z dipolar cavity mode.
        enable_eqe (bool): Couple to the emitter.
        z_qe (float): Longitudinal emitter offset along the electron path in nm.
    """

    v0_over_c: float = 0.02
    b_e_c: float = 11.0
    b_e_qe: float = 1.0
    enable_ec_x: bool = True
    enable_ec_z: bool = True
    enable_eqe: bool = True
    z_qe: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.v0_over_c < 1.0:
            raise InvalidParameterError(f"v0_over_c must lie in (0, 1), got {self.v0_over_c}.")
        if self.b_e_c <= 0.0 or self.b_e_qe <= 0.0:
            raise InvalidParameterError("impact parameters must be positive.")

    @classmethod
    def from_params(cls, params: PhysicalParams, **overrides) -> "ProbeConfig":
        """Takes speed and impact parameters from a PhysicalParams instance."""
        values = {"v0_over_c": params.v0_over_c, "b_e_c": params.b_e_c, "b_e_qe": params.b_e_qe}
        values.update(overrides)
        return cls(**values)

    def apply(self, params: PhysicalParams) -> PhysicalParams:
        """Returns params carrying this probe's speed and impact parameters."""
        return replace(params, v0_over_c=self.v0_over_c, b_e_c=self.b_e_c, b_e_qe=self.b_e_qe)


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Graded shift matrix 𝒽 with entry (i, j) = 𝒽_ij·b_{q_ij}."""

    matrix: ShiftMatrix
    params: PhysicalParams

    @property
    def amplitudes(self) -> np.ndarray:
        """Dense matrix of the dimensionless elements 𝒽_ij."""
        return self.matrix.amplitudes

    @property
    def momenta(self) -> np.ndarray:
        """Momentum transfers q_ij in 1/nm."""
        potentials = self.matrix.potentials
        return potentials[:, None] - potentials[None, :]


def _interaction_block(
    space: TargetSpace, params: PhysicalParams, probe: ProbeConfig, rows: np.ndarray, cols: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Dimensionless elements 𝒽 and momenta q for the given row and column indices."""
    potentials = space.energies / params.hbar_v0
    momenta = potentials[rows][:, None] - potentials[cols][None, :]
    select = np.ix_(rows, cols)
    elements = np.zeros(momenta.shape, dtype=complex)
    if probe.enable_ec_x:
        ladder = (space.lowering_x.T - space.lowering_x)[select]
        elements += reduced_g_ec(momenta, "x", params) / params.hbar_v0 * ladder
    if probe.enable_ec_z:
        ladder = (space.lowering_z.T - space.lowering_z)[select]
        elements += reduced_g_ec(momenta, "z", params) / params.hbar_v0 * ladder
    if probe.enable_eqe:
        ladder = (space.sigma_minus.T - space.sigma_minus)[select]
        phase = np.exp(1j * momenta * probe.z_qe)
        elements += reduced_g_eqe(momenta, params) / params.hbar_v0 * phase * ladder
    elements *= np.sign(momenta)
    elastic = np.abs(momenta) <= np.maximum(ABS_MERGE_TOL, REL_MERGE_TOL * np.abs(momenta))
    elements[elastic] = 0.0
    return elements, momenta


def _check_nonrecoil(params: PhysicalParams, elements: np.ndarray, momenta: np.ndarray):
    active = np.abs(momenta[np.abs(elements) > 0.0])
    if not active.size:
        return
    q0 = params.hbar_omega_c / params.hbar_v0
    largest = float(active.max())
    if largest > NONRECOIL_MAX_TRANSFER * q0 or params.k0 < NONRECOIL_MAX_TRANSFER * largest:
        warnings.warn(
            f"largest exchanged momentum {largest:.4g} 1/nm is not small against k0 = {params.k0:.4g} 1/nm "
            f"or exceeds {NONRECOIL_MAX_TRANSFER:g} ω_c/v0",
            NonrecoilWarning,
            stacklevel=3,
        )


def _check_truncation(space: TargetSpace, params: PhysicalParams, probe: ProbeConfig, populated):
    """Warns when a populated edge state couples to a state beyond the caps."""
    caps = space.caps
    hbar_v0 = params.hbar_v0
    for index in populated:
        state = space.states[index]
        energy = space.energies[index]
        leaks = []
        if state.n_z == caps.n_z_max and probe.enable_ec_z:
            q = params.hbar_omega_c / hbar_v0
            leaks.append(math.sqrt(state.n_z + 1) * reduced_g_ec(q, "z", params) / hbar_v0)
        if state.manifold_n == caps.manifold_max:
            splitting = polariton_energies(state.manifold_n + 1, params, space.g_c_qe)
            for upper in (splitting.plus, splitting.minus):
                q = (state.n_z * params.hbar_omega_c + upper - energy) / hbar_v0
                strength = 0.0
                if probe.enable_ec_x:
                    strength += math.sqrt(state.manifold_n + 1) * reduced_g_ec(q, "x", params) / hbar_v0
                if probe.enable_eqe:
                    strength += reduced_g_eqe(q, params) / hbar_v0
                leaks.append(strength)
        if leaks and max(leaks) > TRUNCATION_THRESHOLD:
            warnings.warn(
                f"populated state {state.label} couples to states beyond the caps with strength "
                f"{max(leaks):.3e}; raise the caps by one manifold",
                TruncationWarning,
                stacklevel=3,
            )


def require_padding(space: TargetSpace, probe: ProbeConfig, populated):
    """
    Checks that every populated state has its coupled neighbours inside the space.

    A state reached through the x mode or the emitter needs the next manifold at the
    same z photon number; with the z channel on it also needs one more z photon.

    Raises:
        StateOutsideCapsError: If a populated state sits on the edge of the truncation.
    """
    present = {(state.n_z, state.manifold_n) for state in space.states}
    for index in populated:
        state = space.states[index]
        missing = []
        if (probe.enable_ec_x or probe.enable_eqe) and (state.n_z, state.manifold_n + 1) not in present:
            missing.append(f"manifold {state.manifold_n + 1}")
        if probe.enable_ec_z and (state.n_z + 1, state.manifold_n) not in present:
            missing.append(f"{state.n_z + 1} z photons")
        if missing:
            raise StateOutsideCapsError(
                f"populated state {state.label} needs {' and '.join(missing)} as padding; raise the caps "
                f"(now n_z_max={space.caps.n_z_max}, manifold_max={space.caps.manifold_max})."
            )


def build_interaction(space: TargetSpace, probe: ProbeConfig, populated=None) -> InteractionMatrix:
    """
    Assembles the dimensionless interaction matrix over the target basis.

    Every ordered pair (i, j) gets the momentum transfer q_ij = (E_i − E_j)/ħv0 and
    the element 𝒽_ij = (1/ħv0)⟨ψ_i|Ĥ_{I,q_ij}|ψ_j⟩, with the couplings evaluated at the
    exact transition momentum. Elastic (q = 0) elements are zero.

    Args:
        space (TargetSpace): Target eigenbasis and ladder operators.
        probe (ProbeConfig): Electron probe.
        populated (Iterable[int] | None): Indices of initially populated states, used for
            the truncation check.

    Returns:
        InteractionMatrix: Graded shift matrix with potentials E_i/ħv0.
    """
    params = probe.apply(space.params)
    everything = np.arange(space.dimension)
    elements, momenta = _interaction_block(space, params, probe, everything, everything)
    _check_nonrecoil(params, elements, momenta)
    if populated is not None:
        _check_truncation(space, params, probe, populated)
    matrix = ShiftMatrix(amplitudes=elements, potentials=space.energies / params.hbar_v0)
    return InteractionMatrix(matrix=matrix, params=params)


def matrix_element_h(space: TargetSpace, probe: ProbeConfig, i: int, j: int) -> float | complex:
    """
    Returns the single element 𝒽_ij.

    The value is real for an emitter at z_QE = 0 and returned as a float in that case.

    Indices refer to the polariton basis, not to bare cavity and emitter states. With
    h_x and h_QE the elements from |G⟩ to |1⟩_x|g⟩ and to |0⟩_x|e⟩, and at resonance
    |1±⟩ = (|1⟩_x|g⟩ ± |0⟩_x|e⟩)/√2, the first-manifold elements are
    𝒽_{G,1±} = (h_x ± h_QE)/√2. Detuning replaces the 1/√2 weights by the mixing angle.

    Raises:
        IndexOutOfRangeError: If i or j is not a basis index.
    """
    for index in (i, j):
        if not 0 <= index < space.dimension:
            raise IndexOutOfRangeError(f"index {index} outside target space of dimension {space.dimension}.")
    params = probe.apply(space.params)
    elements, _ = _interaction_block(space, params, probe, np.array([i]), np.array([j]))
    value = complex(elements[0, 0])
    return value.real if value.imag == 0.0 else value


def scattering_matrix(
    space: TargetSpace, probe: ProbeConfig, interaction: InteractionMatrix | None = None, squarings: int = 0
) -> ShiftMatrix:
    """Exponentiates the interaction matrix into S = exp(−i𝒽)."""
    interaction = interaction or build_interaction(space, probe)
    return mat_exp(interaction.matrix, -1j, squarings=squarings)


def unitarity_defect(smatrix: ShiftMatrix) -> float:
    """Total amplitude norm of S†S − identity."""
    return smatrix.dagger_transpose().matmul(smatrix).subtract_identity_norm()


def orbit_grid(space: TargetSpace, probe: ProbeConfig, anchors) -> np.ndarray:
    """
    Builds a shift-closed electron grid from anchor momenta.

    The orbit of an anchor s holds the momenta s − q_{i,0} reached when the target ends
    in state i after starting in state 0 with the electron at s. Because every
    momentum transfer is a difference of target potentials, a union of orbits is
    closed under the interaction.
    """
    params = probe.apply(space.params)
    offsets = (space.energies - space.energies[0]) / params.hbar_v0
    grid = np.concatenate([anchor - offsets for anchor in np.atleast_1d(anchors)])
    return np.sort(grid)


def joint_space_oracle(space: TargetSpace, probe: ProbeConfig, electron_grid) -> np.ndarray:
    """
    Exponentiates the interaction explicitly on target ⊗ discrete electron momenta.

    The joint basis index of (target state i, momentum k_m) is i·K + m. The
    Hamiltonian connects (j, k) to (i, k − q_ij) with amplitude 𝒽_ij whenever
    k − q_ij is on the grid; the unitary is exp(−iH) from a dense Padé exponential.

    Args:
        space (TargetSpace): Target space, kept small.
        probe (ProbeConfig): Electron probe.
        electron_grid (array-like): At most 64 momenta forming complete shift orbits.

    Returns:
        np.ndarray: Joint unitary of shape (n·K, n·K).

    Raises:
        OracleSizeError: If the grid holds more than 64 momenta.
        GridNotShiftClosedError: If some momentum does not belong to a complete orbit.
    """
    grid = np.sort(np.asarray(electron_grid, dtype=float))
    size = grid.size
    if size > MAX_ORACLE_MOMENTA:
        raise OracleSizeError(f"oracle grid holds {size} momenta, limit is {MAX_ORACLE_MOMENTA}.")
    params = probe.apply(space.params)
    offsets = (space.energies - space.energies[0]) / params.hbar_v0
    for k in grid:
        anchors = k + offsets
        if not any(np.all(find_momenta(grid, anchor - offsets) >= 0) for anchor in anchors):
            raise GridNotShiftClosedError(f"momentum {k} does not belong to a complete shift orbit.")

    interaction = build_interaction(space, probe)
    elements = interaction.amplitudes
    momenta = interaction.momenta
    n = space.dimension
    hamiltonian = np.zeros((n * size, n * size), dtype=complex)
    for i, j in zip(*np.nonzero(elements)):
        targets = find_momenta(grid, grid - momenta[i, j])
        for m, target in enumerate(targets):
            if target >= 0:
                hamiltonian[i * size + target, j * size + m] = elements[i, j]
    logger.debug("joint-space oracle of dimension %d", n * size)
    return linalg.expm(-1j * hamiltonian)


def ground_to_first_manifold(space: TargetSpace, probe: ProbeConfig) -> dict[str, float | complex]:
    """Returns 𝒽_{G,1+}, 𝒽_{G,1−} and 𝒽_{G,1z} keyed by 'h_G_1plus', 'h_G_1minus', 'h_G_1z'."""
    ground = space.index_of_label("G")
    labels = {"h_G_1plus": "1+", "h_G_1minus": "1-", "h_G_1z": "1z"}
    return {key: matrix_element_h(space, probe, ground, space.index_of_label(label)) for key, label in labels.items()}
