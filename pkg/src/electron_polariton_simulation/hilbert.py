"""Target Hilbert Space Module.

This module builds the truncated Hilbert space of the probed target: a z-polarized
cavity mode in a Fock basis next to an x-polarized cavity mode that is strongly
coupled to a two-level quantum emitter (QE). It includes functionality for:
- Physical parameters and the fixed eV/nm/fs unit system
- The cavity-QE coupling strength
- Per-manifold diagonalization of the coupled x-mode/QE sector (polaritons)
- Enumeration of the truncated eigenbasis with energies and ladder operators
- Conversion of bare-basis amplitudes to the polariton basis

All energies are in eV, lengths in nm and times in fs. Dipole moments are given
in e·nm so that μ²/ε₀ reduces to 4π·(e²/4πε₀)·μ² in eV·nm³.
"""

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

HBAR_EV_FS = 0.6582119569
SPEED_OF_LIGHT_NM_FS = 299.792458
COULOMB_EV_NM = 1.43996454  # e²/(4πε₀)
ELECTRON_REST_ENERGY_EV = 510998.95
HBAR_C_EV_NM = HBAR_EV_FS * SPEED_OF_LIGHT_NM_FS

# e²/ε₀ in eV·nm
E2_OVER_EPS0 = 4.0 * math.pi * COULOMB_EV_NM

COLLINEAR_TOLERANCE_NM = 1e-9
DEFAULT_MAX_DIMENSION = 512


class InvalidParameterError(Exception):
    """Raised when a physical parameter is outside its admissible range."""


class ManifoldIndexError(Exception):
    """Raised when a polariton manifold index is not a positive integer."""


class DimensionLimitError(Exception):
    """Raised when the truncated target space exceeds the configured dimension limit."""


class StateOutsideCapsError(Exception):
    """Raised when a bare state lies outside the truncation caps of the space."""


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants and geometry of the electron-cavity-emitter setup.

    Defaults are the reference configuration: a 10 nm sphere resonant at 2 eV, an
    emitter with a 1 e·nm dipole 10 nm from the sphere center, and an electron
    passing 1 nm beyond the emitter along the same line.

    Attributes:
        hbar_omega_c (float): Cavity (dipolar plasmon) energy in eV.
        hbar_omega_qe (float): Emitter transition energy in eV.
        mu_qe (float): Emitter dipole moment in e·nm, x-oriented.
        radius_r (float): Sphere radius in nm.
        b_c_qe (float): Emitter distance from the sphere center in nm.
        b_e_c (float): Electron impact parameter from the sphere center in nm.
        b_e_qe (float): Electron impact parameter from the emitter in nm.
        v0_over_c (float): Electron speed in units of c.
        sigma (float): Phenomenological line broadening in eV.
        collinear (bool): Enforce b_e_c = b_c_qe + b_e_qe.
    """

    hbar_omega_c: float = 2.0
    hbar_omega_qe: float = 2.0
    mu_qe: float = 1.0
    radius_r: float = 10.0
    b_c_qe: float = 10.0
    b_e_c: float = 11.0
    b_e_qe: float = 1.0
    v0_over_c: float = 0.02
    sigma: float = 0.02
    collinear: bool = True

    def __post_init__(self):
        for name in ("radius_r", "b_c_qe", "b_e_c", "b_e_qe"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParameterError(f"{name} must be a positive length in nm, got {value}.")
        for name in ("hbar_omega_c", "hbar_omega_qe"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParameterError(f"{name} must be a positive energy in eV, got {value}.")
        if not math.isfinite(self.mu_qe) or self.mu_qe < 0.0:
            raise InvalidParameterError(f"mu_qe must be non-negative, got {self.mu_qe}.")
        if not 0.0 < self.v0_over_c < 1.0:
            raise InvalidParameterError(f"v0_over_c must lie in (0, 1), got {self.v0_over_c}.")
        if not math.isfinite(self.sigma) or self.sigma < 0.0:
            raise InvalidParameterError(f"sigma must be non-negative, got {self.sigma}.")
        if self.collinear and abs(self.b_e_c - (self.b_c_qe + self.b_e_qe)) > COLLINEAR_TOLERANCE_NM:
            raise InvalidParameterError(
                f"collinear geometry requires b_e_c = b_c_qe + b_e_qe, got {self.b_e_c} != "
                f"{self.b_c_qe} + {self.b_e_qe}; set collinear=False to override."
            )

    @property
    def v0(self) -> float:
        """Electron speed in nm/fs."""
        return self.v0_over_c * SPEED_OF_LIGHT_NM_FS

    @property
    def hbar_v0(self) -> float:
        """ħ·v0 in eV·nm; converts energy transfers to momentum transfers."""
        return HBAR_EV_FS * self.v0

    @property
    def k0(self) -> float:
        """Central electron wave number m_e·v0/ħ in 1/nm."""
        return k0_from_speed(self.v0_over_c)

    @property
    def detuning(self) -> float:
        """ħΔ = (ħω_c − ħω_QE)/2 in eV."""
        return 0.5 * (self.hbar_omega_c - self.hbar_omega_qe)

    def with_probe(self, v0_over_c: float | None = None, b_e_qe: float | None = None) -> "PhysicalParams":
        """Returns a copy at another electron speed and/or emitter impact parameter.

        In the collinear geometry b_e_c follows b_e_qe.
        """
        v0_over_c = self.v0_over_c if v0_over_c is None else v0_over_c
        b_e_qe = self.b_e_qe if b_e_qe is None else b_e_qe
        b_e_c = self.b_c_qe + b_e_qe if self.collinear else self.b_e_c
        return replace(self, v0_over_c=v0_over_c, b_e_qe=b_e_qe, b_e_c=b_e_c)

    def with_detuning(self, detuning: float) -> "PhysicalParams":
        """Returns a copy with ħω_QE = ħω_c − 2ħΔ, keeping the cavity fixed."""
        return replace(self, hbar_omega_qe=self.hbar_omega_c - 2.0 * detuning)


def k0_from_speed(v0_over_c: float) -> float:
    """Non-relativistic electron wave number k0 = (m_e c²/ħc)(v0/c) in 1/nm."""
    return ELECTRON_REST_ENERGY_EV * v0_over_c / HBAR_C_EV_NM


@dataclass(frozen=True)
class Caps:
    """Truncation of the target space.

    Attributes:
        n_z_max (int): Highest photon number kept for the z mode.
        manifold_max (int): Highest excitation manifold kept for the coupled x-mode/QE sector.
        energy_cap (float | None): Optional upper bound on state energies in eV.
        max_dimension (int): Hard limit on the number of basis states.
    """

    n_z_max: int = 2
    manifold_max: int = 4
    energy_cap: float | None = None
    max_dimension: int = DEFAULT_MAX_DIMENSION

    def __post_init__(self):
        if self.n_z_max < 0:
            raise InvalidParameterError(f"n_z_max must be non-negative, got {self.n_z_max}.")
        if self.manifold_max < 1:
            raise InvalidParameterError(f"manifold_max must be at least 1, got {self.manifold_max}.")
        if self.max_dimension < 1:
            raise InvalidParameterError(f"max_dimension must be positive, got {self.max_dimension}.")

    def padded(self, manifold_n: int, n_z: int = 0) -> "Caps":
        """Returns caps raised so that one manifold and one z photon lie above the given populated levels."""
        return replace(self, manifold_max=max(self.manifold_max, manifold_n + 1), n_z_max=max(self.n_z_max, n_z + 1))


@dataclass(frozen=True)
class BareState:
    """Product state |n_z⟩_z |n_x⟩_x |g or e⟩ of the uncoupled target."""

    n_z: int
    n_x: int
    qe_excited: bool = False

    def __post_init__(self):
        if self.n_z < 0 or self.n_x < 0:
            raise InvalidParameterError(f"photon numbers must be non-negative, got {self}.")

    @property
    def manifold_n(self) -> int:
        """Excitation number of the coupled x-mode/QE sector."""
        return self.n_x + int(self.qe_excited)


class Branch(IntEnum):
    """Polariton branch; the integer value is the tie-breaking rank in the ordering."""

    MINUS = -1
    GROUND = 0
    PLUS = 1


@dataclass(frozen=True, order=True)
class PolaritonState:
    """Eigenstate |n_z⟩_z ⊗ |N,±⟩ of the free target Hamiltonian."""

    n_z: int
    manifold_n: int
    branch: Branch

    def __post_init__(self):
        if self.n_z < 0 or self.manifold_n < 0:
            raise InvalidParameterError(f"quantum numbers must be non-negative, got {self}.")
        if (self.branch is Branch.GROUND) != (self.manifold_n == 0):
            raise InvalidParameterError("branch must be GROUND exactly when manifold_n is 0.")

    @property
    def label(self) -> str:
        """Short label such as 'G', '1z', '1+', '1z,2-'."""
        parts = []
        if self.n_z:
            parts.append(f"{self.n_z}z")
        if self.manifold_n:
            parts.append(f"{self.manifold_n}{'+' if self.branch is Branch.PLUS else '-'}")
        return ",".join(parts) if parts else "G"

    @property
    def excitation(self) -> int:
        """Total excitation number n_z + N."""
        return self.n_z + self.manifold_n


class ManifoldSplitting(NamedTuple):
    """Eigen-decomposition of one 2×2 polariton block.

    The transform columns are |N,+⟩ and |N,−⟩ over the bare pair {|N⟩_x|g⟩, |N−1⟩_x|e⟩}.
    """

    plus: float
    minus: float
    transform: np.ndarray


def coupling_g_c_qe(params: PhysicalParams, axis: str = "x") -> float:
    """
    Computes the cavity-emitter coupling ħg^{c-QE} in eV.

    The emitter sits on the x axis at b_c_qe from the sphere center. An x-oriented
    dipole couples to the x dipolar mode with

        ħg_x = (ħω_QE/3)·√((π/2)(R/b)³·μ²/(ħω_c ε₀ b³)),

    and y- or z-oriented dipoles couple to their mode with half of that value.

    Args:
        params (PhysicalParams): Physical parameters.
        axis (str): Emitter dipole orientation, one of "x", "y", "z".

    Returns:
        float: Coupling energy in eV.

    Raises:
        InvalidParameterError: If the axis is unknown.
    """
    if axis not in ("x", "y", "z"):
        raise InvalidParameterError(f"axis must be one of 'x', 'y', 'z', got {axis!r}.")
    ratio = params.radius_r / params.b_c_qe
    dipole_term = E2_OVER_EPS0 * params.mu_qe**2 / (params.hbar_omega_c * params.b_c_qe**3)
    g_x = params.hbar_omega_qe / 3.0 * math.sqrt(0.5 * math.pi * ratio**3 * dipole_term)
    return g_x if axis == "x" else 0.5 * g_x


def polariton_energies(n: int, params: PhysicalParams, g: float) -> ManifoldSplitting:
    """
    Diagonalizes the N-th manifold of the coupled x-mode/QE sector.

    The block over {|N⟩_x|g⟩, |N−1⟩_x|e⟩} has diagonal (Nħω_c, (N−1)ħω_c + ħω_QE)
    and off-diagonal √N·ħg. With the mixing angle tan 2θ = √N·g/Δ the eigenvectors are

        |N,+⟩ = cos θ |N⟩_x|g⟩ + sin θ |N−1⟩_x|e⟩
        |N,−⟩ = sin θ |N⟩_x|g⟩ − cos θ |N−1⟩_x|e⟩

    which at resonance reduce to (|N⟩_x|g⟩ ± |N−1⟩_x|e⟩)/√2.

    Args:
        n (int): Manifold index N ≥ 1.
        params (PhysicalParams): Physical parameters.
        g (float): Cavity-emitter coupling ħg in eV.

    Returns:
        ManifoldSplitting: Upper energy, lower energy and the 2×2 transform.

    Raises:
        ManifoldIndexError: If n < 1.
    """
    if int(n) != n or n < 1:
        raise ManifoldIndexError(f"manifold index must be an integer >= 1, got {n}.")
    detuning = params.detuning
    coupling = math.sqrt(n) * g
    mean = 0.5 * ((2 * n - 1) * params.hbar_omega_c + params.hbar_omega_qe)
    half_gap = math.hypot(detuning, coupling)
    theta = 0.5 * math.atan2(coupling, detuning)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    if detuning == 0.0:
        cos_t = sin_t = math.sqrt(0.5)
    transform = np.array([[cos_t, sin_t], [sin_t, -cos_t]])
    return ManifoldSplitting(mean + half_gap, mean - half_gap, transform)


@dataclass(frozen=True, eq=False)
class TargetSpace:
    """Truncated eigenbasis of the free target Hamiltonian.

    The basis is ordered by (total excitation, energy, branch). Ladder operators are
    stored as dense matrices in this basis: ``lowering_x`` for a_x, ``lowering_z``
    for a_z and ``sigma_minus`` for the emitter lowering operator σ.
    """

    params: PhysicalParams
    caps: Caps
    states: tuple[PolaritonState, ...]
    energies: np.ndarray
    g_c_qe: float
    manifold_transforms: dict[int, np.ndarray]
    lowering_x: np.ndarray
    lowering_z: np.ndarray
    sigma_minus: np.ndarray
    _index: dict[PolaritonState, int] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self._index.update({state: i for i, state in enumerate(self.states)})

    @property
    def dimension(self) -> int:
        """Number of basis states."""
        return len(self.states)

    @property
    def labels(self) -> list[str]:
        """Short labels of the basis states, in basis order."""
        return [state.label for state in self.states]

    def index(self, state: PolaritonState) -> int:
        """Returns the basis position of a state.

        Raises:
            StateOutsideCapsError: If the state is not part of the truncated basis.
        """
        try:
            return self._index[state]
        except KeyError as exc:
            raise StateOutsideCapsError(f"{state.label} is not part of the truncated space.") from exc

    def index_of_label(self, label: str) -> int:
        """Returns the basis position of the state with the given short label."""
        for i, state in enumerate(self.states):
            if state.label == label:
                return i
        raise StateOutsideCapsError(f"no basis state with label {label!r}.")

    def ground_vector(self) -> np.ndarray:
        """Returns the target ground state as an amplitude vector."""
        vector = np.zeros(self.dimension, dtype=complex)
        vector[self.index(PolaritonState(0, 0, Branch.GROUND))] = 1.0
        return vector


def _coupled_vector(
    manifold_n: int, branch: Branch, transforms: dict[int, np.ndarray]
) -> dict[tuple[int, bool], float]:
    """Bare components {(n_x, qe_excited): amplitude} of a coupled-sector eigenstate."""
    if manifold_n == 0:
        return {(0, False): 1.0}
    column = 0 if branch is Branch.PLUS else 1
    transform = transforms[manifold_n]
    return {
        (manifold_n, False): transform[0, column],
        (manifold_n - 1, True): transform[1, column],
    }


def _lower_x(bare: dict[tuple[int, bool], float]) -> dict[tuple[int, bool], float]:
    result: dict[tuple[int, bool], float] = {}
    for (n_x, excited), amplitude in bare.items():
        if n_x > 0:
            key = (n_x - 1, excited)
            result[key] = result.get(key, 0.0) + math.sqrt(n_x) * amplitude
    return result


def _lower_qe(bare: dict[tuple[int, bool], float]) -> dict[tuple[int, bool], float]:
    return {(n_x, False): amplitude for (n_x, excited), amplitude in bare.items() if excited}


def _overlap(left: dict[tuple[int, bool], float], right: dict[tuple[int, bool], float]) -> float:
    return sum(np.conj(amplitude) * right.get(key, 0.0) for key, amplitude in left.items())


def build_space(params: PhysicalParams, caps: Caps | None = None) -> TargetSpace:
    """
    Enumerates the truncated target eigenbasis.

    The basis contains every |n_z⟩ ⊗ |N,±⟩ with n_z ≤ n_z_max and N ≤ manifold_max
    (and below the optional energy cap). Energies are n_z·ħω_c plus the polariton energy.

    Args:
        params (PhysicalParams): Physical parameters.
        caps (Caps | None): Truncation caps; defaults to n_z_max=2, manifold_max=4.

    Returns:
        TargetSpace: The immutable truncated space.

    Raises:
        DimensionLimitError: If the basis would exceed ``caps.max_dimension`` states.
    """
    caps = caps or Caps()
    full_dimension = (caps.n_z_max + 1) * (1 + 2 * caps.manifold_max)
    if caps.energy_cap is None and full_dimension > caps.max_dimension:
        raise DimensionLimitError(f"target space of dimension {full_dimension} exceeds limit {caps.max_dimension}.")

    g = coupling_g_c_qe(params)
    transforms: dict[int, np.ndarray] = {}
    coupled: list[tuple[int, Branch, float]] = [(0, Branch.GROUND, 0.0)]
    for n in range(1, caps.manifold_max + 1):
        splitting = polariton_energies(n, params, g)
        transforms[n] = splitting.transform
        coupled.append((n, Branch.PLUS, splitting.plus))
        coupled.append((n, Branch.MINUS, splitting.minus))

    entries = []
    for n_z in range(caps.n_z_max + 1):
        for manifold_n, branch, energy in coupled:
            total = n_z * params.hbar_omega_c + energy
            if caps.energy_cap is not None and total > caps.energy_cap:
                continue
            entries.append((n_z + manifold_n, total, int(branch), PolaritonState(n_z, manifold_n, branch)))
    entries.sort(key=lambda entry: entry[:3])
    if len(entries) > caps.max_dimension:
        raise DimensionLimitError(f"target space of dimension {len(entries)} exceeds limit {caps.max_dimension}.")

    states = tuple(entry[3] for entry in entries)
    energies = np.array([entry[1] for entry in entries])
    dimension = len(states)

    vectors = {(s.manifold_n, s.branch): _coupled_vector(s.manifold_n, s.branch, transforms) for s in states}
    lowering_x = np.zeros((dimension, dimension))
    lowering_z = np.zeros((dimension, dimension))
    sigma_minus = np.zeros((dimension, dimension))
    for j, right in enumerate(states):
        right_vector = vectors[(right.manifold_n, right.branch)]
        lowered_x = _lower_x(right_vector)
        lowered_qe = _lower_qe(right_vector)
        for i, left in enumerate(states):
            if left.n_z == right.n_z and left.manifold_n == right.manifold_n - 1:
                left_vector = vectors[(left.manifold_n, left.branch)]
                lowering_x[i, j] = _overlap(left_vector, lowered_x)
                sigma_minus[i, j] = _overlap(left_vector, lowered_qe)
            if left.n_z == right.n_z - 1 and left.manifold_n == right.manifold_n and left.branch == right.branch:
                lowering_z[i, j] = math.sqrt(right.n_z)

    logger.debug("built target space of dimension %d with ħg = %.6f eV", dimension, g)
    return TargetSpace(
        params=params,
        caps=caps,
        states=states,
        energies=energies,
        g_c_qe=g,
        manifold_transforms=transforms,
        lowering_x=lowering_x,
        lowering_z=lowering_z,
        sigma_minus=sigma_minus,
    )


def bare_to_polariton(space: TargetSpace, bare: Mapping[BareState, complex]) -> np.ndarray:
    """
    Converts bare-basis amplitudes into a polariton-basis amplitude vector.

    Args:
        space (TargetSpace): Target space defining caps and transforms.
        bare (Mapping[BareState, complex]): Amplitudes of bare product states.

    Returns:
        np.ndarray: Complex amplitude vector over ``space.states``.

    Raises:
        StateOutsideCapsError: If a bare component lies outside the caps, or maps onto a
            polariton removed by the energy cap.
    """
    vector = np.zeros(space.dimension, dtype=complex)
    for state, amplitude in bare.items():
        if amplitude == 0:
            continue
        n = state.manifold_n
        if state.n_z > space.caps.n_z_max or n > space.caps.manifold_max:
            raise StateOutsideCapsError(f"bare state {state} lies outside caps {space.caps}.")
        if n == 0:
            targets = [(Branch.GROUND, 1.0)]
        else:
            row = 1 if state.qe_excited else 0
            transform = space.manifold_transforms[n]
            targets = [(Branch.PLUS, transform[row, 0]), (Branch.MINUS, transform[row, 1])]
        for branch, weight in targets:
            if weight == 0.0:
                continue
            vector[space.index(PolaritonState(state.n_z, n, branch))] += weight * amplitude
    return vector
