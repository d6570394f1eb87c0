"""Probe-Target Coupling Module.

This module evaluates the coupling strengths between a swift electron and the
target in the quasi-static limit. It includes functionality for:
- Modified Bessel functions of the second kind and their integral-representation oracle
- Electron-cavity couplings to the x and z dipolar modes of the sphere
- Electron-emitter coupling through the vacuum near field
- The I_n(φ) integral family and its numerical oracle
- Green's-function quadrature oracles for every closed-form coupling
- The classical EELS loss probability and the induced cavity dipole

Couplings are returned as reduced values L·ħg in eV·nm, so the formal box length
never appears. Dividing by ħv0 gives the dimensionless interaction amplitude h.
Couplings are magnitudes with a fixed phase; the sign(q) factors of the
interaction Hamiltonian are attached by the scattering module.
"""

import math
from enum import StrEnum
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from electron_polariton_simulation.hilbert import E2_OVER_EPS0, PhysicalParams

QUAD_EPSABS = 1e-13
QUAD_LIMLST = 200


class InvalidBesselArgumentError(Exception):
    """Raised when a Bessel order or argument is outside the supported domain."""


class InvalidIntegralArgumentError(Exception):
    """Raised when the I_n family is evaluated at an unsupported order or at φ = 0."""


class InvalidChannelError(Exception):
    """Raised when an unknown coupling channel or mode axis is requested."""


class Channel(StrEnum):
    """Coupling channels between the electron and the target."""

    E_C_X = "e-c-x"
    E_C_Y = "e-c-y"
    E_C_Z = "e-c-z"
    E_QE = "e-QE"


class ReducedCoupling(NamedTuple):
    """Reduced coupling L·ħg [eV·nm] of one channel at momentum transfer q [1/nm]."""

    value: float
    channel: Channel
    q: float


class BesselEval(NamedTuple):
    """One evaluation K_n(x)."""

    order: int
    argument: float
    value: float


def _check_bessel(n: int, x: float):
    if n not in (0, 1, 2):
        raise InvalidBesselArgumentError(f"order must be 0, 1 or 2, got {n}.")
    if not x > 0.0:
        raise InvalidBesselArgumentError(f"argument must be positive, got {x}.")


def bessel_k(n: int, x: float) -> float:
    """
    Evaluates the modified Bessel function of the second kind K_n(x).

    Args:
        n (int): Order, one of 0, 1, 2.
        x (float): Positive argument; the value underflows to 0 beyond x ≈ 700.

    Returns:
        float: K_n(x).

    Raises:
        InvalidBesselArgumentError: If n is unsupported or x ≤ 0.
    """
    _check_bessel(n, x)
    return float(special.kv(n, x))


def bessel_eval(n: int, x: float) -> BesselEval:
    """Evaluates K_n(x) and returns it together with its order and argument."""
    return BesselEval(n, x, bessel_k(n, x))


def bessel_k_oracle(n: int, x: float) -> float:
    """Computes K_n(x) = ∫₀^∞ e^{−x cosh t} cosh(nt) dt by adaptive quadrature."""
    _check_bessel(n, x)
    value, _ = integrate.quad(
        lambda t: math.exp(-x * math.cosh(t)) * math.cosh(n * t), 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200
    )
    return value


def _q2_bessel(order: int, q, b: float) -> np.ndarray:
    """q²·K_order(|q|b), set to exactly 0 at q = 0."""
    q = np.asarray(q, dtype=float)
    argument = np.abs(q) * b
    result = np.zeros_like(q)
    nonzero = argument > 0.0
    result[nonzero] = q[nonzero] ** 2 * special.kv(order, argument[nonzero])
    return result


def _as_output(value: np.ndarray, like):
    return float(value) if np.ndim(like) == 0 else value


def _cavity_prefactor(params: PhysicalParams) -> float:
    """√(e²πR³/(2ε₀ħω_c)) in nm²."""
    return math.sqrt(E2_OVER_EPS0 * math.pi * params.radius_r**3 / (2.0 * params.hbar_omega_c))


def reduced_g_ec(q, axis: str, params: PhysicalParams):
    """
    Computes the reduced electron-cavity coupling L·ħg^{e-c}_q in eV·nm.

    For the x mode this is ħ·(eħk₀/3m_e)·q²K₁(|q|b_{e-c})·√((1/ħε₀)(π/2)(R³/ω_c)),
    and the z mode uses K₀ instead of K₁. The y mode does not couple for an electron
    travelling along z on the x axis. Accepts scalars or arrays of q.

    Args:
        q (float | np.ndarray): Momentum transfer in 1/nm.
        axis (str): Cavity mode, one of "x", "y", "z".
        params (PhysicalParams): Physical parameters (uses v0, R, ħω_c, b_e_c).

    Returns:
        float | np.ndarray: Reduced coupling in eV·nm.

    Raises:
        InvalidChannelError: If the axis is unknown.
    """
    orders = {"x": 1, "z": 0}
    if axis == "y":
        return _as_output(np.zeros_like(np.asarray(q, dtype=float)), q)
    if axis not in orders:
        raise InvalidChannelError(f"axis must be one of 'x', 'y', 'z', got {axis!r}.")
    h = _q2_bessel(orders[axis], q, params.b_e_c) * _cavity_prefactor(params) / 3.0
    return _as_output(params.hbar_v0 * h, q)


def reduced_g_eqe(q, params: PhysicalParams):
    """
    Computes the reduced electron-emitter coupling L·ħg^{e-QE}_q in eV·nm.

    For an x-oriented dipole at z_QE = 0 this is
    ħ·(e k₀ q² μ_QE / 2π m_e ε₀ ω_QE)·K₁(|q|b_{e-QE}). Accepts scalars or arrays of q.

    Args:
        q (float | np.ndarray): Momentum transfer in 1/nm.
        params (PhysicalParams): Physical parameters (uses v0, μ_QE, ħω_QE, b_e_qe).

    Returns:
        float | np.ndarray: Reduced coupling in eV·nm.
    """
    h = _q2_bessel(1, q, params.b_e_qe) * E2_OVER_EPS0 * params.mu_qe / (2.0 * math.pi * params.hbar_omega_qe)
    return _as_output(params.hbar_v0 * h, q)


def reduced_coupling(channel: Channel | str, q: float, params: PhysicalParams) -> ReducedCoupling:
    """Evaluates any channel at momentum transfer q."""
    channel = Channel(channel)
    if channel is Channel.E_QE:
        value = reduced_g_eqe(q, params)
    else:
        value = reduced_g_ec(q, channel.value[-1], params)
    return ReducedCoupling(float(value), channel, float(q))


def i_n_closed(n: int, phi: float) -> complex:
    """
    Evaluates I_n(φ) = ∫ zⁿ e^{i|φ|z} / (1+z²)^{5/2} dz over the real line in closed form.

    Args:
        n (int): Order, one of 0, 1, 2.
        phi (float): Non-zero real parameter.

    Returns:
        complex: (2/3)|φ|²K₂, (2i/3)|φ|²K₁ or (2/3)(|φ|K₁ − |φ|²K₀) for n = 0, 1, 2.

    Raises:
        InvalidIntegralArgumentError: If n is unsupported or φ = 0.
    """
    if n not in (0, 1, 2):
        raise InvalidIntegralArgumentError(f"order must be 0, 1 or 2, got {n}.")
    if phi == 0.0:
        raise InvalidIntegralArgumentError("phi must be non-zero.")
    x = abs(phi)
    if n == 0:
        return complex(2.0 / 3.0 * x**2 * special.kv(2, x))
    if n == 1:
        return 2j / 3.0 * x**2 * special.kv(1, x)
    return complex(2.0 / 3.0 * (x * special.kv(1, x) - x**2 * special.kv(0, x)))


def i_combination_closed(phi: float) -> float:
    """Evaluates I₀(φ) − 2I₂(φ) = 2|φ|²K₀(|φ|)."""
    if phi == 0.0:
        raise InvalidIntegralArgumentError("phi must be non-zero.")
    return 2.0 * phi**2 * special.kv(0, abs(phi))


def _fourier_half_line(func, frequency: float, weight: str) -> float:
    """∫₀^∞ func(u)·{cos|sin}(frequency·u) du with QUADPACK's Fourier-integral rule."""
    value, _ = integrate.quad(func, 0.0, np.inf, weight=weight, wvar=frequency, epsabs=QUAD_EPSABS, limlst=QUAD_LIMLST)
    return value


def i_n_oracle(n: int, phi: float) -> complex:
    """Computes I_n(φ) by numerical Fourier quadrature of its integrand."""
    if n not in (0, 1, 2):
        raise InvalidIntegralArgumentError(f"order must be 0, 1 or 2, got {n}.")
    if phi == 0.0:
        raise InvalidIntegralArgumentError("phi must be non-zero.")

    def kernel(u: float) -> float:
        return u**n / (1.0 + u * u) ** 2.5

    if n % 2:
        return 2j * _fourier_half_line(kernel, abs(phi), "sin")
    return complex(2.0 * _fourier_half_line(kernel, abs(phi), "cos"))


def reduced_g_ec_oracle(q: float, axis: str, params: PhysicalParams) -> float:
    """
    Computes L·ħg^{e-c}_q from the quasi-static sphere Green's function.

    The imaginary part of the dipolar sphere response factorizes into
    ∂_z(x_k/r³) at the electron path, so the double line integral over z and z′ is the
    squared modulus of a single Fourier transform F_k(q):

        L·g_k = (e k₀/m_e)·√(ħπR³/(72 ε₀ ω_c))·|F_k(q)|,

    with f_x(z) = −3zb/(b²+z²)^{5/2} and f_z(z) = (b²−2z²)/(b²+z²)^{5/2}. The
    transforms are integrated numerically in the scaled variable u = z/b.
    """
    if axis not in ("x", "z"):
        raise InvalidChannelError(f"axis must be 'x' or 'z', got {axis!r}.")
    if q == 0.0:
        return 0.0
    b = params.b_e_c
    phi = abs(q) * b
    if axis == "x":
        transform = 2.0 * 3.0 / b**2 * _fourier_half_line(lambda u: u / (1.0 + u * u) ** 2.5, phi, "sin")
    else:
        transform = 2.0 / b**2 * _fourier_half_line(lambda u: (1.0 - 2.0 * u * u) / (1.0 + u * u) ** 2.5, phi, "cos")
    h = math.sqrt(E2_OVER_EPS0 * math.pi * params.radius_r**3 / (72.0 * params.hbar_omega_c)) * abs(transform)
    return params.hbar_v0 * h


def reduced_g_eqe_oracle(q: float, params: PhysicalParams) -> float:
    """
    Computes L·ħg^{e-QE}_q from the quasi-static vacuum Green's function.

    For an x-oriented dipole at the origin and the electron on x = b, only the
    3(μ·x̂) b z/(4πk²(b²+z²)^{5/2}) part of μ·G₀·ẑ survives, and

        L·g = i k₀ (e μ₀ ω_QE/m_e) ∫ μ·G₀·ẑ e^{iqz} dz.

    The result carries the Green's function sign, −sign(q)·|L·ħg|.
    """
    if q == 0.0:
        return 0.0
    b = params.b_e_qe
    sine_transform = _fourier_half_line(lambda u: u / (1.0 + u * u) ** 2.5, abs(q) * b, "sin")
    # ∫ z e^{iqz}/(b²+z²)^{5/2} dz = 2i·sign(q)·S/b³, times i·(eμ/ε₀)·3b/(4πħω_QE)
    h = -math.copysign(1.0, q) * 3.0 * E2_OVER_EPS0 * params.mu_qe * sine_transform / (
        2.0 * math.pi * params.hbar_omega_qe * b**2
    )
    return params.hbar_v0 * h


def classical_eels_loss(params: PhysicalParams) -> float:
    """
    Computes the classical EELS loss probability of the dipolar sphere mode.

    P_L = (e²/π²ε₀ħω_c)(ω_c/v0)⁴[K₀² + K₁²](ω_c b_{e-c}/v0)·πR³/2.

    Args:
        params (PhysicalParams): Physical parameters.

    Returns:
        float: Dimensionless loss probability.
    """
    q0 = params.hbar_omega_c / params.hbar_v0
    x = q0 * params.b_e_c
    bessel_sum = special.kv(0, x) ** 2 + special.kv(1, x) ** 2
    return float(
        E2_OVER_EPS0 / (math.pi**2 * params.hbar_omega_c) * q0**4 * bessel_sum * math.pi * params.radius_r**3 / 2.0
    )


def quantum_first_order_loss(params: PhysicalParams) -> float:
    """Returns |h_x|² + |h_z|² at q = ω_c/v0, the first-order quantum loss probability."""
    q0 = params.hbar_omega_c / params.hbar_v0
    h_x = reduced_g_ec(q0, "x", params) / params.hbar_v0
    h_z = reduced_g_ec(q0, "z", params) / params.hbar_v0
    return h_x**2 + h_z**2


def induced_dipole_moment(params: PhysicalParams) -> float:
    """Returns |μ_c| = (2π/3)√(πR³ħω_c ε₀) of the sphere's dipolar mode in e·nm."""
    return 2.0 * math.pi / 3.0 * math.sqrt(math.pi * params.radius_r**3 * params.hbar_omega_c / E2_OVER_EPS0)


def induced_dipole_ratio(params: PhysicalParams) -> float:
    """Returns |μ_c|/μ_QE; infinite for a dipole-free emitter."""
    if params.mu_qe == 0.0:
        return math.inf
    return induced_dipole_moment(params) / params.mu_qe
