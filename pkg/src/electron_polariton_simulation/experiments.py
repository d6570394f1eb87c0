"""Experiment Pipelines Module.

This module turns a resolved ExperimentConfig into result tables. Each pipeline
reproduces one family of results of the electron-polariton study:
- fig2: ground-to-first-manifold interaction elements over speed and impact parameter
- fig3: cathodoluminescence spectra and polariton peak heights versus speed
- fig4: electron momentum reshaping after weak cavity driving, versus detuning
- fig5: population transfer by a modulated electron beam, versus the target phase θ
- fig6: electron energy change for modulated and non-modulated beams
- custom: every observable at a single probe point

Sweep points are evaluated through a thread pool whose map keeps grid order, so
the emitted tables do not depend on the number of workers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable

import numpy as np
import pandas as pd
from scipy import optimize

from electron_polariton_simulation.electron import (
    Wavepacket,
    comb,
    delta_n,
    energy_change,
    monochromatic,
    nonrecoil_energy_change,
)
from electron_polariton_simulation.experiment_config import ExperimentConfig
from electron_polariton_simulation.hilbert import Caps, TargetSpace, build_space
from electron_polariton_simulation.observables import (
    TargetDensity,
    i0_reference,
    peak_heights,
    pinem_initial,
    polariton_peak_positions,
    power_spectrum,
    reduce_electron,
    reduce_target,
    scatter,
    superposition_initial,
)
from electron_polariton_simulation.scattering import (
    ProbeConfig,
    build_interaction,
    ground_to_first_manifold,
    matrix_element_h,
    scattering_matrix,
)
from electron_polariton_simulation.shift_algebra import ShiftMatrix

logger = logging.getLogger(__name__)

DEFAULT_SPEEDS = tuple(np.linspace(0.02, 0.2, 10))
DEFAULT_IMPACT = tuple(np.linspace(1.0, 10.0, 10))
DEFAULT_FIG6_SPEEDS = tuple(np.linspace(0.02, 0.2, 40))
DEFAULT_FIG6_IMPACT = tuple(np.linspace(1.0, 10.0, 40))
DEFAULT_OMEGA = tuple(np.linspace(1.8, 2.2, 401))
DEFAULT_DETUNING = tuple(np.linspace(-0.2, 0.2, 21))
DEFAULT_DRIVING = (0.0, 0.1, 0.5)
DEFAULT_K_OFFSET = tuple(np.linspace(-1.5, 1.5, 301))
DEFAULT_THETA = tuple(np.linspace(-math.pi, math.pi, 25))
MONOTONE_TOLERANCE = 1e-12
FIRST_MANIFOLD = ("G", "1-", "1z", "1+")


@dataclass
class ExperimentResult:
    """Tables produced by one pipeline, with scalar summaries and failed checks."""

    tables: dict[str, pd.DataFrame]
    summary: dict[str, Any] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    caps: Caps | None = None


def sweep_map(config: ExperimentConfig, func: Callable, points: Iterable) -> list:
    """Evaluates func over points in order, on ``config.threads`` worker threads."""
    points = list(points)
    if config.threads == 1:
        return [func(point) for point in points]
    with ThreadPoolExecutor(max_workers=config.threads) as executor:
        return list(executor.map(func, points))


def _axis(values, default) -> tuple:
    return tuple(default if values is None else values)


def probe_at(config: ExperimentConfig, v0_over_c: float | None = None, b_e_qe: float | None = None) -> ProbeConfig:
    """The configured probe moved to another speed and/or emitter impact parameter."""
    params = config.params.with_probe(v0_over_c, b_e_qe)
    return replace(config.probe, v0_over_c=params.v0_over_c, b_e_qe=params.b_e_qe, b_e_c=params.b_e_c)


def comb_for(space: TargetSpace, probe: ProbeConfig, target: str, config: ExperimentConfig) -> Wavepacket:
    """Electron beam for a modulation target: none, or a comb tuned to ω_{1,±}/v0."""
    if target == "none":
        return monochromatic(probe.v0_over_c)
    positions = polariton_peak_positions(space)
    transition = positions["1+"] if target == "upper" else positions["1-"]
    q_mod = transition / probe.apply(space.params).hbar_v0
    return comb(probe.v0_over_c, q_mod, config.sweep.comb_teeth, config.sweep.running_phase)


def scattering_caps(caps: Caps) -> Caps:
    """Caps with a padding manifold and a padding z photon above the populated first manifold."""
    padded = caps.padded(manifold_n=1, n_z=0)
    if padded != caps:
        logger.info("caps raised to n_z_max=%d, manifold_max=%d for padding", padded.n_z_max, padded.manifold_max)
    return padded


def _smatrix(space: TargetSpace, probe: ProbeConfig, populated) -> ShiftMatrix:
    return scattering_matrix(space, probe, build_interaction(space, probe, populated=populated))


def lower_polariton_dark_speed(space: TargetSpace, probe: ProbeConfig, bracket: tuple[float, float]) -> float | None:
    """
    Speed at which 𝒽_{G,1−} changes sign inside the bracket, or None without a sign change.

    At this speed the electron-cavity and electron-emitter amplitudes cancel and the
    lower polariton is not excited.
    """
    ground, lower = space.index_of_label("G"), space.index_of_label("1-")

    def element(v0_over_c: float) -> float:
        return float(np.real(matrix_element_h(space, replace(probe, v0_over_c=v0_over_c), ground, lower)))

    low, high = element(bracket[0]), element(bracket[1])
    if low == 0.0:
        return bracket[0]
    if low * high > 0.0:
        return None
    return optimize.brentq(element, bracket[0], bracket[1], xtol=1e-12)


def run_fig2(config: ExperimentConfig) -> ExperimentResult:
    """Interaction elements 𝒽_{G,1±} and 𝒽_{G,1z} on the speed × impact-parameter grid."""
    space = build_space(config.params, config.caps)
    speeds = _axis(config.sweep.v0_over_c, DEFAULT_SPEEDS)
    impacts = sorted(_axis(config.sweep.b_e_qe, DEFAULT_IMPACT))

    def point(args):
        v0, b = args
        elements = ground_to_first_manifold(space, probe_at(config, v0, b))
        return {"v0_over_c": v0, "b_e_qe_nm": b, **{k: float(np.real(v)) for k, v in elements.items()}}

    frame = pd.DataFrame(sweep_map(config, point, [(v0, b) for v0 in speeds for b in impacts]))
    for column, flag in (("h_G_1plus", "decays_in_b_1plus"), ("h_G_1z", "decays_in_b_1z")):
        decays = frame.groupby("v0_over_c", sort=False)[column].transform(
            lambda values: bool(np.all(np.diff(np.abs(values.to_numpy())) <= MONOTONE_TOLERANCE))
        )
        frame[flag] = decays.astype(bool)

    dark = {}
    if len(speeds) > 1:
        for b in impacts:
            root = lower_polariton_dark_speed(space, probe_at(config, None, b), (min(speeds), max(speeds)))
            if root is not None:
                dark[f"{b:.12g}"] = root
    summary = {
        "monotone_decay_in_b": bool(frame["decays_in_b_1plus"].all() and frame["decays_in_b_1z"].all()),
        "lower_polariton_dark_speed": dark,
    }
    return ExperimentResult({"fig2": frame}, summary, caps=space.caps)


def eels_spectrum(space: TargetSpace, probe: ProbeConfig, sigma: float | None = None):
    """Spectrum lines of the target after an electron passed it in its ground state."""
    js = scatter(space, probe, space.ground_vector(), monochromatic(probe.v0_over_c))
    return power_spectrum(reduce_target(js), space, sigma)


def run_fig3(config: ExperimentConfig) -> ExperimentResult:
    """EELS-driven emission spectra and the three first-manifold peak heights versus speed."""
    space = build_space(config.params, scattering_caps(config.caps))
    speeds = _axis(config.sweep.v0_over_c, DEFAULT_SPEEDS)
    omega = np.asarray(_axis(config.sweep.omega, DEFAULT_OMEGA))
    positions = polariton_peak_positions(space)

    def point(v0):
        probe = probe_at(config, v0)
        lines = eels_spectrum(space, probe)
        if config.normalization == "i0":
            lines = lines.normalized(i0_reference(space, probe))
        heights = peak_heights(lines, [positions["1+"], positions["1z"], positions["1-"]])
        spectrum = pd.DataFrame(
            {
                "v0_over_c": v0,
                "omega_eV": omega,
                "intensity": lines.sample(omega),
                "normalization_mode": lines.normalization,
            }
        )
        peaks = {
            "v0_over_c": v0,
            "height_upper": heights[0],
            "height_z": heights[1],
            "height_lower": heights[2],
            "normalization_mode": lines.normalization,
        }
        return spectrum, peaks

    results = sweep_map(config, point, speeds)
    spectra = pd.concat([spectrum for spectrum, _ in results], ignore_index=True)
    peaks = pd.DataFrame([row for _, row in results])
    upper_dominates = bool((peaks["height_upper"] >= peaks["height_lower"]).all())
    return ExperimentResult(
        {"fig3": spectra, "fig3_peaks": peaks}, {"upper_peak_dominates": upper_dominates}, caps=space.caps
    )


def _binned(dist, grid: np.ndarray) -> np.ndarray:
    """Line populations summed into the cells of a sample grid."""
    if grid.size < 2:
        return np.zeros(grid.size)
    edges = np.concatenate(([grid[0] - 0.5 * (grid[1] - grid[0])], 0.5 * (grid[1:] + grid[:-1])))
    edges = np.concatenate((edges, [grid[-1] + 0.5 * (grid[-1] - grid[-2])]))
    counts, _ = np.histogram(dist.offsets, bins=edges, weights=dist.delta_n)
    return counts


def momentum_reshaping(space: TargetSpace, probe: ProbeConfig, initial: np.ndarray, w: Wavepacket):
    """Δn_k in units of ω_c/v0 for a product input, with the final target density."""
    populated = np.nonzero(np.abs(initial) > 0.0)[0]
    js = scatter(space, probe, initial, w, _smatrix(space, probe, populated))
    params = probe.apply(space.params)
    dist = delta_n(w, reduce_electron(js), k_unit=params.hbar_omega_c / params.hbar_v0)
    return dist, reduce_target(js)


def run_fig4(config: ExperimentConfig) -> ExperimentResult:
    """Momentum reshaping after weak coherent cavity driving, versus detuning and f."""
    detunings = _axis(config.sweep.detuning, DEFAULT_DETUNING)
    drives = _axis(config.sweep.f, DEFAULT_DRIVING)
    offsets = np.asarray(_axis(config.sweep.k_offset, DEFAULT_K_OFFSET))
    probe = config.probe
    width = config.params.sigma / config.params.hbar_omega_c
    caps = scattering_caps(config.caps)
    omega = np.asarray(_axis(config.sweep.omega, DEFAULT_OMEGA))

    def point(args):
        f, detuning = args
        space = build_space(config.params.with_detuning(detuning), caps)
        dist, _ = momentum_reshaping(space, probe, pinem_initial(space, f), monochromatic(probe.v0_over_c))
        broadened = dist.broadened(offsets, width)
        gain = float(dist.delta_n[dist.offsets > 1e-9].max(initial=0.0))
        frame = pd.DataFrame(
            {
                "f": f,
                "delta_eV": detuning,
                "k_offset_units": offsets,
                "delta_n": _binned(dist, offsets),
                "delta_n_broadened": broadened,
            }
        )
        return frame, gain

    points = [(f, d) for f in drives for d in detunings]
    results = sweep_map(config, point, points)
    frame = pd.concat([piece for piece, _ in results], ignore_index=True)
    eels_gain = max((gain for (f, _), (_, gain) in zip(points, results) if f == 0.0), default=0.0)

    space = build_space(config.params.with_detuning(0.0), caps)
    spectra = []
    for f in drives:
        initial = pinem_initial(space, f)
        _, rho = momentum_reshaping(space, probe, initial, monochromatic(probe.v0_over_c))
        for stage, density in (("before", TargetDensity.pure(initial)), ("after", rho)):
            lines = power_spectrum(density, space)
            spectra.append(pd.DataFrame({"f": f, "stage": stage, "omega_eV": omega, "intensity": lines.sample(omega)}))
    summary = {"max_gain_side_population_eels": eels_gain}
    return ExperimentResult(
        {"fig4": frame, "fig4_spectra": pd.concat(spectra, ignore_index=True)}, summary, caps=caps
    )


def run_fig5(config: ExperimentConfig) -> ExperimentResult:
    """First-manifold population changes and spectra for a comb beam, versus θ."""
    space = build_space(config.params, scattering_caps(config.caps))
    speeds = _axis(config.sweep.v0_over_c, (config.probe.v0_over_c,))
    thetas = _axis(config.sweep.theta, DEFAULT_THETA)
    targets = _axis(config.sweep.q_mod_target, ("upper", "lower"))
    omega = np.asarray(_axis(config.sweep.omega, DEFAULT_OMEGA))
    indices = [space.index_of_label(label) for label in FIRST_MANIFOLD]

    def point(v0):
        probe = probe_at(config, v0)
        smatrix = _smatrix(space, probe, indices)
        rows, spectra = [], []
        for target in targets:
            w = comb_for(space, probe, target, config)
            for theta in thetas:
                initial = superposition_initial(space, theta)
                rho = reduce_target(scatter(space, probe, initial, w, smatrix))
                change = rho.populations - np.abs(initial) ** 2
                rows.extend(
                    {
                        "q_mod_target": target,
                        "v0_over_c": v0,
                        "theta": theta,
                        "state_label": label,
                        "delta_population": change[index],
                    }
                    for label, index in zip(FIRST_MANIFOLD, indices)
                )
                for stage, density in (("before", TargetDensity.pure(initial)), ("after", rho)):
                    lines = power_spectrum(density, space)
                    spectra.append(
                        pd.DataFrame(
                            {
                                "q_mod_target": target,
                                "v0_over_c": v0,
                                "theta": theta,
                                "stage": stage,
                                "omega_eV": omega,
                                "intensity": lines.sample(omega),
                            }
                        )
                    )
        return rows, spectra

    results = sweep_map(config, point, speeds)
    frame = pd.DataFrame([row for rows, _ in results for row in rows])
    spectra = pd.concat([piece for _, pieces in results for piece in pieces], ignore_index=True)
    return ExperimentResult({"fig5": frame, "fig5_spectra": spectra}, caps=space.caps)


def run_fig6(config: ExperimentConfig) -> ExperimentResult:
    """Expected electron energy change for the superposition target on the speed × impact grid."""
    space = build_space(config.params, scattering_caps(config.caps))
    speeds = _axis(config.sweep.v0_over_c, DEFAULT_FIG6_SPEEDS)
    impacts = _axis(config.sweep.b_e_qe, DEFAULT_FIG6_IMPACT)
    thetas = _axis(config.sweep.theta, (math.pi / 2.0,))
    targets = _axis(config.sweep.q_mod_target, ("none", "upper"))
    populated = [space.index_of_label(label) for label in FIRST_MANIFOLD]

    def point(args):
        v0, b = args
        probe = probe_at(config, v0, b)
        smatrix = _smatrix(space, probe, populated)
        rows = []
        for target in targets:
            w = comb_for(space, probe, target, config)
            for theta in thetas:
                js = scatter(space, probe, superposition_initial(space, theta), w, smatrix)
                params = probe.apply(space.params)
                dist = delta_n(w, reduce_electron(js), k_unit=params.hbar_omega_c / params.hbar_v0)
                rows.append(
                    {
                        "v0_over_c": v0,
                        "b_e_qe_nm": b,
                        "theta": theta,
                        "q_mod_target": target,
                        "delta_E_over_hbar_omega_c": energy_change(dist, v0) / params.hbar_omega_c,
                        "delta_E_nonrecoil_over_hbar_omega_c": nonrecoil_energy_change(dist, v0) / params.hbar_omega_c,
                    }
                )
        return rows

    results = sweep_map(config, point, [(v0, b) for v0 in speeds for b in impacts])
    frame = pd.DataFrame([row for rows in results for row in rows])
    unmodulated = frame[frame["q_mod_target"] == "none"]["delta_E_over_hbar_omega_c"]
    modulated = frame[frame["q_mod_target"] != "none"]["delta_E_over_hbar_omega_c"]
    summary = {
        "unmodulated_always_loses": bool((unmodulated <= 1e-12).all()),
        "modulated_gain_points": int((modulated > 0.0).sum()),
    }
    return ExperimentResult({"fig6": frame}, summary, caps=space.caps)


def run_custom(config: ExperimentConfig) -> ExperimentResult:
    """All observables at the configured probe point."""
    space = build_space(config.params, scattering_caps(config.caps))
    probe = config.probe
    f = _axis(config.sweep.f, (0.0,))[0]
    target = _axis(config.sweep.q_mod_target, ("none",))[0]
    thetas = config.sweep.theta
    initial = pinem_initial(space, f) if thetas is None else superposition_initial(space, thetas[0])
    w = comb_for(space, probe, target, config)
    params = probe.apply(space.params)
    populated = np.nonzero(np.abs(initial) > 0.0)[0]
    js = scatter(space, probe, initial, w, _smatrix(space, probe, populated))
    rho = reduce_target(js)
    dist = delta_n(w, reduce_electron(js), k_unit=params.hbar_omega_c / params.hbar_v0)
    lines = power_spectrum(rho, space)
    if config.normalization == "i0":
        lines = lines.normalized(i0_reference(space, probe))
    omega = np.asarray(_axis(config.sweep.omega, DEFAULT_OMEGA))
    populations = pd.DataFrame(
        {
            "state_label": space.labels,
            "energy_eV": space.energies,
            "initial": np.abs(initial) ** 2,
            "final": rho.populations,
        }
    )
    spectrum = pd.DataFrame(
        {"omega_eV": omega, "intensity": lines.sample(omega), "normalization_mode": lines.normalization}
    )
    summary = {
        "delta_E_eV": energy_change(dist, probe.v0_over_c),
        "delta_E_nonrecoil_eV": nonrecoil_energy_change(dist, probe.v0_over_c),
        "norm_after_scattering": js.norm(),
    }
    return ExperimentResult(
        {"custom_populations": populations, "custom_delta_n": dist.to_frame(), "custom_spectrum": spectrum},
        summary,
        caps=space.caps,
    )

