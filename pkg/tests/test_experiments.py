# pylint: disable=redefined-outer-name

"""Tests for experiments"""
# ─────────────────────────────────────────────────────────────
# IMPORTS
# ─────────────────────────────────────────────────────────────

import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from electron_polariton_simulation.experiment_config import ExperimentConfig, SweepGrid
from electron_polariton_simulation.experiments import (
    comb_for,
    eels_spectrum,
    lower_polariton_dark_speed,
    probe_at,
    run_custom,
    run_fig2,
    run_fig3,
    run_fig4,
    run_fig5,
    run_fig6,
    sweep_map,
)
from electron_polariton_simulation.hilbert import Caps, build_space
from electron_polariton_simulation.observables import peak_heights, polariton_peak_positions

SMALL_CAPS = Caps(n_z_max=2, manifold_max=2)
OMEGA = (1.9, 2.0, 2.1)


@pytest.fixture
def config():
    """Reference parameters on a reduced target space."""
    return ExperimentConfig(caps=SMALL_CAPS, sweep=SweepGrid(omega=OMEGA))


# ─────────────────────────────────────────────────────────────
# TEST: Helpers
# ─────────────────────────────────────────────────────────────


def test_sweep_map_keeps_grid_order_on_threads(config):
    threaded = ExperimentConfig(threads=4)
    points = list(range(20))
    assert sweep_map(threaded, lambda x: x * x, points) == [x * x for x in points]
    assert sweep_map(config, lambda x: -x, points) == [-x for x in points]


def test_probe_at_moves_the_collinear_electron(config):
    probe = probe_at(config, 0.1, 3.0)
    assert probe.v0_over_c == 0.1
    assert probe.b_e_qe == 3.0
    assert probe.b_e_c == pytest.approx(13.0)


def test_comb_for_targets(config):
    space = build_space(config.params, config.caps)
    probe = probe_at(config, 0.1)
    assert comb_for(space, probe, "none", config).momenta.size == 1
    upper = comb_for(space, probe, "upper", config)
    lower = comb_for(space, probe, "lower", config)
    assert upper.momenta.size == 101
    spacing = polariton_peak_positions(space)["1+"] / probe.apply(space.params).hbar_v0
    assert np.diff(upper.momenta)[0] == pytest.approx(spacing)
    assert np.diff(lower.momenta)[0] < np.diff(upper.momenta)[0]


def test_lower_polariton_goes_dark_at_one_speed():
    """At b_e_qe = 1 nm the cavity and emitter amplitudes cancel for 𝒽_{G,1−} at a single speed."""
    config = ExperimentConfig()
    space = build_space(config.params, config.caps)
    speed = lower_polariton_dark_speed(space, probe_at(config), (0.05, 0.12))
    assert speed is not None
    assert 0.05 < speed < 0.12
    lines = eels_spectrum(space, probe_at(config, speed))
    positions = polariton_peak_positions(space)
    lower, upper = peak_heights(lines, [positions["1-"], positions["1+"]])
    assert lower < 0.05 * upper


def test_no_dark_speed_without_sign_change(config):
    space = build_space(config.params, config.caps)
    assert lower_polariton_dark_speed(space, probe_at(config), (0.15, 0.2)) is None


# ─────────────────────────────────────────────────────────────
# TEST: Pipelines
# ─────────────────────────────────────────────────────────────


def test_fig2_elements_decay_with_impact_parameter():
    grid = SweepGrid(v0_over_c=(0.05, 0.08, 0.12), b_e_qe=(1.0, 2.0, 4.0))
    result = run_fig2(ExperimentConfig(caps=SMALL_CAPS, sweep=grid))
    frame = result.tables["fig2"]
    assert len(frame) == 9
    assert {"h_G_1plus", "h_G_1minus", "h_G_1z"} <= set(frame.columns)
    assert result.summary["monotone_decay_in_b"]
    assert 0.05 < result.summary["lower_polariton_dark_speed"]["1"] < 0.12
    # worker count does not change the table
    again = run_fig2(ExperimentConfig(caps=SMALL_CAPS, sweep=grid, threads=3)).tables["fig2"]
    pd.testing.assert_frame_equal(frame, again)


def test_fig3_upper_peak_dominates():
    sweep = SweepGrid(v0_over_c=(0.03, 0.08, 0.15), omega=OMEGA)
    result = run_fig3(ExperimentConfig(caps=SMALL_CAPS, sweep=sweep))
    peaks = result.tables["fig3_peaks"]
    assert list(peaks["v0_over_c"]) == [0.03, 0.08, 0.15]
    assert result.summary["upper_peak_dominates"]
    assert len(result.tables["fig3"]) == 3 * len(OMEGA)
    assert (result.tables["fig3"]["normalization_mode"] == "raw").all()


def test_fig3_reference_normalization():
    sweep = SweepGrid(v0_over_c=(0.08,), omega=OMEGA)
    result = run_fig3(ExperimentConfig(caps=SMALL_CAPS, sweep=sweep, normalization="i0"))
    assert (result.tables["fig3_peaks"]["normalization_mode"] == "i0").all()


def test_fig3_unbroadened_peaks_are_line_weights():
    sweep = SweepGrid(v0_over_c=(0.08,), omega=OMEGA)
    params = replace(ExperimentConfig().params, sigma=0.0)
    result = run_fig3(ExperimentConfig(params=params, caps=SMALL_CAPS, sweep=sweep, normalization="i0"))
    peaks = result.tables["fig3_peaks"]
    assert peaks["height_upper"].iloc[0] > 0.0
    assert np.isfinite(result.tables["fig3"]["intensity"]).all()


def test_fig4_eels_never_gains_energy():
    """Without driving the target starts in its ground state and the electron can only lose."""
    sweep = SweepGrid(detuning=(-0.2, -0.1, 0.0, 0.1, 0.2), f=(0.0, 0.1), omega=OMEGA)
    result = run_fig4(ExperimentConfig(caps=SMALL_CAPS, sweep=sweep))
    assert result.summary["max_gain_side_population_eels"] <= 1e-12
    frame = result.tables["fig4"]
    assert len(frame) == 2 * 5 * 301
    assert sorted(set(frame["delta_eV"])) == [-0.2, -0.1, 0.0, 0.1, 0.2]
    driven = frame[(frame["f"] == 0.1) & (frame["k_offset_units"] > 0.5)]
    assert driven["delta_n"].sum() > 0.0
    spectra = result.tables["fig4_spectra"]
    assert set(spectra["stage"]) == {"before", "after"}


def test_fig5_depends_on_the_target_phase():
    sweep = SweepGrid(theta=(0.0, math.pi), omega=OMEGA, v0_over_c=(0.1,))
    result = run_fig5(ExperimentConfig(caps=SMALL_CAPS, sweep=sweep))
    frame = result.tables["fig5"]
    assert len(frame) == 2 * 2 * 4
    upper = frame[(frame["q_mod_target"] == "upper") & (frame["state_label"] == "G")]
    assert not np.isclose(upper["delta_population"].iloc[0], upper["delta_population"].iloc[1])
    assert len(result.tables["fig5_spectra"]) == 2 * 2 * 2 * len(OMEGA)


def test_fig6_modulation_turns_loss_into_gain():
    sweep = SweepGrid(
        v0_over_c=(0.05, 0.1, 0.15, 0.2), b_e_qe=(1.0, 2.0, 5.0, 10.0), theta=(math.pi / 2.0, -math.pi / 2.0)
    )
    result = run_fig6(ExperimentConfig(caps=SMALL_CAPS, sweep=sweep))
    frame = result.tables["fig6"]
    assert len(frame) == 4 * 4 * 2 * 2
    assert result.summary["unmodulated_always_loses"]
    assert result.summary["modulated_gain_points"] >= 1


def test_custom_run(config):
    result = run_custom(config)
    assert result.summary["norm_after_scattering"] == pytest.approx(1.0, abs=1e-10)
    assert result.summary["delta_E_eV"] < 0.0
    populations = result.tables["custom_populations"]
    assert populations["final"].sum() == pytest.approx(1.0, abs=1e-10)
    assert populations["initial"].iloc[0] == 1.0
    assert list(result.tables["custom_spectrum"]["omega_eV"]) == list(OMEGA)


def test_scattering_pipelines_pad_the_caps():
    """A single-manifold truncation is raised so that the first manifold has a manifold above it."""
    result = run_custom(ExperimentConfig(caps=Caps(n_z_max=0, manifold_max=1), sweep=SweepGrid(omega=OMEGA)))
    assert result.caps == Caps(n_z_max=1, manifold_max=2)
    assert "2+" in set(result.tables["custom_populations"]["state_label"])
    single_point = SweepGrid(v0_over_c=(0.1,), b_e_qe=(1.0,))
    assert run_fig2(ExperimentConfig(caps=SMALL_CAPS, sweep=single_point)).caps == SMALL_CAPS
