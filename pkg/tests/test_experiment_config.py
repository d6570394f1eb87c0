"""Tests for experiment_config"""

import math

import pytest

from electron_polariton_simulation.experiment_config import (
    ConfigKeyError,
    ConfigSyntaxError,
    ConfigValueError,
    ExperimentConfig,
    SweepGrid,
    parse_caps_override,
    parse_config,
)
from electron_polariton_simulation.hilbert import Caps, PhysicalParams

# ─────────────────────────────────────────────────────────────
# TEST: Defaults and overrides
# ─────────────────────────────────────────────────────────────


def test_empty_file_gives_reference_configuration():
    config = parse_config("")
    assert config.experiment == "custom"
    assert config.params == PhysicalParams()
    assert config.probe.v0_over_c == 0.02
    assert config.probe.b_e_c == 11.0
    assert config.caps == Caps()
    assert config.sweep == SweepGrid()
    assert (config.output_format, config.normalization, config.threads) == ("csv", "raw", 1)


def test_probe_speed_fixes_the_sweep_axis():
    config = parse_config("[probe]\nv0_over_c = 0.08\n")
    assert config.sweep.v0_over_c == (0.08,)
    assert config.probe.v0_over_c == 0.08
    assert config.params.v0_over_c == 0.08


def test_probe_and_sweep_cannot_both_give_an_axis():
    with pytest.raises(ConfigValueError) as excinfo:
        parse_config("[probe]\nb_e_qe = 2\n[sweep]\nb_e_qe = 1, 2\n")
    assert excinfo.value.key == "b_e_qe"


def test_emitter_distance_moves_the_cavity_impact_parameter():
    config = parse_config("[params]\nb_c_qe = 12\n")
    assert config.params.b_e_c == pytest.approx(13.0)
    assert config.probe.b_e_c == pytest.approx(13.0)


def test_non_collinear_geometry_keeps_b_e_c():
    config = parse_config("[params]\ncollinear = false\n[probe]\nb_e_c = 30\nb_e_qe = 2\n")
    assert not config.params.collinear
    assert config.params.b_e_c == 30.0
    assert config.params.b_e_qe == 2.0


def test_detuning_shifts_the_emitter():
    config = parse_config("[params]\ndetuning = 0.1\n")
    assert config.params.hbar_omega_c == 2.0
    assert config.params.hbar_omega_qe == pytest.approx(1.8)
    assert config.params.detuning == pytest.approx(0.1)


def test_sweep_ranges_and_lists():
    config = parse_config(
        "[sweep]\nv0_over_c = 0.1:0.2:3\ntheta = 0, 1.5 # radians\nq_mod_target = none, Upper\ncomb_teeth = 10\n"
    )
    assert config.sweep.v0_over_c == pytest.approx((0.1, 0.15, 0.2))
    assert config.sweep.theta == (0.0, 1.5)
    assert config.sweep.q_mod_target == ("none", "upper")
    assert config.sweep.comb_teeth == 10


def test_output_section():
    config = parse_config("[output]\nexperiment = fig3\nformat = json\nnormalization = i0\nthreads = 4\nseed = 9\n")
    assert config.experiment == "fig3"
    assert config.output_format == "json"
    assert config.normalization == "i0"
    assert (config.threads, config.seed) == (4, 9)
    assert config.to_dict()["params"]["hbar_omega_c"] == 2.0


# ─────────────────────────────────────────────────────────────
# TEST: Errors
# ─────────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    "text, key",
    [
        ("[params]\nradius_r = -1\n", "radius_r"),
        ("[params]\nsigma = nan\n", "sigma"),
        ("[probe]\nv0_over_c = 1.5\n", "v0_over_c"),
        ("[sweep]\nf = 0, 2\n", "f"),
        ("[sweep]\ncomb_teeth = 3\n", "comb_teeth"),
        ("[sweep]\nq_mod_target = sideways\n", "q_mod_target"),
        ("[caps]\nmanifold_max = 0\n", "manifold_max"),
        ("[output]\nformat = xml\n", "format"),
        ("[params]\ncollinear = maybe\n", "collinear"),
    ],
)
def test_invalid_values_name_their_key(text, key):
    with pytest.raises(ConfigValueError) as excinfo:
        parse_config(text)
    assert excinfo.value.key == key


def test_unknown_section_and_key():
    with pytest.raises(ConfigKeyError):
        parse_config("[plot]\ncolor = red\n")
    with pytest.raises(ConfigKeyError):
        parse_config("[params]\nradius = 3\n")


def test_syntax_errors_carry_a_line_number():
    with pytest.raises(ConfigSyntaxError) as excinfo:
        parse_config("radius_r = 3\n")
    assert excinfo.value.line == 1
    with pytest.raises(ConfigSyntaxError) as excinfo:
        parse_config("[params]\nradius_r = 3\nnot a pair\n")
    assert excinfo.value.line == 3


def test_empty_sweep_grid():
    with pytest.raises(ConfigValueError):
        SweepGrid(theta=())
    with pytest.raises(ConfigValueError):
        parse_config("[sweep]\nomega = 1:2:0\n")


def test_config_checks_its_own_fields():
    with pytest.raises(ConfigValueError):
        ExperimentConfig(experiment="fig9")
    with pytest.raises(ConfigValueError):
        ExperimentConfig(threads=0)


# ─────────────────────────────────────────────────────────────
# TEST: Caps override
# ─────────────────────────────────────────────────────────────


def test_caps_override():
    caps = parse_caps_override("nz=1, N=3", Caps())
    assert (caps.n_z_max, caps.manifold_max) == (1, 3)
    assert parse_caps_override("dim=64", caps).max_dimension == 64


@pytest.mark.parametrize("text", ["nz", "x=1", "N=two", "N=0"])
def test_malformed_caps_override(text):
    with pytest.raises(ConfigValueError) as excinfo:
        parse_caps_override(text, Caps())
    assert excinfo.value.key == "caps"


def test_range_endpoints_are_inclusive():
    config = parse_config("[sweep]\ntheta = -3.141592653589793:3.141592653589793:5\n")
    assert config.sweep.theta[0] == pytest.approx(-math.pi)
    assert config.sweep.theta[-1] == pytest.approx(math.pi)
    assert len(config.sweep.theta) == 5
