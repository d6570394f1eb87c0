# pylint: disable=redefined-outer-name

"""Tests for cli"""
# ─────────────────────────────────────────────────────────────
# IMPORTS
# ─────────────────────────────────────────────────────────────

import json

import numpy as np
import pandas as pd
import pytest

from electron_polariton_simulation import __version__
from electron_polariton_simulation.cli import build_parser, load_config, main, write_table
from electron_polariton_simulation.experiment_config import ExperimentConfig

FIG2_CONFIG = """
[sweep]
v0_over_c = 0.05, 0.1
b_e_qe = 1, 2

[caps]
n_z_max = 1
manifold_max = 1

[output]
experiment = fig2
"""


@pytest.fixture
def config_file(tmp_path):
    """Small fig2 experiment file."""
    path = tmp_path / "fig2.ini"
    path.write_text(FIG2_CONFIG, encoding="utf-8")
    return path


# ─────────────────────────────────────────────────────────────
# TEST: Command-line overrides
# ─────────────────────────────────────────────────────────────


def test_overrides_take_precedence(config_file, tmp_path):
    args = build_parser().parse_args(
        ["--config", str(config_file), "--out", str(tmp_path / "x"), "--threads", "2", "--caps", "nz=0,N=2"]
    )
    config = load_config(args)
    assert config.experiment == "fig2"
    assert config.out_dir == str(tmp_path / "x")
    assert config.threads == 2
    assert (config.caps.n_z_max, config.caps.manifold_max) == (0, 2)


# ─────────────────────────────────────────────────────────────
# TEST: Tables and manifest
# ─────────────────────────────────────────────────────────────


def test_csv_tables_and_manifest(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["--config", str(config_file), "--out", str(out)]) == 0

    with open(out / "fig2.csv", encoding="utf-8") as handle:
        header = handle.readline()
    assert header.startswith("# ")
    provenance = json.loads(header[2:])
    assert provenance["version"] == __version__
    assert provenance["config"]["sweep"]["b_e_qe"] == [1.0, 2.0]

    frame = pd.read_csv(out / "fig2.csv", comment="#")
    assert len(frame) == 4
    assert list(frame["b_e_qe_nm"]) == [1.0, 2.0, 1.0, 2.0]

    manifest = json.loads((out / "fig2_manifest.json").read_text(encoding="utf-8"))
    assert manifest["experiment"] == "fig2"
    assert manifest["files"] == ["fig2.csv"]
    assert manifest["caps"] == {"n_z_max": 1, "manifold_max": 1}
    assert manifest["failures"] == []
    assert isinstance(manifest["summary"]["monotone_decay_in_b"], bool)


def test_json_output(config_file, tmp_path):
    text = config_file.read_text(encoding="utf-8") + "format = json\n"
    config_file.write_text(text, encoding="utf-8")
    assert main(["--config", str(config_file), "--out", str(tmp_path)]) == 0
    records = json.loads((tmp_path / "fig2.json").read_text(encoding="utf-8"))
    assert len(records) == 4
    assert {"v0_over_c", "h_G_1plus"} <= set(records[0])


def test_json_records_keep_significant_digits(tmp_path):
    frame = pd.DataFrame(
        {"tiny": [1e-13, 3.3e-9], "value": [1.0 / 3.0, -2.5e7], "count": np.array([1, 2]), "label": ["G", "1+"]}
    )
    path = write_table(frame, tmp_path / "table", ExperimentConfig(output_format="json"))
    records = json.loads(path.read_text(encoding="utf-8"))
    assert [row["tiny"] for row in records] == [1e-13, 3.3e-9]
    assert records[0]["value"] == 0.333333333333
    assert records[1]["value"] == -2.5e7
    assert records[1]["count"] == 2
    assert records[1]["label"] == "1+"


def test_warnings_are_recorded(tmp_path):
    """A slow electron is reported in the manifest, not raised."""
    path = tmp_path / "slow.ini"
    path.write_text("[probe]\nv0_over_c = 0.005\n[caps]\nn_z_max = 0\nmanifold_max = 1\n", encoding="utf-8")
    assert main(["--config", str(path), "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "custom_manifest.json").read_text(encoding="utf-8"))
    assert any(message.startswith("NonrecoilWarning") for message in manifest["warnings"])
    # the caps actually used, padded above the first manifold
    assert manifest["caps"] == {"n_z_max": 1, "manifold_max": 2}


def test_unbroadened_spectrum_runs(tmp_path):
    path = tmp_path / "sharp.ini"
    text = "[params]\nsigma = 0\n[caps]\nn_z_max = 1\nmanifold_max = 2\n[output]\nnormalization = i0\n"
    path.write_text(text, encoding="utf-8")
    assert main(["--config", str(path), "--out", str(tmp_path)]) == 0
    spectrum = pd.read_csv(tmp_path / "custom_spectrum.csv", comment="#")
    assert np.isfinite(spectrum["intensity"]).all()
    assert spectrum["intensity"].max() > 0.0


# ─────────────────────────────────────────────────────────────
# TEST: Invalid input
# ─────────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    "text",
    [
        "[params]\nradius_r = -1\n",
        "[params]\nsigma = -0.01\n",
        "[nonsense]\nx = 1\n",
        "radius_r = 1\n",
        "[caps]\nn_z_max = 40\nmanifold_max = 40\n",
    ],
)
def test_usage_errors_exit_with_two(text, tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(text, encoding="utf-8")
    assert main(["--config", str(path), "--out", str(tmp_path)]) == 2
    assert "error: " in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "absent.ini")]) == 2
    assert "error" in capsys.readouterr().err
