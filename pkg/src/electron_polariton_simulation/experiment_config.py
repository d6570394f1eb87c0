"""Experiment Configuration Module.

This module reads the INI-style experiment files of the command-line tool and
resolves them into an immutable ExperimentConfig. It includes functionality for:
- Parsing [params], [probe], [sweep], [caps] and [output] sections
- Comma lists and inclusive `start:stop:num` ranges for sweep grids
- Per-key type and range checks that name the offending key
- Rejection of unknown sections and keys

An empty file resolves to the reference configuration.
"""

import configparser
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable

import numpy as np

from electron_polariton_simulation.hilbert import Caps, InvalidParameterError, PhysicalParams
from electron_polariton_simulation.scattering import ProbeConfig

logger = logging.getLogger(__name__)

EXPERIMENTS = ("fig2", "fig3", "fig4", "fig5", "fig6", "custom", "validate")
NORMALIZATIONS = ("raw", "i0")
OUTPUT_FORMATS = ("csv", "json")
Q_MOD_TARGETS = ("none", "upper", "lower")


class ConfigSyntaxError(Exception):
    """Raised when a configuration file cannot be parsed; carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class ConfigKeyError(Exception):
    """Raised when a configuration file contains an unknown section or key."""


class ConfigValueError(Exception):
    """Raised when a configuration value has the wrong type or lies out of range; names the key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SweepGrid:
    """Sweep axes; None means the experiment's own default grid."""

    v0_over_c: tuple[float, ...] | None = None
    b_e_qe: tuple[float, ...] | None = None
    detuning: tuple[float, ...] | None = None
    theta: tuple[float, ...] | None = None
    f: tuple[float, ...] | None = None
    q_mod_target: tuple[str, ...] | None = None
    omega: tuple[float, ...] | None = None
    k_offset: tuple[float, ...] | None = None
    comb_teeth: int = 100
    running_phase: float = 0.0

    def __post_init__(self):
        for name in ("v0_over_c", "b_e_qe", "detuning", "theta", "f", "q_mod_target", "omega", "k_offset"):
            values = getattr(self, name)
            if values is not None and not values:
                raise ConfigValueError(name, "sweep grid must not be empty.")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description.

    Attributes:
        experiment (str): One of fig2, fig3, fig4, fig5, fig6, custom, validate.
        params (PhysicalParams): Target and geometry parameters.
        probe (ProbeConfig): Channel switches and the single-point probe.
        sweep (SweepGrid): Sweep axes.
        caps (Caps): Target space truncation.
        out_dir (str): Output directory.
        output_format (str): "csv" or "json".
        normalization (str): "raw" or "i0".
        threads (int): Sweep worker threads.
        seed (int): Seed of the randomized validation configurations.
    """

    experiment: str = "custom"
    params: PhysicalParams = field(default_factory=PhysicalParams)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    sweep: SweepGrid = field(default_factory=SweepGrid)
    caps: Caps = field(default_factory=Caps)
    out_dir: str = "results"
    output_format: str = "csv"
    normalization: str = "raw"
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigValueError("experiment", f"must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}.")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigValueError("normalization", f"must be raw or i0, got {self.normalization!r}.")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigValueError("format", f"must be csv or json, got {self.output_format!r}.")
        if self.threads < 1:
            raise ConfigValueError("threads", f"must be at least 1, got {self.threads}.")

    def to_dict(self) -> dict[str, Any]:
        """Resolved configuration as plain JSON-compatible values."""
        return asdict(self)


def _number(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not a finite number")
    return value


def _integer(text: str) -> int:
    return int(text)


def _boolean(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _grid(text: str) -> tuple[float, ...]:
    """Comma list of numbers or an inclusive linspace `start:stop:num`."""
    text = text.strip()
    if ":" in text:
        start, stop, num = text.split(":")
        count = int(num)
        if count < 1:
            raise ValueError("range needs at least one point")
        return tuple(float(x) for x in np.linspace(_number(start), _number(stop), count))
    return tuple(_number(part) for part in text.split(",") if part.strip())


def _choices(options: tuple[str, ...]) -> Callable[[str], tuple[str, ...]]:
    def parse(text: str) -> tuple[str, ...]:
        values = tuple(part.strip().lower() for part in text.split(",") if part.strip())
        unknown = [v for v in values if v not in options]
        if unknown:
            raise ValueError(f"unknown values {unknown}; allowed are {', '.join(options)}")
        return values

    return parse


def _positive(value) -> bool:
    return value > 0


def _non_negative(value) -> bool:
    return value >= 0


def _speed(value) -> bool:
    return 0 < value < 1


def _speeds(values) -> bool:
    return all(0 < v < 1 for v in values)


def _positives(values) -> bool:
    return all(v > 0 for v in values)


def _unit_interval(values) -> bool:
    return all(0 <= v <= 1 for v in values)


def _anything(_value) -> bool:
    return True


_SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Callable[[Any], bool], str]]] = {
    "params": {
        "hbar_omega_c": (_number, _positive, "a positive energy in eV"),
        "hbar_omega_qe": (_number, _positive, "a positive energy in eV"),
        "mu_qe": (_number, _non_negative, "a non-negative dipole moment in e·nm"),
        "radius_r": (_number, _positive, "a positive length in nm"),
        "b_c_qe": (_number, _positive, "a positive length in nm"),
        "sigma": (_number, _non_negative, "a non-negative width in eV"),
        "collinear": (_boolean, _anything, "a boolean"),
        "detuning": (_number, _anything, "an energy in eV"),
    },
    "probe": {
        "v0_over_c": (_number, _speed, "a speed in (0, 1)"),
        "b_e_qe": (_number, _positive, "a positive length in nm"),
        "b_e_c": (_number, _positive, "a positive length in nm"),
        "z_qe": (_number, _anything, "a length in nm"),
        "enable_ec_x": (_boolean, _anything, "a boolean"),
        "enable_ec_z": (_boolean, _anything, "a boolean"),
        "enable_eqe": (_boolean, _anything, "a boolean"),
    },
    "sweep": {
        "v0_over_c": (_grid, _speeds, "speeds in (0, 1)"),
        "b_e_qe": (_grid, _positives, "positive lengths in nm"),
        "detuning": (_grid, _anything, "energies in eV"),
        "theta": (_grid, _anything, "angles in radians"),
        "f": (_grid, _unit_interval, "amplitudes in [0, 1]"),
        "q_mod_target": (_choices(Q_MOD_TARGETS), _anything, "a list of none, upper, lower"),
        "omega": (_grid, _positives, "positive energies in eV"),
        "k_offset": (_grid, _anything, "offsets in units of ω_c/v0"),
        "comb_teeth": (_integer, lambda n: n >= 0 and n % 2 == 0, "a non-negative even integer"),
        "running_phase": (_number, _anything, "an angle in radians"),
    },
    "caps": {
        "n_z_max": (_integer, _non_negative, "a non-negative integer"),
        "manifold_max": (_integer, lambda n: n >= 1, "an integer >= 1"),
        "energy_cap": (_number, _positive, "a positive energy in eV"),
        "max_dimension": (_integer, _positive, "a positive integer"),
    },
    "output": {
        "experiment": (str.strip, lambda v: v in EXPERIMENTS, f"one of {', '.join(EXPERIMENTS)}"),
        "out_dir": (str.strip, bool, "a directory path"),
        "format": (str.strip, lambda v: v in OUTPUT_FORMATS, "csv or json"),
        "normalization": (str.strip, lambda v: v in NORMALIZATIONS, "raw or i0"),
        "threads": (_integer, _positive, "a positive integer"),
        "seed": (_integer, _non_negative, "a non-negative integer"),
    },
}


def _read_sections(text: str) -> dict[str, dict[str, Any]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigSyntaxError("key outside of a [section]", exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigSyntaxError("expected 'key = value'", line) from exc
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigSyntaxError(exc.message, exc.lineno) from exc

    resolved: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigKeyError(f"unknown section [{section}]; known are {', '.join(_SCHEMA)}.")
        values = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigKeyError(f"unknown key {key!r} in [{section}].")
            convert, check, expected = _SCHEMA[section][key]
            try:
                value = convert(raw)
            except ValueError as exc:
                raise ConfigValueError(key, f"expected {expected}, got {raw!r} ({exc}).") from exc
            if not check(value):
                raise ConfigValueError(key, f"expected {expected}, got {raw!r}.")
            values[key] = value
        resolved[section] = values
    return resolved


def parse_config(text: str) -> ExperimentConfig:
    """
    Parses an experiment file into a fully resolved ExperimentConfig.

    A single speed or impact parameter under [probe] fixes that sweep axis to one
    point; giving the same axis under [probe] and [sweep] is an error.

    Args:
        text (str): File contents.

    Returns:
        ExperimentConfig: Configuration with defaults applied.

    Raises:
        ConfigSyntaxError: If the text is not valid INI syntax.
        ConfigKeyError: If a section or key is unknown.
        ConfigValueError: If a value has the wrong type or range, or values conflict.
    """
    sections = _read_sections(text)
    params_values = dict(sections.get("params", {}))
    probe_values = dict(sections.get("probe", {}))
    sweep_values = dict(sections.get("sweep", {}))
    output_values = dict(sections.get("output", {}))

    for axis in ("v0_over_c", "b_e_qe"):
        if axis in probe_values:
            if axis in sweep_values:
                raise ConfigValueError(axis, "given both under [probe] and [sweep].")
            sweep_values[axis] = (probe_values[axis],)

    detuning = params_values.pop("detuning", None)
    collinear = params_values.pop("collinear", True)
    try:
        # geometry is checked once every override is in place
        params = PhysicalParams(**params_values, collinear=False)
        if detuning is not None:
            params = params.with_detuning(detuning)
        params = params.with_probe(probe_values.get("v0_over_c"), probe_values.get("b_e_qe"))
        b_e_c = probe_values.get("b_e_c", params.b_c_qe + params.b_e_qe if collinear else params.b_e_c)
        params = replace(params, b_e_c=b_e_c, collinear=collinear)
        caps = Caps(**sections.get("caps", {}))
    except InvalidParameterError as exc:
        raise ConfigValueError(str(exc).split(" ", 1)[0], str(exc)) from exc

    switches = {key: value for key, value in probe_values.items() if key.startswith("enable_") or key == "z_qe"}
    probe = ProbeConfig.from_params(params, **switches)
    config = ExperimentConfig(
        experiment=output_values.get("experiment", "custom"),
        params=params,
        probe=probe,
        sweep=SweepGrid(**sweep_values),
        caps=caps,
        out_dir=output_values.get("out_dir", "results"),
        output_format=output_values.get("format", "csv"),
        normalization=output_values.get("normalization", "raw"),
        threads=output_values.get("threads", 1),
        seed=output_values.get("seed", 0),
    )
    logger.debug("resolved configuration %s", config)
    return config


def parse_caps_override(text: str, caps: Caps) -> Caps:
    """
    Applies a `nz=..,N=..` override to truncation caps.

    Raises:
        ConfigValueError: If the override is malformed.
    """
    names = {"nz": "n_z_max", "n": "manifold_max", "dim": "max_dimension"}
    updates = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, _, value = part.partition("=")
        name = names.get(key.strip().lower())
        if name is None or not value.strip():
            raise ConfigValueError("caps", f"expected nz=<int>,N=<int>, got {text!r}.")
        try:
            updates[name] = int(value)
        except ValueError as exc:
            raise ConfigValueError("caps", f"{key.strip()} must be an integer, got {value!r}.") from exc
    try:
        return replace(caps, **updates)
    except InvalidParameterError as exc:
        raise ConfigValueError("caps", str(exc)) from exc
