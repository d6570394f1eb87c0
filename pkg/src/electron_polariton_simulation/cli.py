"""Command-Line Interface Module.

Entry point of the `electron-polariton-simulation` command. It resolves an
experiment file plus flags into an ExperimentConfig, runs the requested pipeline,
and writes every result table next to a JSON manifest that records the resolved
configuration, the code version, the truncation caps and all emitted warnings.
"""

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable

from electron_polariton_simulation import __version__
from electron_polariton_simulation.electron import InvalidCombError
from electron_polariton_simulation.em_couplings import InvalidBesselArgumentError, InvalidIntegralArgumentError
from electron_polariton_simulation.experiment_config import (
    EXPERIMENTS,
    NORMALIZATIONS,
    ConfigKeyError,
    ConfigSyntaxError,
    ConfigValueError,
    ExperimentConfig,
    parse_caps_override,
    parse_config,
)
from electron_polariton_simulation.experiments import (
    ExperimentResult,
    run_custom,
    run_fig2,
    run_fig3,
    run_fig4,
    run_fig5,
    run_fig6,
)
from electron_polariton_simulation.hilbert import DimensionLimitError, InvalidParameterError, StateOutsideCapsError
from electron_polariton_simulation.lineshape import InvalidWidthError
from electron_polariton_simulation.observables import AmplitudeOutOfRangeError, ReferenceIntensityError
from electron_polariton_simulation.shift_algebra import ConvergenceError
from electron_polariton_simulation.validity_check import run_validate

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
USAGE_ERRORS = (
    ConfigSyntaxError,
    ConfigKeyError,
    ConfigValueError,
    InvalidParameterError,
    DimensionLimitError,
    StateOutsideCapsError,
    InvalidBesselArgumentError,
    InvalidIntegralArgumentError,
    InvalidCombError,
    AmplitudeOutOfRangeError,
    ReferenceIntensityError,
    ConvergenceError,
    InvalidWidthError,
    OSError,
)

PIPELINES: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "fig6": run_fig6,
    "custom": run_custom,
    "validate": run_validate,
}


def _jsonable(value: Any) -> Any:
    if hasattr(value, "item"):
        return value.item()
    return str(value)


def _record_value(value: Any) -> Any:
    """Plain Python value of a table cell, floats cut to the significant digits of FLOAT_FORMAT."""
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float):
        return float(FLOAT_FORMAT % value) if math.isfinite(value) else None
    return value


def _dump(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, default=_jsonable)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="electron-polariton-simulation",
        description="Free-electron probing of a nanocavity-emitter polariton target.",
    )
    parser.add_argument("--config", type=Path, help="experiment file ([params], [probe], [sweep], [caps], [output])")
    parser.add_argument("--experiment", choices=EXPERIMENTS, help="pipeline to run")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="sweep worker threads")
    parser.add_argument("--caps", help="truncation override, e.g. nz=2,N=4")
    parser.add_argument("--normalization", choices=NORMALIZATIONS, help="spectrum normalization")
    parser.add_argument(
        "--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="logging level"
    )
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Reads the experiment file and applies command-line overrides."""
    text = args.config.read_text(encoding="utf-8") if args.config else ""
    config = parse_config(text)
    overrides = {}
    if args.experiment:
        overrides["experiment"] = args.experiment
    if args.out:
        overrides["out_dir"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.normalization:
        overrides["normalization"] = args.normalization
    if args.caps:
        overrides["caps"] = parse_caps_override(args.caps, config.caps)
    return replace(config, **overrides)


def write_table(frame, path: Path, config: ExperimentConfig):
    """Writes one table as CSV behind a single `#` header line, or as JSON records."""
    if config.output_format == "json":
        path = path.with_suffix(".json")
        rows = frame.to_dict(orient="records")
        records = [{key: _record_value(value) for key, value in row.items()} for row in rows]
        path.write_text(json.dumps(records, default=_jsonable) + "\n", encoding="utf-8")
        return path
    path = path.with_suffix(".csv")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# {_dump({'config': config.to_dict(), 'version': __version__})}\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def run(config: ExperimentConfig) -> int:
    """
    Runs one experiment and writes its tables and manifest.

    Args:
        config (ExperimentConfig): Resolved configuration.

    Returns:
        int: 0 on success, 1 when a validation check failed.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("running %s into %s", config.experiment, out_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = PIPELINES[config.experiment](config)

    written = [write_table(frame, out_dir / name, config).name for name, frame in result.tables.items()]
    messages = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    for message in messages:
        logger.warning(message)
    caps = result.caps or config.caps
    manifest = {
        "experiment": config.experiment,
        "version": __version__,
        "config": config.to_dict(),
        "caps": {"n_z_max": caps.n_z_max, "manifold_max": caps.manifold_max},
        "files": written,
        "summary": result.summary,
        "warnings": messages,
        "failures": result.failures,
    }
    manifest_path = out_dir / f"{config.experiment}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2, default=_jsonable) + "\n", encoding="utf-8")
    return 1 if result.failures else 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return run(load_config(args))
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
