"""Lorentzian line profile shared by emission spectra and momentum broadening."""

import math

import numpy as np


class InvalidWidthError(Exception):
    """Raised when a line width is negative or not a number."""


def _sharp_line(x, center: float) -> np.ndarray:
    """Unit-area line of zero width binned onto the cell of the sample grid that holds its center."""
    points = np.asarray(x, dtype=float)
    flat = points.ravel()
    profile = np.zeros(flat.size)
    if flat.size < 2:
        return profile.reshape(points.shape)
    order = np.argsort(flat)
    grid = flat[order]
    middles = 0.5 * (grid[1:] + grid[:-1])
    edges = np.concatenate(([2.0 * grid[0] - middles[0]], middles, [2.0 * grid[-1] - middles[-1]]))
    cell = int(np.searchsorted(edges, center, side="right")) - 1
    if 0 <= cell < flat.size and edges[cell + 1] > edges[cell]:
        profile[order[cell]] = 1.0 / (edges[cell + 1] - edges[cell])
    return profile.reshape(points.shape)


def lorentzian(x, center: float, width: float, cutoff: float | None = None) -> np.ndarray:
    """
    Evaluates the unit-area Lorentzian (width/2π)/((x − center)² + width²/4).

    A zero width gives an unbroadened line: its whole area lands in the grid cell
    around the sample point nearest to the center, so sums over a grid keep the line
    weight. A grid of fewer than two points has no cells and samples to zero.

    Args:
        x (array-like): Sample points.
        center (float): Line center.
        width (float): Full width at half maximum, in the units of x.
        cutoff (float | None): If given, the profile is zero beyond ±cutoff·width and
            rescaled so that the truncated line still has unit area.

    Returns:
        np.ndarray: Profile values at x.

    Raises:
        InvalidWidthError: If width is negative or NaN.
    """
    if not width >= 0.0:
        raise InvalidWidthError(f"line width must be non-negative, got {width}.")
    if width == 0.0:
        return _sharp_line(x, center)
    offset = np.asarray(x, dtype=float) - center
    profile = (width / (2.0 * math.pi)) / (offset**2 + 0.25 * width**2)
    if cutoff is None:
        return profile
    profile = np.where(np.abs(offset) <= cutoff * width, profile, 0.0)
    return profile / (2.0 / math.pi * math.atan(2.0 * cutoff))


def peak_value(weight: float, width: float) -> float:
    """Height of a line of the given weight at its center, weight·2/(π·width)."""
    if not width > 0.0:
        raise InvalidWidthError(f"line width must be positive, got {width}.")
    return 2.0 * weight / (math.pi * width)
