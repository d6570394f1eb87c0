"""Momentum-Shift Operator Algebra Module.

The electron enters the scattering matrix only through the shift operators
b_q = Σ_k c†_{k−q} c_k, which commute with each other, satisfy b_q b_p = b_{q+p}
and b_q† = b_{−q}. This module provides:
- ShiftPoly: complex-weighted sums Σ α·b_q in a canonical, tolerance-merged form
- ShiftMatrix: dense matrices over ShiftPoly with a graded fast path
- mat_exp: the truncated Taylor exponential that yields the scattering matrix
- apply_poly: action of a ShiftPoly on a sparse electron wavepacket

A ShiftMatrix is *graded* when every entry (i, j) is a single term at
q = p_i − p_j for a fixed potential vector p. Products, sums and daggers of graded
matrices with the same potentials stay graded, so they reduce to dense complex
linear algebra on the amplitudes. Interaction matrices built from target energies
are graded with p_i = E_i/ħv0.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from electron_polariton_simulation.electron import Wavepacket

logger = logging.getLogger(__name__)

ABS_MERGE_TOL = 1e-12
REL_MERGE_TOL = 1e-9
AMPLITUDE_FLOOR = 1e-16
TAYLOR_TOLERANCE = 1e-14
MAX_TAYLOR_TERMS = 200


class DimensionMismatchError(Exception):
    """Raised when shift matrices of different dimensions are combined."""


class ConvergenceError(Exception):
    """Raised when the Taylor series of a matrix exponential does not converge in time."""


def merge_tolerance(q: float, rel_tol: float = REL_MERGE_TOL, abs_tol: float = ABS_MERGE_TOL) -> float:
    """Returns max(abs_tol, rel_tol·|q|), the distance below which momenta are identified."""
    return max(abs_tol, rel_tol * abs(q))


def momenta_match(q1: float, q2: float, rel_tol: float = REL_MERGE_TOL, abs_tol: float = ABS_MERGE_TOL) -> bool:
    """Tells whether two momenta are identified under the merge tolerance."""
    return abs(q1 - q2) <= merge_tolerance(max(abs(q1), abs(q2)), rel_tol, abs_tol)


def cluster_momenta(
    momenta: np.ndarray, rel_tol: float = REL_MERGE_TOL, abs_tol: float = ABS_MERGE_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """
    Groups momenta that are identified under the merge tolerance.

    Consecutive sorted momenta closer than the tolerance fall into one cluster,
    represented by its smallest member.

    Args:
        momenta (np.ndarray): Momenta in 1/nm, any order.
        rel_tol (float): Relative merge tolerance.
        abs_tol (float): Absolute merge tolerance in 1/nm.

    Returns:
        tuple[np.ndarray, np.ndarray]: Sorted cluster representatives, and for each
        input momentum the index of its cluster.
    """
    momenta = np.asarray(momenta, dtype=float)
    if momenta.size == 0:
        return momenta.copy(), np.zeros(0, dtype=int)
    order = np.argsort(momenta, kind="stable")
    ordered = momenta[order]
    gaps = np.diff(ordered)
    tolerance = np.maximum(abs_tol, rel_tol * np.abs(ordered[1:]))
    starts = np.concatenate(([True], gaps > tolerance))
    sorted_labels = np.cumsum(starts) - 1
    labels = np.empty_like(sorted_labels)
    labels[order] = sorted_labels
    return ordered[starts], labels


def merge_sparse(
    momenta: np.ndarray, amplitudes: np.ndarray, rel_tol: float = REL_MERGE_TOL, abs_tol: float = ABS_MERGE_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Sums amplitudes of identified momenta; returns sorted momenta and their amplitudes."""
    representatives, labels = cluster_momenta(momenta, rel_tol, abs_tol)
    merged = np.zeros(representatives.size, dtype=complex)
    np.add.at(merged, labels, np.asarray(amplitudes, dtype=complex))
    return representatives, merged


def find_momenta(
    grid: np.ndarray, targets, rel_tol: float = REL_MERGE_TOL, abs_tol: float = ABS_MERGE_TOL
) -> np.ndarray:
    """Index of each target within a sorted momentum grid under the merge tolerance, −1 if absent."""
    grid = np.asarray(grid, dtype=float)
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    found = np.full(targets.shape, -1)
    if not grid.size:
        return found
    position = np.searchsorted(grid, targets)
    for candidate in (position - 1, position):
        candidate = np.clip(candidate, 0, grid.size - 1)
        tolerance = np.maximum(abs_tol, rel_tol * np.maximum(np.abs(targets), np.abs(grid[candidate])))
        close = np.abs(grid[candidate] - targets) <= tolerance
        found = np.where((found < 0) & close, candidate, found)
    return found


@dataclass(frozen=True)
class ShiftPoly:
    """Canonical sum Σ α·b_q, stored as (amplitude, q) terms sorted by q."""

    terms: tuple[tuple[complex, float], ...] = ()

    @classmethod
    def canonical(
        cls, terms: Iterable[tuple[complex, float]], rel_tol: float = REL_MERGE_TOL, abs_tol: float = ABS_MERGE_TOL
    ) -> ShiftPoly:
        """
        Builds the canonical form of a list of (amplitude, q) terms.

        Terms are sorted by (q, Re α, Im α), terms whose q lies within the merge
        tolerance of a cluster's first q are added, and amplitudes with |α| ≤ 1e-16
        are dropped. The ordering makes the result independent of the input order.
        """
        ordered = sorted(((complex(a), float(q)) for a, q in terms), key=lambda t: (t[1], t[0].real, t[0].imag))
        merged: list[list] = []
        for amplitude, q in ordered:
            if merged and momenta_match(q, merged[-1][1], rel_tol, abs_tol):
                merged[-1][0] += amplitude
            else:
                merged.append([amplitude, q])
        return cls(tuple((a, q) for a, q in merged if abs(a) > AMPLITUDE_FLOOR))

    @classmethod
    def one(cls) -> ShiftPoly:
        """The unit b₀."""
        return cls(((1.0 + 0.0j, 0.0),))

    @classmethod
    def zero(cls) -> ShiftPoly:
        """The empty sum."""
        return cls()

    @classmethod
    def monomial(cls, amplitude: complex, q: float) -> ShiftPoly:
        """A single term α·b_q."""
        return cls.canonical([(amplitude, q)])

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def norm(self) -> float:
        """Total amplitude norm Σ|α|."""
        return sum(abs(a) for a, _ in self.terms)

    def amplitude_at(self, q: float) -> complex:
        """Returns the amplitude of the term at q, or 0."""
        return sum((a for a, p in self.terms if momenta_match(p, q)), 0.0j)

    def add(self, other: ShiftPoly, rel_tol: float = REL_MERGE_TOL, abs_tol: float = ABS_MERGE_TOL) -> ShiftPoly:
        return ShiftPoly.canonical(self.terms + other.terms, rel_tol, abs_tol)

    def mul(self, other: ShiftPoly, rel_tol: float = REL_MERGE_TOL, abs_tol: float = ABS_MERGE_TOL) -> ShiftPoly:
        products = [(a * b, p + q) for a, p in self.terms for b, q in other.terms]
        return ShiftPoly.canonical(products, rel_tol, abs_tol)

    def scale(self, factor: complex) -> ShiftPoly:
        return ShiftPoly.canonical((factor * a, q) for a, q in self.terms)

    def dagger(self) -> ShiftPoly:
        """(α·b_q)† = α*·b_{−q}."""
        return ShiftPoly.canonical((a.conjugate(), -q) for a, q in self.terms)

    def __add__(self, other: ShiftPoly) -> ShiftPoly:
        return self.add(other)

    def __mul__(self, other: ShiftPoly) -> ShiftPoly:
        return self.mul(other)


def poly_add(a: ShiftPoly, b: ShiftPoly, merge_tol: float | None = None) -> ShiftPoly:
    """Adds two polys; ``merge_tol=0`` merges only identical momenta."""
    if merge_tol is None:
        return a.add(b)
    return a.add(b, rel_tol=merge_tol, abs_tol=merge_tol)


def poly_mul(a: ShiftPoly, b: ShiftPoly, merge_tol: float | None = None) -> ShiftPoly:
    """Multiplies two polys using b_p·b_q = b_{p+q}; ``merge_tol=0`` merges only identical momenta."""
    if merge_tol is None:
        return a.mul(b)
    return a.mul(b, rel_tol=merge_tol, abs_tol=merge_tol)


def poly_dagger(a: ShiftPoly) -> ShiftPoly:
    """Hermitian conjugate, mapping every (α, q) to (α*, −q)."""
    return a.dagger()


class ShiftMatrix:
    """Dense n×n matrix of ShiftPoly entries.

    Build general matrices from an object array of ShiftPoly, or graded matrices from
    a complex amplitude array and a potential vector p (entry (i, j) lives at
    q = p_i − p_j). The potentials are the momentum grid metadata of the matrix.
    """

    def __init__(
        self,
        entries: np.ndarray | None = None,
        *,
        amplitudes: np.ndarray | None = None,
        potentials: np.ndarray | None = None,
    ):
        if (entries is None) == (amplitudes is None):
            raise ValueError("provide either entries or graded amplitudes, not both.")
        if amplitudes is not None:
            amplitudes = np.asarray(amplitudes, dtype=complex)
            potentials = np.asarray(potentials, dtype=float)
            if amplitudes.ndim != 2 or amplitudes.shape[0] != amplitudes.shape[1]:
                raise DimensionMismatchError(f"amplitudes must be square, got shape {amplitudes.shape}.")
            if potentials.shape != (amplitudes.shape[0],):
                raise DimensionMismatchError("potentials must have one entry per row.")
            self._dimension = amplitudes.shape[0]
        else:
            entries = np.asarray(entries, dtype=object)
            if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
                raise DimensionMismatchError(f"entries must be square, got shape {entries.shape}.")
            self._dimension = entries.shape[0]
            self.__dict__["entries"] = entries
        self.amplitudes = amplitudes
        self.potentials = potentials

    @classmethod
    def identity(cls, n: int, potentials: np.ndarray | None = None) -> ShiftMatrix:
        """b₀ on the diagonal, empty polys elsewhere."""
        if potentials is not None:
            return cls(amplitudes=np.eye(n, dtype=complex), potentials=potentials)
        entries = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                entries[i, j] = ShiftPoly.one() if i == j else ShiftPoly.zero()
        return cls(entries)

    @classmethod
    def zeros(cls, n: int) -> ShiftMatrix:
        entries = np.empty((n, n), dtype=object)
        entries.fill(ShiftPoly.zero())
        return cls(entries)

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def is_graded(self) -> bool:
        return self.amplitudes is not None

    def momentum(self, i: int, j: int) -> float:
        """Momentum transfer q_ij of a graded entry."""
        if not self.is_graded:
            raise ValueError("momentum assignment is only fixed for graded matrices.")
        return float(self.potentials[i] - self.potentials[j])

    @cached_property
    def entries(self) -> np.ndarray:
        """Object array of ShiftPoly entries."""
        n = self._dimension
        entries = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                q = 0.0 if i == j else self.potentials[i] - self.potentials[j]
                entries[i, j] = ShiftPoly.monomial(self.amplitudes[i, j], q)
        return entries

    def entry(self, i: int, j: int) -> ShiftPoly:
        return self.entries[i, j]

    def general(self) -> ShiftMatrix:
        """Returns the same matrix without the graded fast path."""
        return ShiftMatrix(self.entries.copy())

    def _shares_grading(self, other: ShiftMatrix) -> bool:
        return self.is_graded and other.is_graded and np.array_equal(self.potentials, other.potentials)

    def _check_dimension(self, other: ShiftMatrix):
        if self.dimension != other.dimension:
            raise DimensionMismatchError(f"dimensions {self.dimension} and {other.dimension} differ.")

    def matmul(self, other: ShiftMatrix) -> ShiftMatrix:
        self._check_dimension(other)
        if self._shares_grading(other):
            return ShiftMatrix(amplitudes=self.amplitudes @ other.amplitudes, potentials=self.potentials)
        n = self.dimension
        left, right = self.entries, other.entries
        result = np.empty((n, n), dtype=object)
        for i in range(n):
            row = [k for k in range(n) if not left[i, k].is_zero]
            for j in range(n):
                terms = []
                for k in row:
                    if not right[k, j].is_zero:
                        terms.extend((a * b, p + q) for a, p in left[i, k].terms for b, q in right[k, j].terms)
                result[i, j] = ShiftPoly.canonical(terms)
        return ShiftMatrix(result)

    def add(self, other: ShiftMatrix) -> ShiftMatrix:
        self._check_dimension(other)
        if self._shares_grading(other):
            return ShiftMatrix(amplitudes=self.amplitudes + other.amplitudes, potentials=self.potentials)
        n = self.dimension
        result = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                result[i, j] = self.entries[i, j].add(other.entries[i, j])
        return ShiftMatrix(result)

    def scale(self, factor: complex) -> ShiftMatrix:
        if self.is_graded:
            return ShiftMatrix(amplitudes=factor * self.amplitudes, potentials=self.potentials)
        return ShiftMatrix(np.vectorize(lambda p: p.scale(factor), otypes=[object])(self.entries))

    def dagger_transpose(self) -> ShiftMatrix:
        """Entry (i, j) of the result is the dagger of entry (j, i)."""
        if self.is_graded:
            return ShiftMatrix(amplitudes=self.amplitudes.conj().T, potentials=self.potentials)
        return ShiftMatrix(np.vectorize(poly_dagger, otypes=[object])(self.entries.T))

    def total_norm(self) -> float:
        """Sum over entries of Σ|α|."""
        if self.is_graded:
            return float(np.abs(self.amplitudes).sum())
        return float(sum(p.norm() for p in self.entries.flat))

    def subtract_identity_norm(self) -> float:
        """Total amplitude norm of self − identity."""
        if self.is_graded:
            return float(np.abs(self.amplitudes - np.eye(self.dimension)).sum())
        return self.add(ShiftMatrix.identity(self.dimension).scale(-1.0)).total_norm()


def mat_exp(
    m: ShiftMatrix,
    scale: complex = 1.0,
    *,
    tolerance: float = TAYLOR_TOLERANCE,
    max_terms: int = MAX_TAYLOR_TERMS,
    squarings: int = 0,
) -> ShiftMatrix:
    """
    Exponentiates scale·m by its Taylor series.

    Terms are accumulated until the added term's total amplitude norm drops below
    ``tolerance``. With ``squarings`` = s the series is summed for scale·m/2^s and
    the result squared s times.

    Args:
        m (ShiftMatrix): Generator.
        scale (complex): Scalar prefactor, e.g. −1j for a scattering matrix.
        tolerance (float): Stopping threshold on the term norm.
        max_terms (int): Maximum number of Taylor terms.
        squarings (int): Number of scaling-and-squaring steps.

    Returns:
        ShiftMatrix: exp(scale·m), graded if m is graded.

    Raises:
        ConvergenceError: If the series has not converged after ``max_terms`` terms.
    """
    generator = m.scale(scale / 2**squarings)
    identity = ShiftMatrix.identity(m.dimension, m.potentials if m.is_graded else None)
    result = identity
    term = identity
    residual = math.inf
    for order in range(1, max_terms + 1):
        term = term.matmul(generator).scale(1.0 / order)
        result = result.add(term)
        residual = term.total_norm()
        if residual < tolerance:
            logger.debug("Taylor series converged after %d terms (residual %.3e)", order, residual)
            break
    else:
        raise ConvergenceError(f"Taylor series not converged after {max_terms} terms; residual norm {residual:.3e}.")
    for _ in range(squarings):
        result = result.matmul(result)
    return result


def apply_poly(p: ShiftPoly, w: Wavepacket) -> Wavepacket:
    """
    Applies Σ α·b_q to a wavepacket.

    b_q moves the amplitude at k to k − q, so the output at k accumulates α·w(k + q).
    Coinciding momenta are merged within the merge tolerance.
    """
    if p.is_zero or not w.momenta.size:
        return w.with_entries(np.zeros(0), np.zeros(0, dtype=complex))
    momenta = np.concatenate([w.momenta - q for _, q in p.terms])
    amplitudes = np.concatenate([a * w.amplitudes for a, _ in p.terms])
    return w.with_entries(momenta, amplitudes)

