"""Coefficient vectors, norm oracles and coordinate projections.

A vector of a ``dim``-dimensional space is a plain float64 numpy array of
length ``dim``; entry ``n - 1`` holds the ``n``-th coordinate functional.
Index sets in the public API are 1-based, matching the usual notation
``e_1, ..., e_N``; masks and 0-based positions stay internal.

Norm oracles are vectorised: they take an array of shape ``(..., dim)``
and reduce the last axis.  Every oracle must be pure, so a batch of rows
gives the same bits as evaluating each row alone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import TgaError

NORM_TOL = 1e-9
"""Absolute tolerance used when two norm values are compared."""

IndexSet = tuple  # sorted tuple of 1-based coordinate indices


@dataclass(frozen=True)
class BasisSpace:
    """A finite-dimensional space with the canonical basis and a norm oracle."""

    dim: int
    oracle: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    name: str = "space"
    exact_constants: Mapping[str, float] | None = None
    config: Mapping | None = field(default=None, repr=False, compare=False)
    lattice: bool = False
    """True when the norm is nondecreasing in every ``|x_n|``."""

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise TgaError(f"dim must be a positive integer, got {self.dim!r}")

    def norm(self, v) -> float | np.ndarray:
        """Norm of one vector (returns float) or of a stack of row vectors."""
        arr = as_coeffs(v, self.dim, batch=True)
        out = np.asarray(self.oracle(arr), dtype=np.float64)
        if arr.ndim == 1:
            return float(out)
        return out

    def batch_norm(self, rows: np.ndarray) -> np.ndarray:
        """Unchecked vectorised oracle call used on hot paths."""
        return np.asarray(self.oracle(rows), dtype=np.float64)

    def unit_vector(self, n: int) -> np.ndarray:
        e = np.zeros(self.dim)
        e[_check_index(n, self.dim)] = 1.0
        return e


def as_coeffs(v, dim: int | None = None, *, batch: bool = False) -> np.ndarray:
    """Validate ``v`` as a finite real coefficient array (float64 copy)."""
    arr = np.array(v, dtype=np.float64)
    if arr.ndim == 0 or (arr.ndim > 1 and not batch):
        raise TgaError(f"expected a 1-d coefficient array, got shape {arr.shape}")
    if arr.shape[-1] == 0:
        raise TgaError("coefficient arrays must be non-empty")
    if dim is not None and arr.shape[-1] != dim:
        raise TgaError(f"dimension mismatch: vector has {arr.shape[-1]} entries, space has {dim}")
    if not np.all(np.isfinite(arr)):
        raise TgaError("coefficient arrays must have finite entries")
    return arr


def norm(space: BasisSpace, v) -> float:
    return space.norm(as_coeffs(v, space.dim))


def support(v) -> IndexSet:
    arr = as_coeffs(v)
    return tuple(int(n) + 1 for n in np.flatnonzero(arr))


def _check_index(n, dim: int) -> int:
    if int(n) != n or not 1 <= n <= dim:
        raise TgaError(f"index {n!r} out of range [1, {dim}]")
    return int(n) - 1


def index_set(indices: Iterable[int], dim: int) -> IndexSet:
    """Normalise 1-based indices into a sorted duplicate-free tuple."""
    idx = sorted({_check_index(n, dim) + 1 for n in indices})
    return tuple(idx)


def mask_of(indices: Iterable[int], dim: int) -> np.ndarray:
    mask = np.zeros(dim, dtype=bool)
    for n in indices:
        mask[_check_index(n, dim)] = True
    return mask


def indices_of(mask: np.ndarray) -> IndexSet:
    return tuple(int(n) + 1 for n in np.flatnonzero(mask))


def complement(indices: Iterable[int], dim: int) -> IndexSet:
    return indices_of(~mask_of(indices, dim))


def project(v, A: Iterable[int]) -> np.ndarray:
    """Keep the coordinates in ``A`` and zero the rest."""
    arr = as_coeffs(v)
    return np.where(mask_of(A, arr.shape[0]), arr, 0.0)


def subset_masks(dim: int, sizes: Sequence[int] | None = None) -> np.ndarray:
    """All subsets of ``[1, dim]`` as boolean rows.

    Rows are ordered by cardinality and then lexicographically on the sorted
    index tuple, which is the witness tie-break order used everywhere.
    """
    sizes = range(dim + 1) if sizes is None else sizes
    rows = []
    for k in sizes:
        for combo in itertools.combinations(range(dim), k):
            row = np.zeros(dim, dtype=bool)
            row[list(combo)] = True
            rows.append(row)
    if not rows:
        return np.zeros((0, dim), dtype=bool)
    return np.array(rows)


@dataclass
class ValidationReport:
    passed: bool
    checks: int
    violation: str | None = None
    witness: list[list[float]] | None = None
    detail: str = ""

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": self.checks,
            "violation": self.violation,
            "witness": self.witness,
            "detail": self.detail,
        }


_SCALARS = (-2.0, -1.0, -0.5, 0.0, 0.25, 3.0)


def validate_norm(space: BasisSpace, probes, tol: float = 1e-12) -> ValidationReport:
    """Probe the norm axioms on a finite set of vectors.

    The probe list is extended with the canonical unit vectors, and
    positivity is also tested on every pairwise difference, so that a
    degenerate oracle (say, a max of functionals that do not span) is
    caught even when no probe lies in its kernel.
    """
    P = as_coeffs(probes, space.dim, batch=True)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[0] == 0:
        raise TgaError("validate_norm needs at least one probe")
    P = np.vstack([P, np.eye(space.dim)])
    vals = space.batch_norm(P)
    checks = 0

    bad = np.flatnonzero(~np.isfinite(vals) | (vals < 0))
    checks += len(vals)
    if bad.size:
        i = bad[0]
        return ValidationReport(False, checks, "nonnegativity", [P[i].tolist()],
                                f"norm returned {vals[i]!r}")

    nonzero = np.any(P != 0, axis=1)
    hit = np.flatnonzero(nonzero & (vals <= tol))
    checks += len(P)
    if hit.size:
        i = hit[0]
        return ValidationReport(False, checks, "positivity", [P[i].tolist()],
                                f"nonzero vector has norm {vals[i]!r}")

    for lam in _SCALARS:
        scaled = space.batch_norm(lam * P)
        checks += len(P)
        err = np.abs(scaled - abs(lam) * vals)
        bound = tol * np.maximum(1.0, abs(lam) * vals)
        hit = np.flatnonzero(err > bound)
        if hit.size:
            i = hit[0]
            return ValidationReport(False, checks, "homogeneity", [P[i].tolist()],
                                    f"||{lam}*v|| = {scaled[i]!r} but |{lam}|*||v|| = {abs(lam) * vals[i]!r}")

    for i in range(len(P)):
        sums = space.batch_norm(P[i] + P[i:])
        diffs_vec = P[i] - P[i:]
        diffs = space.batch_norm(diffs_vec)
        checks += 2 * (len(P) - i)
        over = sums - (vals[i] + vals[i:])
        hit = np.flatnonzero(over > tol * np.maximum(1.0, vals[i] + vals[i:]))
        if hit.size:
            j = i + hit[0]
            return ValidationReport(False, checks, "triangle", [P[i].tolist(), P[j].tolist()],
                                    f"||v+w|| exceeds ||v||+||w|| by {over[hit[0]]!r}")
        zero = np.flatnonzero(np.any(diffs_vec != 0, axis=1) & (diffs <= tol))
        if zero.size:
            return ValidationReport(False, checks, "positivity", [diffs_vec[zero[0]].tolist()],
                                    "nonzero difference of probes has zero norm")

    return ValidationReport(True, checks)
