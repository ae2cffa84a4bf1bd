"""Best m-term approximation error by derivative-free descent.

For a vector ``x`` and a support ``A`` the map
``alpha -> ||x - sum_{n in A} alpha_n e_n||`` is convex.  It is minimised
by a compass search over the free coordinates, starting at
``alpha = x|_A`` (the projection): try steps of size ``h`` along a fixed
direction set, take the best strict improvement, shrink ``h`` when none
exists, stop once ``h < tol``.

The first pass uses the coordinate axes and the pair diagonals
``+-e_i +- e_j``.  Polyhedral norms can still stall on a ridge whose
descent cone misses every one of those directions, so a second pass
restarts the step schedule with all primitive integer directions with
entries in ``[-3, 3]`` and at most three nonzero coordinates.  The second
pass is skipped for lattice norms: there the projection is already
optimal because the norm grows with every ``|r_n|``.

Everything runs on a batch of ``(x, A)`` rows at once so the oracle sees
large arrays.  Each row's trajectory depends only on that row.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import TgaError
from .space import BasisSpace, IndexSet, as_coeffs, indices_of, subset_masks

SOLVER_TOL = 1e-9
SHRINK = 0.25
MAX_ITER = 20_000
POLISH_ENTRY = 3
POLISH_SUPPORT = 3


@dataclass
class BestMTermResult:
    value: float
    A: IndexSet
    alpha: tuple
    solver_tol: float = SOLVER_TOL

    def to_dict(self):
        return {"value": self.value, "A": list(self.A), "alpha": list(self.alpha),
                "solver_tol": self.solver_tol}


@lru_cache(maxsize=None)
def _compass_directions(dim: int):
    dirs = []
    for j in range(dim):
        for s in (1.0, -1.0):
            d = np.zeros(dim)
            d[j] = s
            dirs.append(d)
    for i, j in itertools.combinations(range(dim), 2):
        for si, sj in itertools.product((1.0, -1.0), repeat=2):
            d = np.zeros(dim)
            d[i], d[j] = si, sj
            dirs.append(d)
    return np.array(dirs)


@lru_cache(maxsize=None)
def _polish_directions(dim: int):
    dirs = []
    vals = range(-POLISH_ENTRY, POLISH_ENTRY + 1)
    for k in range(1, min(dim, POLISH_SUPPORT) + 1):
        for pos in itertools.combinations(range(dim), k):
            for entries in itertools.product([v for v in vals if v], repeat=k):
                if math.gcd(*(abs(e) for e in entries)) != 1:
                    continue
                d = np.zeros(dim)
                d[list(pos)] = entries
                dirs.append(d)
    return np.array(dirs)


def _compass(space, X, masks, r, val, D, tol):
    h = np.max(np.abs(X), axis=1)
    active = np.flatnonzero((h >= tol) & masks.any(axis=1))
    # rows where direction k is usable: all its nonzero coordinates are free
    usable = np.all(masks[:, None, :] | (D == 0)[None, :, :], axis=2)
    it = 0
    while active.size and it < MAX_ITER:
        it += 1
        best = val[active].copy()
        choice = np.full(active.size, -1)
        for k in range(len(D)):
            sel = np.flatnonzero(usable[active, k])
            if sel.size == 0:
                continue
            rows = active[sel]
            cv = space.batch_norm(r[rows] + h[rows, None] * D[k])
            better = cv < best[sel]
            best[sel[better]] = cv[better]
            choice[sel[better]] = k
        moved = choice >= 0
        mv = active[moved]
        r[mv] += h[mv, None] * D[choice[moved]]
        val[mv] = best[moved]
        still = active[~moved]
        h[still] *= SHRINK
        active = np.sort(np.concatenate([mv, still[h[still] >= tol]]))
    return r, val


def descend(space: BasisSpace, X: np.ndarray, masks: np.ndarray, tol: float = SOLVER_TOL,
            polish: bool | None = None):
    """Minimise ``||x - sum_A alpha_n e_n||`` row by row.

    ``X`` and ``masks`` have shape ``(rows, dim)``; ``masks[i]`` marks the
    free coordinates of row ``i``.  ``polish=None`` runs the second pass
    unless the space is a lattice.  Returns ``(values, residuals)`` with
    ``residuals[i] = x_i - sum alpha_n e_n`` at the final point.
    """
    X = np.asarray(X, dtype=np.float64)
    masks = np.asarray(masks, dtype=bool)
    if X.shape != masks.shape or X.ndim != 2:
        raise TgaError("X and masks must be 2-d arrays of the same shape")
    r = np.where(masks, 0.0, X)
    if len(r) == 0:
        return np.zeros(0), r
    val = space.batch_norm(r)
    dim = X.shape[1]
    r, val = _compass(space, X, masks, r, val, _compass_directions(dim), tol)
    if polish is None:
        polish = not space.lattice
    if polish:
        r, val = _compass(space, X, masks, r, val, _polish_directions(dim), tol)
    return val, r


def best_mterm_error(space: BasisSpace, x, m: int, tol: float = SOLVER_TOL,
                     polish: bool | None = None) -> BestMTermResult:
    """``sigma_m(x)``: least error over all size-``m`` supports and coefficients.

    Ties between supports keep the first in (cardinality, lexicographic) order.
    """
    x = as_coeffs(x, space.dim)
    if int(m) != m or not 0 <= m <= space.dim:
        raise TgaError(f"m must be an integer in [0, {space.dim}], got {m!r}")
    masks = subset_masks(space.dim, [int(m)])
    X = np.broadcast_to(x, masks.shape).copy()
    vals, res = descend(space, X, masks, tol, polish)
    i = int(np.argmin(vals))
    A = indices_of(masks[i])
    alpha = tuple(float(v) for v in (x - res[i])[masks[i]])
    return BestMTermResult(float(vals[i]), A, alpha, tol)
