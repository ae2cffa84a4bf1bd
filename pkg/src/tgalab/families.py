"""Deterministic finite test families.

A family is an ordered, duplicate-free stack of nonzero coefficient
vectors with a provenance tag per row.  The sign grid is the base family;
:func:`close_under_constructions` adds the auxiliary vectors that the
almost-greedy arguments build from family members, so inequalities that
are proved through those vectors can be checked pointwise.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapExceededError, ConfigError
from .space import BasisSpace, subset_masks


@dataclass(frozen=True)
class FamilyDescriptor:
    dim: int = 6
    levels: tuple = (0.0, 0.5, 1.0)
    include_signs: bool = True
    cap: int = 200_000

    def __post_init__(self):
        if isinstance(self.dim, bool) or not isinstance(self.dim, int) or self.dim < 1:
            raise ConfigError(f"family dim must be a positive integer, got {self.dim!r}", "family.dim")
        try:
            levels = tuple(sorted({float(v) for v in self.levels}))
        except (TypeError, ValueError):
            raise ConfigError("family levels must be numbers", "family.levels")
        if not levels or levels[0] != 0.0 or any(not math.isfinite(v) for v in levels):
            raise ConfigError("family levels must be finite, nonnegative and contain 0", "family.levels")
        if len(levels) < 2:
            raise ConfigError("family levels need a positive maximum", "family.levels")
        object.__setattr__(self, "levels", levels)
        if isinstance(self.cap, bool) or not isinstance(self.cap, int) or self.cap < 1:
            raise ConfigError("family cap must be a positive integer", "family.cap")

    @property
    def size(self) -> int:
        per_coord = 2 * len(self.levels) - 1 if self.include_signs else len(self.levels)
        return per_coord ** self.dim - 1

    def to_dict(self):
        return {"dim": self.dim, "levels": list(self.levels),
                "include_signs": self.include_signs, "cap": self.cap}

    @classmethod
    def from_dict(cls, d) -> "FamilyDescriptor":
        if not isinstance(d, dict):
            raise ConfigError("family descriptor must be a JSON object", "family")
        unknown = set(d) - {"dim", "levels", "include_signs", "cap"}
        if unknown:
            raise ConfigError(f"unknown family fields: {sorted(unknown)}", "family")
        return cls(**d)


def parse_family_arg(arg: str | None, dim: int) -> FamilyDescriptor:
    """``--family`` value: JSON path, ``key=value,...`` shorthand or None for defaults."""
    if arg is None:
        return FamilyDescriptor(dim=dim)
    path = Path(arg)
    if arg.endswith(".json") or path.is_file():
        try:
            return FamilyDescriptor.from_dict(json.loads(path.read_text()))
        except FileNotFoundError:
            raise ConfigError(f"family file not found: {arg}", "family")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"family file {arg} is not valid JSON: {exc}", "family")
    fields = {"dim": dim}
    for item in filter(None, arg.split(",")):
        key, _, raw = item.partition("=")
        key = key.strip()
        try:
            if key == "levels":
                fields[key] = [float(v) for v in raw.split(";") if v]
            elif key == "include_signs":
                fields[key] = raw.strip().lower() in ("1", "true", "yes")
            elif key in ("dim", "cap"):
                fields[key] = int(raw)
            else:
                raise ConfigError(f"unknown family field {key!r}", "family")
        except ValueError:
            raise ConfigError(f"bad value for family field {key!r}: {raw!r}", f"family.{key}")
    return FamilyDescriptor(**fields)


@dataclass
class Family:
    vectors: np.ndarray
    provenance: list = field(default_factory=list)
    descriptor: FamilyDescriptor | None = None
    closed: bool = False

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ConfigError("family vectors must form a 2-d array", "family")
        if not self.provenance:
            self.provenance = ["given"] * len(self.vectors)

    def __len__(self):
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def scaled(self, c: float) -> "Family":
        return Family(self.vectors * c, list(self.provenance), self.descriptor, self.closed)

    def describe(self) -> dict:
        out = {"size": len(self), "closed": self.closed}
        if self.descriptor is not None:
            out.update(self.descriptor.to_dict())
        else:
            out["dim"] = self.dim
        return out


def _coordinate_values(desc: FamilyDescriptor):
    vals = [0.0]
    for lv in desc.levels[1:]:
        vals.append(lv)
        if desc.include_signs:
            vals.append(-lv)
    return vals


def sign_grid_family(desc: FamilyDescriptor) -> Family:
    """All nonzero vectors whose coordinates have moduli in ``desc.levels``.

    Order is lexicographic over the per-coordinate value sequence
    ``0, +l_1, -l_1, +l_2, -l_2, ...``.
    """
    if desc.size > desc.cap:
        raise CapExceededError(
            f"sign grid has {desc.size} vectors > cap {desc.cap}; use a smaller dim or fewer levels")
    vals = np.array(_coordinate_values(desc))
    idx = np.array(list(itertools.product(range(len(vals)), repeat=desc.dim)), dtype=np.intp)
    vecs = vals[idx][1:]  # drop the all-zero first row
    return Family(vecs, ["grid"] * len(vecs), desc)


def normalized_projections(vectors: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Distinct vectors ``P_C(x) / tau`` supported on the mask ``keep``.

    ``tau`` runs over the nonzero moduli of ``x`` that dominate
    ``max |P_C(x)|``.  These are the rescaled remainders ``z`` (with
    ``max |z| <= 1``) that appear when the largest coefficients of a family
    vector are moved.  The zero vector is always included first.
    """
    X = np.abs(vectors)
    P = np.where(keep, vectors, 0.0)
    pmax = np.max(np.abs(P), axis=1)
    rows = [np.zeros((1, vectors.shape[1]))]
    for levels in np.unique(X):
        if levels == 0:
            continue
        sel = np.any(X == levels, axis=1) & (pmax <= levels) & (pmax > 0)
        if sel.any():
            rows.append(P[sel] / levels)
    Z = np.unique(np.vstack(rows), axis=0)
    # put the zero vector first, rest in lexicographic order
    zero = ~np.any(Z != 0, axis=1)
    return np.vstack([Z[zero], Z[~zero]])


def disjoint_instances(dim: int):
    """Yield ``(k, A_mask, B_mask)`` for disjoint A, B with |A| = |B| = k >= 1."""
    for k in range(1, dim // 2 + 1):
        for A in itertools.combinations(range(dim), k):
            rest = [i for i in range(dim) if i not in A]
            for B in itertools.combinations(rest, k):
                a = np.zeros(dim, dtype=bool)
                b = np.zeros(dim, dtype=bool)
                a[list(A)] = True
                b[list(B)] = True
                yield k, a, b


def all_instances(dim: int):
    """Yield ``(k, A_mask, B_mask)`` for all A, B with |A| = |B| = k >= 1."""
    for k in range(1, dim + 1):
        combos = list(itertools.combinations(range(dim), k))
        for A in combos:
            for B in combos:
                a = np.zeros(dim, dtype=bool)
                b = np.zeros(dim, dtype=bool)
                a[list(A)] = True
                b[list(B)] = True
                yield k, a, b


def sign_patterns(k: int) -> np.ndarray:
    return np.array(list(itertools.product((1.0, -1.0), repeat=k))).reshape(2 ** k, k)


def _permutation_vectors(vectors: np.ndarray):
    """x, y and u = z + t sum_A eps + t sum_B theta for every disjoint
    greedy-permutation instance built from the family (t = 1)."""
    dim = vectors.shape[1]
    out = []
    for k, a, b in disjoint_instances(dim):
        keep = ~(a | b)
        Z = normalized_projections(vectors, keep)
        S = sign_patterns(k)
        ia, ib = np.flatnonzero(a), np.flatnonzero(b)
        for eps in S:
            for theta in S:
                x = Z.copy()
                x[:, ia] = eps
                y = Z.copy()
                y[:, ib] = theta
                u = x.copy()
                u[:, ib] = theta
                out.extend([x, y, u])
    return out


def _greedy_masks(vectors, masks):
    """valid[i, s]: subset s is a greedy support of vector i."""
    A = np.abs(vectors)[:, None, :]
    big = np.where(masks[None], A, np.inf).min(axis=2)
    small = np.where(masks[None], -np.inf, A).max(axis=2)
    return big >= small


def _intermediate_vectors(vectors):
    """x - P_{A u B}(x) + sum_{B \\ A} t sign(a_n) e_n with B the natural
    m-term greedy support, t its smallest modulus and |A| = m."""
    dim = vectors.shape[1]
    out = []
    order = np.argsort(-np.abs(vectors), axis=1, kind="stable")
    absx = np.abs(vectors)
    for m in range(1, dim + 1):
        B = np.zeros_like(vectors, dtype=bool)
        np.put_along_axis(B, order[:, :m], True, axis=1)
        t = np.take_along_axis(absx, order[:, m - 1:m], axis=1)
        for A in subset_masks(dim, [m]):
            w = np.where(A | B, 0.0, vectors)
            only_b = B & ~A
            w = np.where(only_b, t * np.sign(vectors), w)
            out.append(w)
    return out


def _projections(vectors):
    dim = vectors.shape[1]
    return [np.where(S, vectors, 0.0) for S in subset_masks(dim)[1:-1]]


def _dedup_new(existing: np.ndarray, candidates: list[np.ndarray]) -> np.ndarray:
    if not candidates:
        return np.zeros((0, existing.shape[1]))
    C = np.unique(np.vstack(candidates), axis=0)
    C = C[np.any(C != 0, axis=1)]
    if C.size == 0:
        return C
    seen = {row.tobytes() for row in np.ascontiguousarray(existing + 0.0)}
    fresh = [row for row in np.ascontiguousarray(C + 0.0) if row.tobytes() not in seen]
    return np.array(fresh).reshape(-1, existing.shape[1])


def close_under_constructions(family: Family, space: BasisSpace | None = None,
                              cap: int | None = None) -> Family:
    """Smallest superset closed under the proof constructions.

    Added at each round, until nothing new appears:

    * coordinate projections ``P_S(x)``;
    * for every disjoint greedy permutation built from a family vector
      (rescaled remainder ``z``, ``t = 1``) the pair ``x, y`` and the merged
      vector ``u = z + t sum_A eps e_n + t sum_B theta e_n``;
    * the intermediate ``x - P_{A u B}(x) + sum_{B \\ A} t sign(a_n) e_n``
      for every ``m`` and ``|A| = m``.

    New rows are appended in lexicographic order, tagged by construction.
    The norm plays no role, ``space`` only fixes the dimension check.
    """
    if len(family) == 0:
        raise ConfigError("cannot close an empty family", "family")
    if space is not None and space.dim != family.dim:
        raise ConfigError("family and space dimensions differ", "family.dim")
    if cap is None:
        cap = family.descriptor.cap if family.descriptor is not None else 200_000
    vecs = family.vectors + 0.0  # normalise -0.0
    prov = list(family.provenance)
    frontier = vecs
    while True:
        batches = [
            ("projection", _dedup_new(vecs, _projections(frontier))),
            ("greedy-permutation", _dedup_new(vecs, _permutation_vectors(vecs))),
            ("almost-greedy-intermediate", _dedup_new(vecs, _intermediate_vectors(frontier))),
        ]
        added = []
        for tag, rows in batches:
            if len(rows):
                rows = _dedup_new(np.vstack([vecs] + added) if added else vecs, [rows])
                if len(rows):
                    added.append(rows)
                    prov.extend([tag] * len(rows))
        if not added:
            break
        new = np.vstack(added)
        if len(vecs) + len(new) > cap:
            raise CapExceededError(
                f"closure grew past cap {cap}; use a smaller dim or fewer levels")
        vecs = np.vstack([vecs, new])
        frontier = new
    return Family(vecs, prov, family.descriptor, closed=True)
