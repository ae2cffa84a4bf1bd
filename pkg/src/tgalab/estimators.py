"""Witnessed family estimates of the greedy-type constants.

Every constant is a supremum of a ratio of norms.  Over a finite family
the supremum becomes a maximum, computed by exhaustive enumeration and
returned with the configuration that attains it.

Most constants only need ``R[x, S] = ||x - P_S(x)||`` for every family
vector ``x`` and every subset ``S``; that table is computed once, in
chunks of family rows.  Subsets are indexed in (cardinality,
lexicographic) order, so a first-occurrence argmax over an array laid out
as ``[x, E, A]`` breaks ties by family index, then ``m``, then the sets.
Chunks have a fixed size and are reduced in order, so the result does not
depend on the number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .catalog import CONSTANT_NAMES
from .errors import ConfigError, TgaError
from .families import (Family, all_instances, disjoint_instances,
                       normalized_projections, sign_patterns)
from .greedy import GreedyPermInstance, is_greedy_support, realize_greedy_permutation
from .mterm import SOLVER_TOL, descend
from .space import BasisSpace, as_coeffs, index_set, indices_of, mask_of, subset_masks

GUARD = 1e-12
CHUNK = 1024
FAMILY_LOWER_BOUND = "family_lower_bound"
ANALYTIC_EXACT = "analytic_exact"


@dataclass
class ConstantEstimate:
    name: str
    value: float
    witness: dict | None
    family: dict | None = None
    bound_kind: str = FAMILY_LOWER_BOUND
    exact_value: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "value": self.value,
            "bound_kind": self.bound_kind,
            "exact_value": self.exact_value,
            "family": self.family,
            "witness": self.witness,
            "extra": self.extra,
        }


def default_workers() -> int:
    return os.cpu_count() or 1


def map_chunks(fn, n: int, workers: int = 1, chunk: int = CHUNK) -> list:
    """``[fn(lo, hi) for each fixed-size chunk]``, in chunk order."""
    bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    if workers <= 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def guarded_ratio(num, den):
    """``num / den``; a vanishing denominator gives 1 when the numerator
    also vanishes and ``-inf`` (never the maximum) otherwise."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    small = den < GUARD
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / np.where(small, 1.0, den)
    return np.where(small, np.where(num < GUARD, 1.0, -np.inf), r)


def _first_max(parts):
    """Reduce ``[(value, payload), ...]`` keeping the first strict maximum."""
    best, payload = -np.inf, None
    for value, p in parts:
        if value > best:
            best, payload = value, p
    return best, payload


def _vectors(family) -> np.ndarray:
    X = family.vectors if isinstance(family, Family) else np.asarray(family, dtype=np.float64)
    X = as_coeffs(X, batch=True)
    if X.ndim != 2 or len(X) == 0:
        raise ConfigError("family must be a non-empty stack of vectors", "family")
    if not np.all(np.any(X != 0, axis=1)):
        raise ConfigError("family vectors must be nonzero", "family")
    return X


def _describe(family):
    if family is None:
        return None
    return family.describe() if isinstance(family, Family) else {"size": len(family)}


def _vec(v):
    return [float(c) for c in v]


def _finish(space, name, value, witness, family, extra=None):
    exact = None
    kind = FAMILY_LOWER_BOUND
    if space.exact_constants and name in space.exact_constants:
        exact = float(space.exact_constants[name])
        kind = ANALYTIC_EXACT
    if witness is not None:
        witness = {"constant": name, **witness}
    return ConstantEstimate(name, float(value), witness, _describe(family), kind, exact, extra or {})


@dataclass
class SubsetTables:
    """Per-family tables indexed by ``[x, S]`` with S in subset order."""

    X: np.ndarray
    masks: np.ndarray
    sizes: np.ndarray
    norms: np.ndarray
    R: np.ndarray          # ||x - P_S x||
    P: np.ndarray          # ||P_S x||
    greedy: np.ndarray     # S is a greedy support of x
    room: np.ndarray       # zeros of x outside S


def subset_tables(space: BasisSpace, family, workers: int = 1) -> SubsetTables:
    X = _vectors(family)
    if X.shape[1] != space.dim:
        raise ConfigError("family and space dimensions differ", "family.dim")
    masks = subset_masks(space.dim)
    comp = masks[::-1]  # reversed subset order lists complements

    def job(lo, hi):
        rows = X[lo:hi, None, :]
        R = space.batch_norm(np.where(masks[None], 0.0, rows))
        P = space.batch_norm(np.where(masks[None], rows, 0.0))
        a = np.abs(X[lo:hi])[:, None, :]
        big = np.where(masks[None], a, np.inf).min(axis=2)
        small = np.where(masks[None], -np.inf, a).max(axis=2)
        room = ((a == 0) & ~masks[None]).sum(axis=2)
        return R, P, big >= small, room

    parts = map_chunks(job, len(X), workers)
    R, P, G, room = (np.concatenate([p[i] for p in parts]) for i in range(4))
    assert np.array_equal(comp, ~masks)
    return SubsetTables(X, masks, masks.sum(axis=1), space.batch_norm(X), R, P, G, room)


def _set(mask):
    return list(indices_of(mask))


def _tables(space, family, tables, workers):
    return tables if tables is not None else subset_tables(space, family, workers)


def suppression_unconditional_constant(space, family, workers=1, tables=None) -> ConstantEstimate:
    """``K_su``: max of ``||x - P_A x|| / ||x||`` over the family and all ``A``.

    The projection form ``max ||P_A x|| / ||x||`` is computed from separate
    oracle calls and must agree exactly (``A`` runs over all complements).
    """
    T = _tables(space, family, tables, workers)
    supp = T.R / T.norms[:, None]
    proj = T.P / T.norms[:, None]
    i, s = np.unravel_index(int(np.argmax(supp)), supp.shape)
    value = float(supp[i, s])
    proj_value = float(proj.max())
    if value != proj_value:
        raise TgaError(f"suppression and projection forms disagree: {value!r} vs {proj_value!r}")
    witness = {"x_index": int(i), "x": _vec(T.X[i]), "A": _set(T.masks[s])}
    return _finish(space, "K_su", value, witness, family,
                   {"projection_form": proj_value, "forms_equal": True,
                    "instances": int(supp.size)})


def quasi_greedy_constants(space, family, workers=1, tables=None):
    """``(C_w, C_l, C_qg)`` over every ``m`` and every greedy support.

    ``m`` runs over ``0..dim``; the ``m = 0`` term (``G_0 = 0``) pins both
    constants at least to 1.
    """
    T = _tables(space, family, tables, workers)
    kept = np.where(T.greedy, T.P, -np.inf) / T.norms[:, None]
    left = np.where(T.greedy, T.R, -np.inf) / T.norms[:, None]
    out = []
    for name, table, form in (("C_w", kept, "kept"), ("C_l", left, "left")):
        i, s = np.unravel_index(int(np.argmax(table)), table.shape)
        witness = {"x_index": int(i), "x": _vec(T.X[i]), "m": int(T.sizes[s]),
                   "E": _set(T.masks[s]), "form": form}
        out.append(_finish(space, name, table[i, s], witness, family,
                           {"instances": int(T.greedy.sum())}))
    cw, cl = out
    # ties go to C_w, which comes first in the constant list
    src = cw if cw.value >= cl.value else cl
    wit = {k: v for k, v in src.witness.items() if k != "constant"}
    qg = _finish(space, "C_qg", max(cw.value, cl.value), wit, family, {"from": src.name})
    return cw, cl, qg


def _pair_argmax(num, den, valid):
    """First argmax of ``num[:, E] / den[:, A]`` over valid ``[x, E, A]``.

    Works one family chunk at a time and returns ``(value, (x, E, A))``.
    """
    r = guarded_ratio(num[:, :, None], den[:, None, :])
    r = np.where(valid, r, -np.inf)
    k = int(np.argmax(r))
    return float(r.flat[k]), np.unravel_index(k, r.shape)


def almost_greedy_constant(space, family, workers=1, tables=None) -> ConstantEstimate:
    """``C_ag``: max of ``||x - P_E x|| / ||x - P_A x||`` with ``E`` any
    greedy support of size ``m`` and ``|A| = m``.

    Two further maxima are reported in ``extra``: one over ``|A| <= m``, and
    one over the ``|A| < m`` sets that leave at least ``m - |A|`` zero
    coordinates of ``x`` outside ``A``.  The latter always equals the main
    value: such an ``A`` extends to a size-``m`` set with the same
    projection.  Without that room the ``|A| <= m`` maximum can be larger
    for norms that are not lattice norms.
    """
    T = _tables(space, family, tables, workers)
    eq = T.sizes[:, None] == T.sizes[None, :]
    le = T.sizes[:, None] >= T.sizes[None, :]
    need = T.sizes[:, None] - T.sizes[None, :]
    nonempty = T.sizes > 0

    def job(lo, hi):
        R = T.R[lo:hi]
        G = T.greedy[lo:hi] & nonempty[None]
        base = G[:, :, None]
        room = T.room[lo:hi][:, None, :] >= need[None]
        res = []
        for rel in (eq[None], le[None], le[None] & room):
            v, (i, e, a) = _pair_argmax(R, R, base & rel)
            res.append((v, (lo + i, e, a)))
        return res

    parts = map_chunks(job, len(T.X), workers, chunk=256)
    results = [_first_max(p[j] for p in parts) for j in range(3)]
    (value, (i, e, a)), (le_value, le_at), (room_value, _) = results
    if room_value != value:
        raise TgaError(f"room-restricted |A| <= m maximum {room_value!r} differs from {value!r}")
    witness = {"x_index": int(i), "x": _vec(T.X[i]), "m": int(T.sizes[e]),
               "E": _set(T.masks[e]), "A": _set(T.masks[a])}
    li, le_e, le_a = le_at
    extra = {
        "value_at_most_m": le_value,
        "value_at_most_m_with_room": room_value,
        "at_most_m_equal": le_value == value,
        "at_most_m_witness": {"x_index": int(li), "x": _vec(T.X[li]), "m": int(T.sizes[le_e]),
                              "E": _set(T.masks[le_e]), "A": _set(T.masks[le_a])},
    }
    return _finish(space, "C_ag", value, witness, family, extra)


def best_mterm_tables(space, family, workers=1, tol=SOLVER_TOL, polish=None, tables=None):
    """``V[x, A]``: descent value of ``min_alpha ||x - sum_A alpha_n e_n||``.

    Returns ``(V, job)`` where ``job(i, s)`` re-runs the descent for one
    entry and gives its residual.
    """
    T = _tables(space, family, tables, workers)
    nS = len(T.masks)

    def job(lo, hi):
        n = hi - lo
        X = np.repeat(T.X[lo:hi], nS, axis=0)
        M = np.tile(T.masks, (n, 1))
        vals, _ = descend(space, X, M, tol, polish)
        return vals.reshape(n, nS)

    V = np.concatenate(map_chunks(job, len(T.X), workers))

    def residual(i, s):
        vals, res = descend(space, T.X[i:i + 1], T.masks[s:s + 1], tol, polish)
        return float(vals[0]), res[0]

    return V, residual


def greedy_constant(space, family, workers=1, tol=SOLVER_TOL, polish=None, tables=None,
                    mterm=None) -> ConstantEstimate:
    """``C_g``: max of ``||x - P_E x|| / sigma_m(x)`` over greedy supports ``E``.

    ``sigma_m`` comes from the descent solver, whose values are upper
    bounds on the true infimum; the estimate is therefore a lower bound on
    the family value up to ``solver_tol``.
    """
    T = _tables(space, family, tables, workers)
    V, residual = mterm if mterm is not None else best_mterm_tables(space, family, workers, tol,
                                                                    polish, T)
    eq = T.sizes[:, None] == T.sizes[None, :]
    nonempty = T.sizes > 0

    def job(lo, hi):
        G = T.greedy[lo:hi] & nonempty[None]
        v, (i, e, a) = _pair_argmax(T.R[lo:hi], V[lo:hi], G[:, :, None] & eq[None])
        return v, (lo + i, e, a)

    value, (i, e, a) = _first_max(map_chunks(job, len(T.X), workers, chunk=256))
    val, res = residual(i, a)
    x = T.X[i]
    alpha = (x - res)[T.masks[a]]
    witness = {"x_index": int(i), "x": _vec(x), "m": int(T.sizes[e]), "E": _set(T.masks[e]),
               "A": _set(T.masks[a]), "alpha": _vec(alpha), "sigma": val}
    return _finish(space, "C_g", value, witness, family, {"solver_tol": tol})


def _indicator_block(dim, k, signed):
    masks = subset_masks(dim, [k])
    S = sign_patterns(k) if signed else np.ones((1, k))
    vecs = np.zeros((len(masks), len(S), dim))
    for j, m in enumerate(masks):
        vecs[j][:, m] = S
    return masks, S, vecs


def democracy_constants(space, cardinalities=None):
    """``(Delta, Gamma)`` over ``|A| = |B| = k`` for ``k`` in ``cardinalities``.

    ``Delta`` compares ``||1_A||`` with ``||1_B||``; ``Gamma`` allows every
    sign pattern on both sets.  Ties go to the smallest ``(k, A, B, signs)``.
    """
    ks = range(1, space.dim + 1) if cardinalities is None else cardinalities
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1 or ks[-1] > space.dim:
        raise ConfigError(f"cardinalities must lie in [1, {space.dim}]", "cardinalities")
    out = []
    for name, signed in (("Delta", False), ("Gamma", True)):
        best, wit, count = -np.inf, None, 0
        for k in ks:
            masks, S, vecs = _indicator_block(space.dim, k, signed)
            n = space.batch_norm(vecs)          # [A, eps]
            r = n[:, None, :, None] / n[None, :, None, :]   # [A, B, eps, theta]
            count += r.size
            j = int(np.argmax(r))
            if r.flat[j] > best:
                a, b, e, t = np.unravel_index(j, r.shape)
                best = float(r.flat[j])
                wit = {"k": k, "A": _set(masks[a]), "B": _set(masks[b]),
                       "eps": _vec(S[e]), "theta": _vec(S[t])}
        est = _finish(space, name, best, wit, None, {"instances": count})
        est.family = {"cardinalities": ks}
        out.append(est)
    return tuple(out)


class _ProjectionCache:
    def __init__(self, X):
        self.X = X
        self.cache = {}

    def __call__(self, keep):
        key = keep.tobytes()
        if key not in self.cache:
            self.cache[key] = normalized_projections(self.X, keep)
        return self.cache[key]


def symmetry_blocks(dim, disjoint):
    gen = disjoint_instances(dim) if disjoint else all_instances(dim)
    return list(gen)


def symmetry_largest_constant(space, family, disjoint: bool = True, workers=1,
                              remainders=None) -> ConstantEstimate:
    """Largest ``||y|| / ||x||`` over greedy permutations built from the family.

    ``x = z + sum_A eps_n e_n`` and ``y = z + sum_B theta_n e_n`` (``t = 1``
    by homogeneity), with ``z`` running over the rescaled remainders
    ``P_C(v) / tau`` of family vectors ``v`` (``C`` the complement of
    ``A u B``, ``tau`` a modulus of ``v`` dominating ``P_C(v)``).  With
    ``disjoint=False`` the sets may overlap.  Ties go to the first
    instance in ``(k, A, B, eps, theta, z)`` order.
    """
    X = _vectors(family)
    if X.shape[1] != space.dim:
        raise ConfigError("family and space dimensions differ", "family.dim")
    Zof = remainders or _ProjectionCache(X)
    blocks = symmetry_blocks(space.dim, disjoint)
    # build the remainder sets up front so the cache is not shared across threads
    Zs = [Zof(~(a | b)) for _, a, b in blocks]

    def job(lo, hi):
        res = []
        for j in range(lo, hi):
            k, a, b = blocks[j]
            Z = Zs[j]
            S = sign_patterns(k)
            xs = np.repeat(Z[None], len(S), axis=0)
            ys = xs.copy()
            xs[:, :, a] = S[:, None, :]
            ys[:, :, b] = S[:, None, :]
            nx = space.batch_norm(xs)        # [eps, z]
            ny = space.batch_norm(ys)        # [theta, z]
            r = ny[None, :, :] / nx[:, None, :]   # [eps, theta, z]
            f = int(np.argmax(r))
            e, t, zi = np.unravel_index(f, r.shape)
            res.append((float(r.flat[f]), (j, e, t, zi, r.size)))
        return res

    parts = [p for chunk in map_chunks(job, len(blocks), workers, chunk=8) for p in chunk]
    count = sum(p[1][4] for p in parts)
    name = "C_A_disjoint" if disjoint else "C_A_greedyperm"
    if not parts:
        return _finish(space, name, 1.0, None, family, {"instances": 0,
                       "note": "no instances at this dimension; value set to 1"})
    value, (j, e, t, zi, _) = _first_max(parts)
    k, a, b = blocks[j]
    S = sign_patterns(k)
    witness = {"z": _vec(Zs[j][zi] + 0.0), "t": 1.0, "A": _set(a), "B": _set(b),
               "eps": _vec(S[e]), "theta": _vec(S[t])}
    return _finish(space, name, value, witness, family, {"instances": count})


def evaluate_witness(space: BasisSpace, witness: dict) -> tuple[float, float, float]:
    """Recompute ``(lhs, rhs, ratio)`` for a witness dict from scratch."""
    name = witness.get("constant")
    if name not in CONSTANT_NAMES:
        raise TgaError(f"witness names unknown constant {name!r}")
    n = space.dim
    if name in ("Delta", "Gamma"):
        A, B = index_set(witness["A"], n), index_set(witness["B"], n)
        if len(A) != len(B) or len(A) != witness["k"]:
            raise TgaError("witness sets must both have k elements")
        u, v = np.zeros(n), np.zeros(n)
        u[[i - 1 for i in A]] = witness["eps"]
        v[[i - 1 for i in B]] = witness["theta"]
        if name == "Delta" and (np.any(u[u != 0] != 1) or np.any(v[v != 0] != 1)):
            raise TgaError("Delta witnesses use all-plus signs")
        lhs, rhs = space.norm(u), space.norm(v)
        return lhs, rhs, lhs / rhs
    if name in ("C_A_disjoint", "C_A_greedyperm"):
        inst = GreedyPermInstance(tuple(witness["z"]), float(witness["t"]),
                                  index_set(witness["A"], n), index_set(witness["B"], n),
                                  tuple(int(s) for s in witness["eps"]),
                                  tuple(int(s) for s in witness["theta"]))
        if name == "C_A_disjoint" and not inst.disjoint:
            raise TgaError("C_A_disjoint witness has overlapping sets")
        x, y = realize_greedy_permutation(inst)
        lhs, rhs = space.norm(y), space.norm(x)
        return lhs, rhs, lhs / rhs
    x = as_coeffs(witness["x"], n)
    if name == "K_su":
        lhs = space.norm(np.where(mask_of(witness["A"], n), 0.0, x))
        rhs = space.norm(x)
        return lhs, rhs, lhs / rhs
    E = index_set(witness["E"], n)
    if len(E) != witness["m"] or not is_greedy_support(x, E):
        raise TgaError(f"E = {E} is not a greedy support of size m")
    mE = mask_of(E, n)
    if name in ("C_w", "C_l", "C_qg"):
        kept = witness.get("form", "kept" if name == "C_w" else "left") == "kept"
        lhs = space.norm(np.where(mE, x, 0.0) if kept else np.where(mE, 0.0, x))
        rhs = space.norm(x)
        return lhs, rhs, lhs / rhs
    lhs = space.norm(np.where(mE, 0.0, x))
    A = index_set(witness["A"], n)
    if len(A) != witness["m"]:
        raise TgaError("witness set A must have m elements")
    mA = mask_of(A, n)
    if name == "C_ag":
        rhs = space.norm(np.where(mA, 0.0, x))
    else:
        approx = np.zeros(n)
        approx[mA] = witness["alpha"]
        rhs = space.norm(x - approx)
    return lhs, rhs, float(guarded_ratio(lhs, rhs))


@dataclass
class EstimateRun:
    estimates: dict
    tables: SubsetTables | None = None
    mterm: tuple | None = None


def estimate_constants(space, family, names=None, workers=1, cardinalities=None,
                       tol=SOLVER_TOL) -> EstimateRun:
    """Compute the requested constants, sharing tables between them."""
    names = list(CONSTANT_NAMES) if names is None else list(names)
    unknown = [n for n in names if n not in CONSTANT_NAMES]
    if unknown:
        raise ConfigError(f"unknown constants: {unknown}; known: {list(CONSTANT_NAMES)}",
                          "constants")
    want = set(names)
    out = {}
    tables = None
    mterm = None
    if want & {"K_su", "C_w", "C_l", "C_qg", "C_ag", "C_g"}:
        tables = subset_tables(space, family, workers)
    if "K_su" in want:
        out["K_su"] = suppression_unconditional_constant(space, family, workers, tables)
    if want & {"C_w", "C_l", "C_qg"}:
        cw, cl, qg = quasi_greedy_constants(space, family, workers, tables)
        out.update(C_w=cw, C_l=cl, C_qg=qg)
    if "C_ag" in want:
        out["C_ag"] = almost_greedy_constant(space, family, workers, tables)
    if "C_g" in want:
        mterm = best_mterm_tables(space, family, workers, tol, None, tables)
        out["C_g"] = greedy_constant(space, family, workers, tol, None, tables, mterm)
    if want & {"Delta", "Gamma"}:
        d, g = democracy_constants(space, cardinalities)
        out.update(Delta=d, Gamma=g)
    if want & {"C_A_disjoint", "C_A_greedyperm"}:
        X = _vectors(family)
        cache = _ProjectionCache(X)
        if "C_A_disjoint" in want:
            out["C_A_disjoint"] = symmetry_largest_constant(space, family, True, workers, cache)
        if "C_A_greedyperm" in want:
            out["C_A_greedyperm"] = symmetry_largest_constant(space, family, False, workers, cache)
    ordered = {n: out[n] for n in CONSTANT_NAMES if n in want}
    return EstimateRun(ordered, tables, mterm)
