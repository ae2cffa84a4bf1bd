"""Pointwise inequality suites for the almost-greedy characterization.

Each check walks an exhaustive instance enumeration over a family and
asserts one inequality per instance, with the constants replaced by their
family estimates.  On a family closed under
:func:`tgalab.families.close_under_constructions` every auxiliary vector a
proof step needs is itself a family member, so each step holds pointwise
with the family constant.  A pass certifies the inequalities on the
family only.

Violations carry their vectors as ``[coefficient, vector]`` terms:
``lhs = sum c * ||v||`` over ``lhs_terms`` and likewise for ``rhs``, so
:func:`rerun_violation` can recompute them with nothing but the space.

Two arguments need spare zero coordinates that a finite dimension may
not provide: extending ``|A| < m`` to a size-``m`` set with the same
projection, and choosing the set ``D`` in the convex-hull step of the
largest-coefficient reformulation.  For lattice norms the inequalities
hold regardless (dropping coordinates never increases the norm), so all
instances are checked.  For other norms the instances without room are
counted under ``skipped:*`` and not asserted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TgaError
from .estimators import (ConstantEstimate, _ProjectionCache, _vectors, almost_greedy_constant,
                         best_mterm_tables, democracy_constants, evaluate_witness, greedy_constant,
                         quasi_greedy_constants, subset_tables,
                         suppression_unconditional_constant, symmetry_largest_constant)
from .families import Family, disjoint_instances, sign_patterns
from .greedy import (decompose_monotone_multiplier, hypercube_vertex_decomposition,
                     is_strictly_greedy, natural_greedy_ordering, perturb_to_strict,
                     tie_class_orderings)
from .space import BasisSpace, indices_of, subset_masks

CHECK_NAMES = (
    "extended_almost_greedy",
    "monotone_multiplier",
    "multiplier_windows",
    "symmetry_reformulation",
    "almost_greedy_characterization",
    "property_a",
    "isometric_corollaries",
)
DEFAULT_TOL = 1e-9
MAX_REPORTED = 100
EXACT_TOL = 1e-15
TRIANGLE_TOL = 1e-12
MULTIPLIER_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
SCOPE = ("family scope: a pass certifies these inequalities on the listed family, "
         "not on the whole space")
_HIST_EDGES = (1e-12, 1e-9, 1e-6, 1e-3)
_HIST_LABELS = ("violated", "slack<1e-12", "slack<1e-9", "slack<1e-6", "slack<1e-3", "slack>=1e-3")


@dataclass
class CheckReport:
    check_name: str
    space_name: str
    family: dict | None
    instances_tested: int
    violations: list
    total_violations: int
    passed: bool
    tolerance: float
    constants: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    gap_histogram: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    scope: str = SCOPE

    def to_dict(self):
        return {
            "check_name": self.check_name,
            "space_name": self.space_name,
            "family": self.family,
            "passed": self.passed,
            "instances_tested": self.instances_tested,
            "total_violations": self.total_violations,
            "violations": self.violations,
            "tolerance": self.tolerance,
            "constants": self.constants,
            "counts": self.counts,
            "gap_histogram": self.gap_histogram,
            "notes": self.notes,
            "scope": self.scope,
        }


def _terms(*pairs):
    return [[float(c), [float(v) for v in vec]] for c, vec in pairs]


def _constant_terms(ctx, *pairs):
    """``[power, witness]`` factors: the side equals the product of
    ``ratio(witness) ** power``, an empty product being 1."""
    return [[int(p), ctx.estimate(name).witness] for p, name in pairs]


class Tally:
    """Accumulates instance counts, violations and the slack histogram."""

    def __init__(self, tol):
        self.tol = tol
        self.instances = 0
        self.total = 0
        self.violations = []
        self.counts = {}
        self.hist = np.zeros(len(_HIST_LABELS), dtype=np.int64)

    def _count(self, clause, n):
        self.counts[clause] = self.counts.get(clause, 0) + int(n)

    def check(self, clause, lhs, rhs, describe, tol=None):
        """Assert ``lhs <= rhs + tol`` elementwise; ``describe(k)`` builds
        the instance record for the k-th flattened entry."""
        tol = self.tol if tol is None else tol
        lhs, rhs = np.broadcast_arrays(np.asarray(lhs, dtype=np.float64),
                                       np.asarray(rhs, dtype=np.float64))
        gap = (lhs - rhs).ravel()
        if gap.size == 0:
            return
        self.instances += gap.size
        self._count(clause, gap.size)
        bad = gap > tol
        slack = -gap[~bad]
        self.hist[0] += int(bad.sum())
        self.hist[1:] += np.bincount(np.searchsorted(_HIST_EDGES, slack, side="right"),
                                     minlength=len(_HIST_EDGES) + 1)
        for k in np.flatnonzero(bad):
            self.total += 1
            if len(self.violations) < MAX_REPORTED:
                rec = {"clause": clause, "lhs": float(lhs.flat[k]), "rhs": float(rhs.flat[k]),
                       "gap": float(gap[k])}
                rec.update(describe(int(k)))
                self.violations.append(rec)

    def assert_all(self, clause, ok, describe):
        """Assert a boolean array; failures are violations without lhs/rhs."""
        ok = np.asarray(ok, dtype=bool).ravel()
        if ok.size == 0:
            return
        self.instances += ok.size
        self._count(clause, ok.size)
        for k in np.flatnonzero(~ok):
            self.total += 1
            if len(self.violations) < MAX_REPORTED:
                rec = {"clause": clause, "lhs": None, "rhs": None, "gap": None}
                rec.update(describe(int(k)))
                self.violations.append(rec)

    def skip(self, clause, n):
        if n:
            self._count("skipped:" + clause, n)

    def report(self, name, ctx, constants, notes=()):
        notes = list(notes)
        if not ctx.closed:
            notes.append("family is not closed under the proof constructions; "
                         "pointwise soundness of the chains is not guaranteed")
        return CheckReport(
            check_name=name,
            space_name=ctx.space.name,
            family=ctx.family_info,
            instances_tested=self.instances,
            violations=self.violations,
            total_violations=self.total,
            passed=self.total == 0,
            tolerance=self.tol,
            constants={k: float(v) for k, v in constants.items()},
            counts=dict(sorted(self.counts.items())),
            gap_histogram={lab: int(c) for lab, c in zip(_HIST_LABELS, self.hist)},
            notes=notes,
        )


class HarnessContext:
    """A space, a family and lazily computed tables and estimates."""

    def __init__(self, space: BasisSpace, family, workers: int = 1, tol: float = DEFAULT_TOL,
                 estimates: dict | None = None, cardinalities=None):
        self.space = space
        self.family = family
        self.X = _vectors(family)
        if self.X.shape[1] != space.dim:
            raise ConfigError("family and space dimensions differ", "family.dim")
        self.closed = isinstance(family, Family) and family.closed
        self.family_info = family.describe() if isinstance(family, Family) else {"size": len(self.X)}
        self.workers = workers
        self.tol = tol
        self.cardinalities = cardinalities
        self.estimates = dict(estimates or {})
        self._tables = None
        self._mterm = None
        self._remainders = None

    @classmethod
    def from_run(cls, space, family, run, workers=1, tol=DEFAULT_TOL, cardinalities=None):
        """Reuse the estimates and tables of an :class:`EstimateRun`."""
        ctx = cls(space, family, workers, tol, run.estimates, cardinalities)
        ctx._tables, ctx._mterm = run.tables, run.mterm
        return ctx

    def tables(self):
        if self._tables is None:
            self._tables = subset_tables(self.space, self.family, self.workers)
        return self._tables

    def mterm(self):
        if self._mterm is None:
            self._mterm = best_mterm_tables(self.space, self.family, self.workers,
                                            tables=self.tables())
        return self._mterm

    def remainders(self):
        if self._remainders is None:
            self._remainders = _ProjectionCache(self.X)
        return self._remainders

    def estimate(self, name) -> ConstantEstimate:
        if name in self.estimates:
            return self.estimates[name]
        s, f, w = self.space, self.family, self.workers
        if name == "K_su":
            est = suppression_unconditional_constant(s, f, w, self.tables())
        elif name in ("C_w", "C_l", "C_qg"):
            cw, cl, qg = quasi_greedy_constants(s, f, w, self.tables())
            self.estimates.update(C_w=cw, C_l=cl, C_qg=qg)
            return self.estimates[name]
        elif name == "C_ag":
            est = almost_greedy_constant(s, f, w, self.tables())
        elif name == "C_g":
            est = greedy_constant(s, f, w, tables=self.tables(), mterm=self.mterm())
        elif name in ("Delta", "Gamma"):
            d, g = democracy_constants(s, self.cardinalities)
            self.estimates.update(Delta=d, Gamma=g)
            return self.estimates[name]
        elif name in ("C_A_disjoint", "C_A_greedyperm"):
            est = symmetry_largest_constant(s, f, name == "C_A_disjoint", w, self.remainders())
        else:
            raise ConfigError(f"unknown constant {name!r}", "constants")
        self.estimates[name] = est
        return est

    def value(self, name) -> float:
        return self.estimate(name).value

    def admissible(self, room, need):
        """Instances the finite-room arguments cover (all of them for lattices)."""
        if self.space.lattice:
            return np.ones(np.broadcast(room, need).shape, dtype=bool)
        return room >= need


def _subset_index(masks):
    return {m.tobytes(): i for i, m in enumerate(masks)}


# ---------------------------------------------------------------------------
# extended almost-greedy bound with |A| <= m and the perturbation route


def _tied_pairs(T):
    """(x, E) pairs with E a greedy support whose threshold modulus is
    positive and shared with a coordinate outside E."""
    a = np.abs(T.X)[:, None, :]
    m = T.masks[None]
    big = np.where(m, a, np.inf).min(axis=2)
    small = np.where(m, -np.inf, a).max(axis=2)
    tied = T.greedy & (T.sizes[None] >= 1) & (T.sizes[None] < T.X.shape[1]) \
        & (big == small) & (big > 0)
    return np.argwhere(tied)


def check_extended_almost_greedy(ctx: HarnessContext, deltas=(1e-2, 1e-4)) -> CheckReport:
    """``||x - P_E x|| <= C_ag ||x - P_A x||`` for every greedy support ``E``
    of size ``m`` and every ``|A| <= m``, plus the perturbation route for
    supports cut through a tie."""
    space, T = ctx.space, ctx.tables()
    C = ctx.value("C_ag")
    tally = Tally(ctx.tol)
    sizes = T.sizes
    rel = (sizes[:, None] >= sizes[None, :]) & (sizes[:, None] >= 1)
    need = sizes[:, None] - sizes[None, :]
    for lo in range(0, len(T.X), 256):
        hi = min(lo + 256, len(T.X))
        G = T.greedy[lo:hi][:, :, None] & rel[None]
        adm = ctx.admissible(T.room[lo:hi][:, None, :], need[None])
        tally.skip("main", int((G & ~adm).sum()))
        i, e, a = np.nonzero(G & adm)
        i = i + lo
        tally._count("main:A_empty", int((sizes[a] == 0).sum()))
        tally.check(
            "main", T.R[i, e], C * T.R[i, a],
            lambda k, i=i, e=e, a=a: {
                "x": T.X[i[k]].tolist(), "m": int(sizes[e[k]]),
                "E": list(indices_of(T.masks[e[k]])), "A": list(indices_of(T.masks[a[k]])),
                "lhs_terms": _terms((1, np.where(T.masks[e[k]], 0, T.X[i[k]]))),
                "rhs_terms": _terms((C, np.where(T.masks[a[k]], 0, T.X[i[k]])))})

    excess = 0.0
    for i, e in _tied_pairs(T):
        x, E = T.X[i], T.masks[e]
        m = int(sizes[e])
        Eset = indices_of(E)
        A_ok = (sizes <= m) & ctx.admissible(T.room[i], m - sizes)
        Am = T.masks[A_ok]
        for delta in deltas:
            y = perturb_to_strict(space, x, m, delta, support=Eset)
            base = {"x": x.tolist(), "m": m, "E": list(Eset), "delta": delta, "y": y.tolist()}
            post = [
                space.norm(x - y) <= delta,
                is_strictly_greedy(y, m),
                tuple(sorted(natural_greedy_ordering(y)[:m])) == Eset,
                np.array_equal(np.where(E, y, 0.0), np.where(E, x, 0.0)),
            ]
            tally.assert_all("perturbation:postconditions", post,
                             lambda k, base=base: dict(base, condition=(
                                 "norm", "strict", "support", "same_projection")[k]))
            d = x - y
            nd = space.norm(d)
            lhs = T.R[i, e]
            yE = np.where(E, 0.0, y)
            nyE = space.norm(yE)
            nPEd = space.norm(np.where(E, d, 0.0))
            tally.check("perturbation:triangle_at_x", lhs, nd + nyE + nPEd,
                        lambda k, base=base: base, tol=TRIANGLE_TOL)
            yA = space.batch_norm(np.where(Am, 0.0, y))
            xA = T.R[i, A_ok]
            PAd = space.batch_norm(np.where(Am, d, 0.0))
            tally.check("perturbation:triangle_at_y", yA, nd + xA + PAd,
                        lambda k, base=base, Am=Am: dict(base, A=list(indices_of(Am[k]))),
                        tol=TRIANGLE_TOL)
            pE = nPEd / nd if nd > 0 else 0.0
            pA = PAd / nd if nd > 0 else np.zeros_like(PAd)
            bound = C * xA + 2 * (1 + C + pE + C * pA) * delta
            tally.check("perturbation:limit_bound", lhs, bound,
                        lambda k, base=base, Am=Am: dict(base, A=list(indices_of(Am[k]))))
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(yA > 1e-12, nyE / yA, 1.0)
            excess = max(excess, float(np.max(r)) - C)
    notes = [
        "the strict-case step at the perturbed vector uses the family constant; the "
        f"largest excess of that ratio over C_ag across perturbed vectors was {excess:.3e} "
        "(diagnostic, not asserted: the perturbed vectors are not family members)",
    ]
    return tally.report("extended_almost_greedy", ctx, {"C_ag": C}, notes)


# ---------------------------------------------------------------------------
# monotone multipliers and their finite windows


def monotone_multiplier_grid(n: int, levels=MULTIPLIER_LEVELS) -> np.ndarray:
    """Every non-decreasing length-``n`` sequence with entries in ``levels``."""
    levels = sorted(set(float(v) for v in levels))
    if levels[0] < 0 or levels[-1] > 1:
        raise ConfigError("multiplier levels must lie in [0, 1]", "multiplier_levels")
    return np.array(list(itertools.combinations_with_replacement(levels, n)))


def _orderings(x):
    # every tie-class ordering up to dimension 5, natural and reversed beyond
    cap = 720 if x.shape[0] <= 5 else 1
    return tie_class_orderings(x, cap=cap)


def _decomposition_weights(grid, tally):
    """Weight matrix ``W[g, m]`` on the step vectors ``s_0..s_N`` (``s_N = 0``)."""
    n = grid.shape[1]
    W = np.zeros((len(grid), n + 1))
    for g, lam in enumerate(grid):
        pieces = decompose_monotone_multiplier(lam)
        steps = np.array([s for _, s in pieces])
        w = np.array([c for c, _ in pieces])
        for c, s in pieces:
            W[g, n - int(s.sum())] = c
        recon = w @ steps
        tally.assert_all("decomposition:exact", [
            np.all(w >= 0),
            abs(w.sum() - 1.0) <= EXACT_TOL,
            np.max(np.abs(recon - lam)) <= EXACT_TOL,
        ], lambda k, lam=lam: {"lambda": lam.tolist(),
                               "condition": ("nonnegative", "sum_to_one", "reconstruction")[k]})
    return W


def check_monotone_multiplier(ctx: HarnessContext, grid=None) -> CheckReport:
    """``||sum lam_i a_i e_rho(i)|| <= C_l ||x||`` for monotone ``lam`` and
    greedy orderings ``rho``, through the step-vector decomposition."""
    space, X = ctx.space, ctx.X
    n = space.dim
    grid = monotone_multiplier_grid(n) if grid is None else np.asarray(grid, dtype=np.float64)
    C = ctx.value("C_l")
    tally = Tally(ctx.tol)
    W = _decomposition_weights(grid, tally)
    for x in X:
        nx = space.norm(x)
        for rho in _orderings(x):
            p = np.array(rho) - 1
            M = np.empty_like(grid)
            M[:, p] = grid
            Y = M * x
            steps = np.tile(x, (n + 1, 1))
            for m in range(1, n + 1):
                steps[m:, p[m - 1]] = 0.0
            nT = space.batch_norm(steps)
            nY = space.batch_norm(Y)
            base = {"x": x.tolist(), "rho": list(rho)}
            tally.check("steps_bounded", nT, C * nx,
                        lambda k, base=base, steps=steps: dict(
                            base, m=k, lhs_terms=_terms((1, steps[k])), rhs_terms=_terms((C, x))))
            scale = max(1.0, float(np.max(np.abs(x))))
            tally.assert_all("decomposition:image", np.max(np.abs(W @ steps - Y), axis=1)
                             <= EXACT_TOL * scale,
                             lambda k, base=base: dict(base, **{"lambda": grid[k].tolist()}))
            tally.check("convexity", nY, W @ nT,
                        lambda k, base=base: dict(base, **{"lambda": grid[k].tolist()}),
                        tol=TRIANGLE_TOL)
            tally.check("multiplier", nY, C * nx,
                        lambda k, base=base, Y=Y: dict(
                            base, **{"lambda": grid[k].tolist()},
                            lhs_terms=_terms((1, Y[k])), rhs_terms=_terms((C, x))))
    return tally.report("monotone_multiplier", ctx, {"C_l": C})


def check_multiplier_windows(ctx: HarnessContext, grid=None) -> CheckReport:
    """Finite windows: ``||sum_{M<=i<=N} lam_i a_i e_rho(i)|| <= C_l
    ||sum_{M<=i<=N} a_i e_rho(i)||`` for every ``1 <= M <= N <= dim``."""
    space, X = ctx.space, ctx.X
    n = space.dim
    grid = monotone_multiplier_grid(n) if grid is None else np.asarray(grid, dtype=np.float64)
    C = ctx.value("C_l")
    tally = Tally(ctx.tol)
    windows = [(lo, hi) for lo in range(1, n + 1) for hi in range(lo, n + 1)]
    wmask = np.zeros((len(windows), n))
    for j, (lo, hi) in enumerate(windows):
        wmask[j, lo - 1:hi] = 1.0
    for x in X:
        for rho in _orderings(x):
            p = np.array(rho) - 1
            Wp = np.empty_like(wmask)
            Wp[:, p] = wmask
            M = np.empty_like(grid)
            M[:, p] = grid
            plain = Wp * x                                  # [window, dim]
            multiplied = Wp[:, None, :] * M[None] * x        # [window, lam, dim]
            lhs = space.batch_norm(multiplied)
            rhs = C * space.batch_norm(plain)[:, None]
            tally.check("window", lhs, rhs,
                        lambda k, x=x, rho=rho, multiplied=multiplied, plain=plain: {
                            "x": x.tolist(), "rho": list(rho),
                            "window": list(windows[k // len(grid)]),
                            "lambda": grid[k % len(grid)].tolist(),
                            "lhs_terms": _terms((1, multiplied.reshape(-1, n)[k])),
                            "rhs_terms": _terms((C, plain[k // len(grid)]))})
    return tally.report("multiplier_windows", ctx, {"C_l": C},
                        ["only finite windows are checked; the convergence of the infinite "
                         "series is outside this package's scope"])


# ---------------------------------------------------------------------------
# reformulation of symmetry for largest coefficients (|A| <= |B|)


def _hypercube_weights(s_rows, t_rows, k, tally):
    """Weights over ``{+-1}^k`` (``+`` first) per row, from the product rule,
    with the expectation checked against ``s``."""
    verts = np.array(list(itertools.product((1, -1), repeat=k)), dtype=np.float64).reshape(-1, k)
    cache = {}
    W = np.zeros((len(s_rows), len(verts)))
    for r, (s, t) in enumerate(zip(s_rows, t_rows)):
        key = (s.tobytes(), float(t))
        if key not in cache:
            pieces = hypercube_vertex_decomposition(s, t)
            w = np.zeros(len(verts))
            for c, theta in pieces:
                w[verts.tolist().index([float(v) for v in theta])] = c
            mean = (w[:, None] * t * verts).sum(axis=0) if k else np.zeros(0)
            tally.assert_all("hypercube:exact", [
                np.all(w >= 0) and abs(w.sum() - 1.0) <= 1e-14,
                bool(np.all(np.abs(mean - s) <= 1e-14)),
            ], lambda j, s=s, t=t: {"s": s.tolist(), "t": float(t),
                                    "condition": ("weights", "expectation")[j]})
            cache[key] = w
        W[r] = cache[key]
    return verts, W


def check_largest_coefficient_symmetry(ctx: HarnessContext) -> CheckReport:
    """``||x|| <= C_A ||x - P_A x + t sum_B eps_n e_n||`` for ``A`` inside
    ``supp x``, ``B`` outside it, ``|A| <= |B|``, ``t = max |x_n|``, through
    the hypercube decomposition of ``P_A x`` over a set ``D``."""
    space, X = ctx.space, ctx.X
    n = space.dim
    C = ctx.value("C_A_disjoint")
    tally = Tally(ctx.tol)
    masks = subset_masks(n)
    supp = X != 0
    tmax = np.max(np.abs(X), axis=1)
    for Am in masks:
        for Bm in masks:
            kA, kB = int(Am.sum()), int(Bm.sum())
            if kB == 0 or kA > kB or np.any(Am & Bm):
                continue
            sel = np.flatnonzero(np.all(supp[:, Am], axis=1) & ~np.any(supp[:, Bm], axis=1))
            if sel.size == 0:
                continue
            x = X[sel]
            t = tmax[sel]
            zeros_out = (~supp[sel]) & ~Bm
            room = zeros_out.sum(axis=1)
            adm = ctx.admissible(room, kB - kA)
            tally.skip("reformulation", int((~adm).sum()) << kB)
            if kA == 0 and kB == 1:
                tally._count("induction_instances", int(adm.sum()) * 2)
            x, t, zeros_out, room = x[adm], t[adm], zeros_out[adm], room[adm]
            if len(x) == 0:
                continue
            S = sign_patterns(kB)
            z = np.where(Am, 0.0, x)
            tgt = np.repeat(z[:, None, :], len(S), axis=1)
            tgt[:, :, Bm] = t[:, None, None] * S[None]
            ntgt = space.batch_norm(tgt)                      # [row, eps]
            nx = space.batch_norm(x)
            Aset, Bset = list(indices_of(Am)), list(indices_of(Bm))
            tally.check("reformulation", nx[:, None], C * ntgt,
                        lambda k, x=x, tgt=tgt, S=S: {
                            "x": x[k // len(S)].tolist(), "A": Aset, "B": Bset,
                            "eps": S[k % len(S)].tolist(),
                            "lhs_terms": _terms((1, x[k // len(S)])),
                            "rhs_terms": _terms((C, tgt.reshape(-1, n)[k]))})
            # mechanism: D = A plus the first |B| - |A| free zeros, where room allows
            has_room = room >= kB - kA
            if not np.any(has_room):
                tally.skip("mechanism", int(len(x)))
                continue
            tally.skip("mechanism", int((~has_room).sum()))
            xr, tr, zr, zo = x[has_room], t[has_room], z[has_room], zeros_out[has_room]
            extra = zo & (np.cumsum(zo, axis=1) <= kB - kA)
            D = extra | Am
            cols = np.nonzero(D)[1].reshape(len(xr), kB)
            s = np.take_along_axis(xr, cols, axis=1)        # zero on D \ A
            verts, Wv = _hypercube_weights(s, tr, kB, tally)
            U = np.repeat(zr[:, None, :], len(verts), axis=1)
            rows = np.arange(len(xr))[:, None, None]
            U[rows, np.arange(len(verts))[None, :, None], cols[:, None, :]] = \
                tr[:, None, None] * verts[None]
            nU = space.batch_norm(U)                          # [row, theta]
            ntr = ntgt[has_room]                              # [row, eps]
            tally.check("mechanism:vertex", nU[:, :, None], C * ntr[:, None, :],
                        lambda k, xr=xr, U=U, nv=len(verts), ne=len(S): {
                            "x": xr[k // (nv * ne)].tolist(), "A": Aset, "B": Bset,
                            "vertex": U.reshape(-1, n)[k // ne].tolist()})
            tally.check("mechanism:convexity", nx[has_room],
                        (Wv * nU).sum(axis=1),
                        lambda k, xr=xr: {"x": xr[k].tolist(), "A": Aset, "B": Bset},
                        tol=TRIANGLE_TOL)
    return tally.report("symmetry_reformulation", ctx, {"C_A_disjoint": C})


# ---------------------------------------------------------------------------
# almost greedy <=> suppression quasi-greedy + symmetric for largest coefficients


def _family_index(X):
    return {np.ascontiguousarray(row + 0.0).tobytes(): i for i, row in enumerate(X)}


def check_almost_greedy_characterization(ctx: HarnessContext) -> CheckReport:
    """Both directions of the almost-greedy characterization, pointwise.

    (i) every suppression quasi-greedy ratio, and every disjoint
    greedy-permutation ratio (through the merged vector ``u``), is an
    almost-greedy ratio of a family vector, hence at most ``C_ag``.
    (ii) ``||x - G_m x|| <= C_A * C_l * ||x - P_A x||`` through the
    intermediate vector and the monotone multiplier it defines.
    """
    space, T = ctx.space, ctx.tables()
    X, n = T.X, space.dim
    C_ag, C_A, K = ctx.value("C_ag"), ctx.value("C_A_disjoint"), ctx.value("C_l")
    tally = Tally(ctx.tol)
    sizes = T.sizes
    sidx = _subset_index(T.masks)

    # (i-a) quasi-greedy ratios as almost-greedy ratios with A empty
    G = T.greedy & (sizes[None] >= 1)
    adm = ctx.admissible(T.room[:, :1], sizes[None])
    tally.skip("i:quasi_greedy", int((G & ~adm).sum()))
    i, e = np.nonzero(G & adm)
    tally.check("i:quasi_greedy", T.R[i, e], C_ag * T.norms[i],
                lambda k: {"x": X[i[k]].tolist(), "E": list(indices_of(T.masks[e[k]]))})

    # (i-b) disjoint greedy permutations through u = z + sum_A eps + sum_B theta
    index = _family_index(X)
    Zof = ctx.remainders()
    for kk, a, b in disjoint_instances(n):
        Z = Zof(~(a | b))
        S = sign_patterns(kk)
        ia, ib = sidx[a.tobytes()], sidx[b.tobytes()]
        for eps in S:
            for theta in S:
                U = Z.copy()
                U[:, a] = eps
                U[:, b] = theta
                xs = np.where(b, 0.0, U)
                ys = np.where(a, 0.0, U)
                pos = np.array([index.get(np.ascontiguousarray(u + 0.0).tobytes(), -1) for u in U])
                found = pos >= 0
                desc = lambda k, U=U, eps=eps, theta=theta: {
                    "u": U[k].tolist(), "A": list(indices_of(a)), "B": list(indices_of(b)),
                    "eps": eps.tolist(), "theta": theta.tolist()}
                if ctx.closed:
                    tally.assert_all("i:u_in_family", found, desc)
                else:
                    tally.skip("i:permutation", int((~found).sum()))
                p = pos[found]
                if p.size == 0:
                    continue
                ny = space.batch_norm(ys[found])
                nx = space.batch_norm(xs[found])
                tally.assert_all("i:u_identities",
                                 T.greedy[p, ia] & (T.R[p, ia] == ny) & (T.R[p, ib] == nx),
                                 lambda k, U=U[found]: {"u": U[k].tolist()})
                tally.check("i:permutation", ny, C_ag * nx,
                            lambda k, U=U[found], ys=ys[found], xs=xs[found]: {
                                "u": U[k].tolist(), "A": list(indices_of(a)),
                                "B": list(indices_of(b)),
                                "lhs_terms": _terms((1, ys[k])),
                                "rhs_terms": _terms((C_ag, xs[k]))})

    # (ii) the two-step chain
    order = np.argsort(-np.abs(X), axis=1, kind="stable")
    absx = np.abs(X)
    sgn = np.sign(X)
    for m in range(1, n + 1):
        B = np.zeros_like(X, dtype=bool)
        np.put_along_axis(B, order[:, :m], True, axis=1)
        t = np.take_along_axis(absx, order[:, m - 1:m], axis=1)[:, 0]
        live = t > 0
        tally._count("ii:trivial_t_zero", int((~live).sum()) * int((sizes == m).sum()))
        Xl, Bl, tl, absl, sgnl = X[live], B[live], t[live], absx[live], sgn[live]
        v = np.where(Bl, 0.0, Xl)
        nv = space.batch_norm(v)
        for s_idx in np.flatnonzero(sizes == m):
            A = T.masks[s_idx]
            only_b = Bl & ~A
            z = np.where(A | Bl, 0.0, Xl)
            w = z + np.where(only_b, tl[:, None] * sgnl, 0.0)
            xa = np.where(A, 0.0, Xl)
            nw = space.batch_norm(w)
            nxa = T.R[np.flatnonzero(live), s_idx]
            Aset = list(indices_of(A))

            def base(k, A=Aset):
                return {"x": Xl[k].tolist(), "m": m, "A": A}

            # step 1: the reformulation instance with D = A \ B
            tally.check("ii:step1", nv, C_A * nw,
                        lambda k, w=w: dict(base(k), lhs_terms=_terms((1, v[k])),
                                            rhs_terms=_terms((C_A, w[k]))))
            only_a = A & ~Bl
            for D in np.unique(only_a, axis=0):
                rows = np.flatnonzero(np.all(only_a == D, axis=1))
                q = int(D.sum())
                verts = sign_patterns(q)
                Uv = np.repeat(z[rows][:, None, :], len(verts), axis=1)
                Uv[:, :, D] = tl[rows][:, None, None] * verts[None]
                nU = space.batch_norm(Uv)
                tally.check("ii:step1_vertex", nU, C_A * nw[rows][:, None],
                            lambda k, rows=rows, Uv=Uv, nvt=len(verts): dict(
                                base(rows[k // nvt]), vertex=Uv.reshape(-1, n)[k].tolist()))
                tally.check("ii:step1_convexity", nv[rows], nU.max(axis=1),
                            lambda k, rows=rows: base(rows[k]), tol=TRIANGLE_TOL)
            # step 2: the multiplier lam_i = t / |a_rho(i)| on B \ A, 1 beyond
            q = only_b.sum(axis=1)
            with np.errstate(divide="ignore"):
                ratios = np.where(only_b, tl[:, None] / absl, np.inf)
            lam_seq = np.where(np.arange(n)[None] < q[:, None], np.sort(ratios, axis=1), 1.0)
            mono = np.all(np.diff(lam_seq, axis=1) >= 0, axis=1) & np.all(lam_seq <= 1, axis=1) \
                & np.all(lam_seq >= 0, axis=1)
            tally.assert_all("ii:lambda_monotone", mono,
                             lambda k: dict(base(k), **{"lambda": lam_seq[k].tolist()}))
            rest = ~(A | Bl)
            lo_b = np.where(only_b, absl, np.inf).min(axis=1)
            hi_rest = np.where(rest, absl, -np.inf).max(axis=1)
            tally.assert_all("ii:rho_greedy_for_x_minus_PA", (q == 0) | (lo_b >= hi_rest),
                             base)
            with np.errstate(divide="ignore", invalid="ignore"):
                scaled = np.where(only_b, tl[:, None] / np.where(only_b, absl, 1.0) * Xl, 0.0)
            ident = np.max(np.abs(np.where(only_b, scaled - w, 0.0)), axis=1) <= EXACT_TOL
            tally.assert_all("ii:multiplier_identity", ident, base)
            tally.check("ii:step2", nw, K * nxa,
                        lambda k, w=w, xa=xa: dict(base(k), lhs_terms=_terms((1, w[k])),
                                                   rhs_terms=_terms((K, xa[k]))))
            tally.check("ii:combined", nv, C_A * K * nxa,
                        lambda k, xa=xa: dict(base(k), lhs_terms=_terms((1, v[k])),
                                              rhs_terms=_terms((C_A * K, xa[k]))))
    return tally.report("almost_greedy_characterization", ctx,
                        {"C_ag": C_ag, "C_A_disjoint": C_A, "C_l": K})


# ---------------------------------------------------------------------------
# 1-almost greedy <=> Property (A)


def check_property_a_equivalence(ctx: HarnessContext) -> CheckReport:
    """Both directions of the isometric equivalence at family scope.

    When the family symmetry constant is 1, the one-coordinate extension
    ``||v|| <= ||v + s e_k||`` is checked along the induction that rebuilds
    ``x`` from ``x - P_E x``, and ``C_l`` and ``C_ag`` must then be 1.
    When ``C_ag`` is 1, every disjoint greedy-permutation ratio must be 1.
    Otherwise the implication is vacuous and both values are recorded.
    """
    space, T = ctx.space, ctx.tables()
    X, n = T.X, space.dim
    tol = ctx.tol
    C_A, C_ag, C_l = ctx.value("C_A_disjoint"), ctx.value("C_ag"), ctx.value("C_l")
    tally = Tally(tol)
    notes = []

    # sign flips: the only greedy permutation in dimension 1, asserted for all x
    tally.check("sign_flip", space.batch_norm(-X), T.norms,
                lambda k: {"x": X[k].tolist()}, tol=0.0)

    property_a = C_A <= 1 + tol
    if property_a:
        order = np.argsort(np.abs(X), axis=1, kind="stable")  # ascending moduli
        for s_idx in np.flatnonzero(T.sizes >= 1):
            E = T.masks[s_idx]
            rows = np.flatnonzero(T.greedy[:, s_idx])
            if rows.size == 0:
                continue
            v = np.where(E, 0.0, X[rows])
            ranks = order[rows]
            inE = E[ranks]
            seq = np.where(inE, ranks, -1)
            for j in range(n):
                k = seq[:, j]
                act = k >= 0
                if not np.any(act):
                    continue
                r = np.flatnonzero(act)
                cur = v[r]
                nxt = cur.copy()
                nxt[np.arange(len(r)), k[r]] = X[rows[r], k[r]]
                # one zero besides k is needed to host the reformulation's set D
                adm = ctx.admissible((cur == 0).sum(axis=1) - 1, 1)
                tally.skip("induction_step", int((~adm).sum()))
                rr = np.flatnonzero(adm)
                tally.check("induction_step", space.batch_norm(cur[rr]),
                            space.batch_norm(nxt[rr]),
                            lambda q, cur=cur[rr], nxt=nxt[rr]: {
                                "v": cur[q].tolist(), "next": nxt[q].tolist(),
                                "lhs_terms": _terms((1, cur[q])),
                                "rhs_terms": _terms((1, nxt[q]))})
                v[r] = nxt
        tally.check("forward:C_l_is_one", C_l, 1.0, lambda k: {
            "C_l": C_l, "lhs_constants": _constant_terms(ctx, (1, "C_l")), "rhs_constants": []})
        tally.check("forward:C_ag_is_one", C_ag, 1.0, lambda k: {
            "C_ag": C_ag, "lhs_constants": _constant_terms(ctx, (1, "C_ag")),
            "rhs_constants": []})
    else:
        notes.append(f"symmetry constant {C_A!r} > 1: forward implication vacuous")
    if C_ag <= 1 + tol:
        tally.check("backward:C_A_is_one", C_A, 1.0, lambda k: {
            "C_A_disjoint": C_A, "lhs_constants": _constant_terms(ctx, (1, "C_A_disjoint")),
            "rhs_constants": []})
    else:
        notes.append(f"almost greedy constant {C_ag!r} > 1: backward implication vacuous")
    verdict = "consistent" if (property_a == (C_ag <= 1 + tol)) else "inconsistent"
    tally.assert_all("equivalence", [verdict == "consistent"],
                     lambda k: {"C_A_disjoint": C_A, "C_ag": C_ag})
    notes.append(f"family-scope verdict: {verdict} (Property (A) on family: {property_a}, "
                 f"1-almost greedy on family: {C_ag <= 1 + tol})")
    return tally.report("property_a", ctx, {"C_A_disjoint": C_A, "C_ag": C_ag, "C_l": C_l}, notes)


# ---------------------------------------------------------------------------
# isometric corollaries and remarks


def check_isometric_corollaries(ctx: HarnessContext) -> CheckReport:
    """(a) ``C_g = 1`` iff ``C_ag = 1`` and ``C_qg = 1``; (b) the
    ``C_A * K_su`` greedy bound pointwise against ``sigma_m``; (c) the
    equivalence ``K_su = 1`` iff ``C_w = 1`` iff ``C_qg = 1``; (d)
    ``C_A_greedyperm <= C_A_disjoint ** 2``."""
    space, T = ctx.space, ctx.tables()
    tol = ctx.tol
    vals = {k: ctx.value(k) for k in ("C_g", "C_ag", "C_qg", "C_w", "K_su",
                                      "C_A_disjoint", "C_A_greedyperm")}
    one = {k: v <= 1 + tol for k, v in vals.items()}
    tally = Tally(tol)
    notes = []

    a = one["C_g"] == (one["C_ag"] and one["C_qg"])
    tally.assert_all("a:isometric_greedy", [a], lambda k: {
        "C_g": vals["C_g"], "C_ag": vals["C_ag"], "C_qg": vals["C_qg"]})

    V, _ = ctx.mterm()
    slack = 1e-6
    CK = vals["C_A_disjoint"] * vals["K_su"]
    G = T.greedy & (T.sizes[None] >= 1)
    sizes = T.sizes
    for m in range(1, space.dim + 1):
        cols = sizes == m
        sigma = V[:, cols].min(axis=1)
        i, e = np.nonzero(G & cols[None])
        tally.check("b:greedy_bound", T.R[i, e], CK * sigma[i] + slack,
                    lambda k, i=i, e=e, sigma=sigma: {
                        "x": T.X[i[k]].tolist(), "m": m,
                        "E": list(indices_of(T.masks[e[k]])), "sigma": float(sigma[i[k]])})
    if not space.lattice:
        notes.append("b: the bound is only pointwise sound for lattice norms; "
                     "for other norms a failure is a family-scope observation")

    c = one["K_su"] == one["C_w"] == one["C_qg"]
    tally.assert_all("c:quasi_greedy_isometric", [c], lambda k: {
        "K_su": vals["K_su"], "C_w": vals["C_w"], "C_qg": vals["C_qg"]})
    notes.append("c: consistent" if c else "c: inconsistent")
    tally.check("d:greedyperm_square", vals["C_A_greedyperm"],
                vals["C_A_disjoint"] ** 2, lambda k: {
                    "lhs_constants": _constant_terms(ctx, (1, "C_A_greedyperm")),
                    "rhs_constants": _constant_terms(ctx, (2, "C_A_disjoint"))}, tol=1e-9)
    return tally.report("isometric_corollaries", ctx, vals, notes)


CHECK_ALIASES = {"main_theorem": "property_a"}

CHECKS = {
    "extended_almost_greedy": check_extended_almost_greedy,
    "monotone_multiplier": check_monotone_multiplier,
    "multiplier_windows": check_multiplier_windows,
    "symmetry_reformulation": check_largest_coefficient_symmetry,
    "almost_greedy_characterization": check_almost_greedy_characterization,
    "property_a": check_property_a_equivalence,
    "isometric_corollaries": check_isometric_corollaries,
}


def run_checks(ctx: HarnessContext, names=None) -> list[CheckReport]:
    names = list(CHECK_NAMES) if names is None else [CHECK_ALIASES.get(n, n) for n in names]
    unknown = [nm for nm in names if nm not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks: {unknown}; known: {list(CHECK_NAMES)}", "checks")
    return [CHECKS[nm](ctx) for nm in names]


def rerun_violation(space: BasisSpace, violation: dict) -> tuple[float, float]:
    """Recompute ``(lhs, rhs)`` of a recorded violation from its terms."""
    if "lhs_constants" in violation:
        def product(factors):
            out = 1.0
            for p, w in factors:
                # no witness: the constant took its default value 1
                out *= 1.0 if w is None else evaluate_witness(space, w)[2] ** p
            return out

        return product(violation["lhs_constants"]), product(violation["rhs_constants"])
    if "lhs_terms" not in violation:
        raise TgaError("violation record carries no norm terms")

    def total(terms):
        return sum(c * space.norm(np.array(v)) for c, v in terms)

    return total(violation["lhs_terms"]), total(violation["rhs_terms"])
