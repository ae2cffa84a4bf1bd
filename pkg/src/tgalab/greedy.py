"""Greedy orderings, thresholding sums and the constructive pieces of the
almost-greedy proofs (perturbation to strictness, greedy permutations,
monotone multipliers and their convex decompositions).

Orderings and index sets are 1-based tuples.  Ties between moduli are
detected with exact float equality.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TgaError
from .space import BasisSpace, IndexSet, as_coeffs, index_set, mask_of

MAX_TIE_COMBINATIONS = 10_000

GreedyOrdering = tuple  # permutation of 1..N, 1-based


def natural_greedy_ordering(v) -> GreedyOrdering:
    """Moduli descending, ties by ascending index, zeros last in index order."""
    a = np.abs(as_coeffs(v))
    # stable sort on -|a| keeps ascending index inside each tie class
    order = np.argsort(-a, kind="stable")
    return tuple(int(i) + 1 for i in order)


def _check_m(m, lo, hi):
    if int(m) != m or not lo <= m <= hi:
        raise TgaError(f"m must be an integer in [{lo}, {hi}], got {m!r}")
    return int(m)


def natural_greedy_sum(v, m: int) -> np.ndarray:
    arr = as_coeffs(v)
    m = _check_m(m, 0, arr.shape[0])
    rho = natural_greedy_ordering(arr)
    out = np.zeros_like(arr)
    keep = [i - 1 for i in rho[:m]]
    out[keep] = arr[keep]
    return out


def _threshold_split(a: np.ndarray, m: int):
    """Split indices (0-based) at the m-th natural threshold.

    Returns ``(above, tie)`` where ``above`` holds indices whose modulus is
    strictly larger than the m-th largest modulus and ``tie`` the ones equal
    to it.  Only meaningful for ``1 <= m <= N``.
    """
    rho = np.argsort(-a, kind="stable")
    t = a[rho[m - 1]]
    above = np.flatnonzero(a > t)
    tie = np.flatnonzero(a == t)
    return above, tie, t


def enumerate_greedy_supports(v, m: int) -> list[IndexSet]:
    """Every size-``m`` set that can open some greedy ordering of ``v``.

    The natural support comes first; the rest follow in lexicographic order.
    """
    arr = as_coeffs(v)
    m = _check_m(m, 0, arr.shape[0])
    if m == 0:
        return [()]
    a = np.abs(arr)
    above, tie, _ = _threshold_split(a, m)
    need = m - above.size
    count = math.comb(tie.size, need)
    if count > MAX_TIE_COMBINATIONS:
        raise TgaError(f"tie class too large: C({tie.size},{need}) = {count} > {MAX_TIE_COMBINATIONS}")
    out = []
    for chosen in itertools.combinations(tie.tolist(), need):
        out.append(tuple(sorted(int(i) + 1 for i in itertools.chain(above.tolist(), chosen))))
    return out


def is_greedy_support(v, E) -> bool:
    a = np.abs(as_coeffs(v))
    mask = mask_of(E, a.shape[0])
    if mask.all() or not mask.any():
        return True
    return bool(a[mask].min() >= a[~mask].max())


def is_strictly_greedy(v, m: int) -> bool:
    arr = as_coeffs(v)
    n = arr.shape[0]
    m = _check_m(m, 1, n)
    a = np.sort(np.abs(arr))[::-1]
    nxt = a[m] if m < n else 0.0
    return bool(nxt < a[m - 1])


def perturb_to_strict(space: BasisSpace, v, m: int, delta: float, support=None) -> np.ndarray:
    """Nearby vector whose first ``m`` natural greedy indices are ``support``
    and whose m-term greedy approximation is strict.

    ``support`` defaults to the natural m-term greedy support of ``v`` and
    must be one of :func:`enumerate_greedy_supports`.  Tied coordinates left
    out of ``support`` are shrunk by ``1 - eta`` with
    ``eta = delta / (1 + sum ||e_n|| |v_n|)`` over the shrunk coordinates, so
    ``||v - y|| < delta`` by the triangle inequality.  When the threshold
    modulus is zero the zero coordinates inside ``support`` are lifted to
    ``delta / (1 + sum ||e_n||)`` instead.
    """
    if not delta > 0:
        raise TgaError(f"delta must be positive, got {delta!r}")
    arr = as_coeffs(v, space.dim)
    n = arr.shape[0]
    m = _check_m(m, 1, n)
    if support is None:
        E = tuple(sorted(natural_greedy_ordering(arr)[:m]))
    else:
        E = index_set(support, n)
        if len(E) != m or not is_greedy_support(arr, E):
            raise TgaError(f"{E} is not an m-term greedy support of the vector")
    a = np.abs(arr)
    in_E = mask_of(E, n)
    t = a[in_E].min()
    y = arr.copy()
    unit_norms = space.batch_norm(np.eye(n))
    if t > 0:
        touched = np.flatnonzero(~in_E & (a == t))
        if touched.size == 0:
            return y
        eta = delta / (1.0 + float(np.sum(unit_norms[touched] * a[touched])))
        eta = min(eta, 0.5)
        y[touched] = arr[touched] * (1.0 - eta)
    else:
        touched = np.flatnonzero(in_E & (a == 0))
        gamma = delta / (1.0 + float(np.sum(unit_norms[touched])))
        # keep lifted entries below every nonzero modulus so the order inside E is unchanged
        nz = a[a > 0]
        if nz.size:
            gamma = min(gamma, 0.5 * nz.min())
        y[touched] = gamma
    return y


@dataclass(frozen=True)
class GreedyPermInstance:
    """``x = z + t sum_A eps_n e_n`` and ``y = z + t sum_B theta_n e_n``.

    ``eps`` and ``theta`` list the signs in increasing index order of
    ``A`` and ``B``.
    """

    z: tuple
    t: float
    A: IndexSet
    B: IndexSet
    eps: tuple
    theta: tuple

    @property
    def disjoint(self) -> bool:
        return not set(self.A) & set(self.B)

    def validate(self):
        z = as_coeffs(self.z)
        n = z.shape[0]
        A, B = index_set(self.A, n), index_set(self.B, n)
        if A != tuple(self.A) or B != tuple(self.B):
            raise TgaError("A and B must be sorted duplicate-free index tuples")
        if len(A) != len(B):
            raise TgaError("|A| = |B| violated")
        if len(self.eps) != len(A) or len(self.theta) != len(B):
            raise TgaError("sign lists must match |A| and |B|")
        if any(s not in (1, -1) for s in (*self.eps, *self.theta)):
            raise TgaError("signs must be +1 or -1")
        if not (self.t > 0 and math.isfinite(self.t)):
            raise TgaError("t must be a positive real")
        if np.any(z[list(i - 1 for i in set(A) | set(B))] != 0):
            raise TgaError("supp(z) must not meet A or B")
        if np.abs(z).max(initial=0.0) > self.t:
            raise TgaError("max |z_n| <= t violated")

    def swapped(self) -> "GreedyPermInstance":
        return GreedyPermInstance(self.z, self.t, self.B, self.A, self.theta, self.eps)


def realize_greedy_permutation(inst: GreedyPermInstance) -> tuple[np.ndarray, np.ndarray]:
    inst.validate()
    z = as_coeffs(inst.z)
    x, y = z.copy(), z.copy()
    for n, s in zip(inst.A, inst.eps):
        x[n - 1] = inst.t * s
    for n, s in zip(inst.B, inst.theta):
        y[n - 1] = inst.t * s
    return x, y


def validate_multiplier(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim != 1:
        raise TgaError("multiplier must be a 1-d sequence")
    if lam.size and (lam[0] < 0 or lam[-1] > 1 or np.any(np.diff(lam) < 0)):
        raise TgaError("multiplier must satisfy 0 <= lam_1 <= ... <= lam_N <= 1")
    return lam


def is_greedy_ordering(v, rho) -> bool:
    a = np.abs(as_coeffs(v))
    if sorted(rho) != list(range(1, a.shape[0] + 1)):
        return False
    mods = a[[i - 1 for i in rho]]
    return bool(np.all(mods[:-1] >= mods[1:]))


def apply_multiplier(v, lam, rho: Sequence[int]) -> np.ndarray:
    """``sum_i lam_i v_{rho(i)} e_{rho(i)}`` for a greedy ordering ``rho`` of ``v``."""
    arr = as_coeffs(v)
    lam = validate_multiplier(lam)
    if lam.shape[0] != arr.shape[0]:
        raise TgaError("multiplier length must equal the dimension")
    if not is_greedy_ordering(arr, rho):
        raise TgaError("rho is not a greedy ordering of v")
    out = np.zeros_like(arr)
    pos = np.array(rho) - 1
    out[pos] = lam * arr[pos]
    return out


def step_vector(n: int, m: int) -> np.ndarray:
    """``(0,...,0, 1,...,1)`` with ``m`` leading zeros; ``m = n`` is the zero vector."""
    s = np.ones(n)
    s[:m] = 0.0
    return s


def decompose_monotone_multiplier(lam) -> list[tuple[float, np.ndarray]]:
    """Write a monotone multiplier as a convex combination of step vectors.

    Weight on the step with ``m`` leading zeros is ``lam_{m+1} - lam_m``
    (``lam_0 = 0``); the leftover ``1 - lam_N`` sits on the zero vector.
    Terms with zero weight are dropped.
    """
    lam = validate_multiplier(lam)
    n = lam.shape[0]
    weights = np.diff(np.concatenate([[0.0], lam, [1.0]]))
    return [(float(w), step_vector(n, m)) for m, w in enumerate(weights) if w != 0]


def hypercube_vertex_decomposition(s, t: float) -> list[tuple[float, tuple]]:
    """Convex weights on the cube vertices ``t * theta`` with mean ``s``.

    Uses the product measure ``w(theta) = prod (1 + theta_n s_n / t) / 2``.
    Vertices are listed with ``+`` before ``-`` lexicographically; zero
    weights are dropped.
    """
    s = np.asarray(s, dtype=np.float64)
    if not t > 0:
        raise TgaError("t must be positive")
    if np.any(np.abs(s) > t):
        raise TgaError("every |s_n| must be at most t")
    half_plus = (1.0 + s / t) / 2.0
    half_minus = (1.0 - s / t) / 2.0
    out = []
    for theta in itertools.product((1, -1), repeat=s.shape[0]):
        w = 1.0
        for k, sign in enumerate(theta):
            w *= half_plus[k] if sign > 0 else half_minus[k]
        if w != 0:
            out.append((w, theta))
    return out


def tie_class_orderings(v, cap: int = 720) -> list[GreedyOrdering]:
    """Greedy orderings of ``v`` obtained by permuting nonzero tie classes.

    Zero coordinates always trail in ascending order (their multiplier
    entries act on zero coefficients).  When the number of orderings
    exceeds ``cap`` only the natural ordering and the one reversing every
    tie class are returned.
    """
    arr = as_coeffs(v)
    a = np.abs(arr)
    rho = natural_greedy_ordering(arr)
    classes = []
    for _, grp in itertools.groupby(rho, key=lambda i: a[i - 1]):
        classes.append(list(grp))
    if a[rho[-1] - 1] == 0:
        zeros = classes.pop()
    else:
        zeros = []
    total = math.prod(math.factorial(len(c)) for c in classes)
    if total > cap:
        rev = tuple(i for c in classes for i in reversed(c)) + tuple(zeros)
        return [rho] if rev == rho else [rho, rev]
    out = []
    for perms in itertools.product(*(itertools.permutations(c) for c in classes)):
        out.append(tuple(i for p in perms for i in p) + tuple(zeros))
    return out
