import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tgalab.catalog import CONSTANT_NAMES, catalog_names, catalog_space, make_space
from tgalab.errors import ConfigError
from tgalab.estimators import (almost_greedy_constant, democracy_constants, estimate_constants,
                               evaluate_witness, greedy_constant, guarded_ratio, map_chunks,
                               quasi_greedy_constants, suppression_unconditional_constant,
                               symmetry_largest_constant)
from tgalab.families import Family, FamilyDescriptor, sign_grid_family

import oracles
from conftest import closed_family, max_functional_config, summing_config, weighted_l1_config

NONLATTICE = {"summing": summing_config(3), "max_functional": max_functional_config(3)}


def spaces3():
    out = {name: catalog_space(name, 3) for name in catalog_names() if name != "weighted_l1"}
    out.update({k: make_space(c) for k, c in NONLATTICE.items()})
    return out


@pytest.fixture(scope="module")
def runs3(family3):
    return {k: estimate_constants(sp, family3) for k, sp in spaces3().items()}


# helpers -----------------------------------------------------------------


def test_guarded_ratio():
    assert guarded_ratio(1.0, 2.0) == 0.5
    assert guarded_ratio(0.0, 0.0) == 1.0
    assert guarded_ratio(1.0, 0.0) == -np.inf
    assert guarded_ratio(np.array([0.0, 3.0]), np.array([0.0, 1.5])).tolist() == [1.0, 2.0]


@given(st.integers(0, 5000), st.integers(1, 8), st.integers(1, 700))
def test_map_chunks_is_worker_invariant(n, workers, chunk):
    fn = lambda lo, hi: list(range(lo, hi))
    out = map_chunks(fn, n, workers, chunk)
    assert [i for part in out for i in part] == list(range(n))
    assert out == map_chunks(fn, n, 1, chunk)


def test_unknown_constant_rejected(family3):
    with pytest.raises(ConfigError) as exc:
        estimate_constants(catalog_space("l2", 3), family3, ["C_zz"])
    assert exc.value.field == "constants"


# lp spaces: every constant is one ----------------------------------------


@pytest.mark.parametrize("name", ["l1", "l2", "linf", "l3"])
def test_lp_constants_are_one(runs3, name):
    for c, est in runs3[name].estimates.items():
        tol = 1e-6 if c == "C_g" else 1e-9
        assert abs(est.value - 1.0) <= tol, c
        assert est.bound_kind == "analytic_exact" and est.exact_value == 1.0


def test_non_lp_bound_kind(runs3):
    assert all(e.bound_kind == "family_lower_bound" for e in runs3["summing"].estimates.values())


# brute-force comparisons on dimension three --------------------------------


@pytest.mark.parametrize("name", sorted(spaces3()))
def test_suppression_unconditional_matches_scan(runs3, family3, name):
    sp = spaces3()[name]
    ref = oracles.suppression_unconditional(sp.norm, family3.vectors)
    est = runs3[name].estimates["K_su"]
    assert est.value == pytest.approx(ref, abs=1e-12)
    assert est.extra["forms_equal"]


@pytest.mark.parametrize("name", sorted(spaces3()))
def test_quasi_greedy_matches_scan(runs3, family3, name):
    sp = spaces3()[name]
    cw, cl = oracles.quasi_greedy(sp.norm, family3.vectors)
    e = runs3[name].estimates
    assert e["C_w"].value == pytest.approx(cw, abs=1e-12)
    assert e["C_l"].value == pytest.approx(cl, abs=1e-12)
    assert e["C_qg"].value == max(e["C_w"].value, e["C_l"].value)


@pytest.mark.parametrize("name", sorted(spaces3()))
def test_almost_greedy_matches_scan(runs3, family3, name):
    sp = spaces3()[name]
    ref = oracles.almost_greedy(sp.norm, family3.vectors)
    assert runs3[name].estimates["C_ag"].value == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("name", sorted(spaces3()))
def test_democracy_matches_scan(runs3, name):
    sp = spaces3()[name]
    e = runs3[name].estimates
    assert e["Delta"].value == pytest.approx(oracles.democracy(sp.norm, 3, [1, 2, 3], False), abs=1e-12)
    assert e["Gamma"].value == pytest.approx(oracles.democracy(sp.norm, 3, [1, 2, 3], True), abs=1e-12)
    assert e["Gamma"].value >= e["Delta"].value


@pytest.mark.parametrize("name", sorted(spaces3()))
def test_symmetry_matches_scan(runs3, family3, name):
    sp = spaces3()[name]
    e = runs3[name].estimates
    for key, disjoint in (("C_A_disjoint", True), ("C_A_greedyperm", False)):
        ref = oracles.symmetry(sp.norm, family3.vectors, disjoint)
        assert e[key].value == pytest.approx(ref, abs=1e-12), key


@pytest.mark.parametrize("name", ["summing", "max_functional", "lorentz_harmonic"])
def test_greedy_constant_matches_grid_sigma(name):
    sp = spaces3()[name]
    fam = closed_family(3, (0.0, 1.0))
    est = greedy_constant(sp, fam)
    ref = 1.0
    for x in fam.vectors:
        for m in range(1, 3):
            s = oracles.sigma(sp.batch_norm, x, m)
            for E in oracles.greedy_sets(x, m):
                num = sp.norm(x - oracles.project(x, E))
                ref = max(ref, 1.0 if s < 1e-12 and num < 1e-12 else num / s)
    # descent values are upper bounds on sigma, so the estimate may only sit below
    assert ref - 1e-6 <= est.value <= ref + 1e-9


# worked examples -----------------------------------------------------------


def test_max_functional_ksu_is_two():
    sp = make_space(max_functional_config(2))
    fam = sign_grid_family(FamilyDescriptor(dim=2, levels=(0, 1)))
    est = suppression_unconditional_constant(sp, fam)
    assert est.value == 2.0 == oracles.suppression_unconditional(sp.norm, fam.vectors)
    assert evaluate_witness(sp, est.witness)[2] == 2.0


def test_l1_quasi_greedy_instance():
    sp = catalog_space("l1", 2)
    cw, cl, cqg = quasi_greedy_constants(sp, Family(np.array([[1.0, -1.0]])))
    assert cw.value == cl.value == cqg.value == 1.0
    assert sp.norm((1, 0)) / sp.norm((1, -1)) == 0.5


def test_weighted_l1_democracy_is_four():
    sp = make_space(weighted_l1_config())
    delta, gamma = democracy_constants(sp, [2])
    assert delta.value == 4.0
    assert delta.witness["A"] == [1, 2] and delta.witness["B"] == [3, 4]
    assert delta.value == oracles.democracy(sp.norm, 4, [2], False)
    assert gamma.value >= delta.value
    assert evaluate_witness(sp, delta.witness) == (1.5, 0.375, 4.0)


def test_weighted_l1_all_cardinalities():
    sp = make_space(weighted_l1_config())
    delta, _ = democracy_constants(sp)
    assert delta.value == 8.0 == oracles.democracy(sp.norm, 4, [1, 2, 3], False)


def test_weighted_l1_not_almost_greedy(family4):
    sp = make_space(weighted_l1_config())
    est = almost_greedy_constant(sp, family4)
    assert est.value > 1
    assert evaluate_witness(sp, est.witness)[2] == est.value


def test_lp_symmetry_dim_four(family4):
    for name in ("l1", "l2", "linf"):
        sp = catalog_space(name, 4)
        assert symmetry_largest_constant(sp, family4).value == 1.0


def test_greedy_constant_l2_and_linf(family4, family3):
    assert abs(greedy_constant(catalog_space("l2", 4), family4).value - 1) <= 1e-6
    assert abs(greedy_constant(catalog_space("linf", 3), family3).value - 1) <= 1e-6


# relations and witnesses -----------------------------------------------------


@pytest.mark.parametrize("name", sorted(spaces3()))
def test_order_relations(runs3, name):
    v = {k: e.value for k, e in runs3[name].estimates.items()}
    assert v["C_l"] <= v["C_ag"] + 1e-12
    assert v["C_A_disjoint"] <= v["C_ag"] + 1e-12
    assert v["C_ag"] <= v["C_g"] + 1e-6
    assert v["C_qg"] == max(v["C_w"], v["C_l"])
    assert v["C_A_greedyperm"] <= v["C_A_disjoint"] ** 2 + 1e-9
    assert v["Gamma"] >= v["Delta"]


@pytest.mark.parametrize("name", sorted(spaces3()))
def test_witnesses_reproduce(runs3, name):
    sp = spaces3()[name]
    for c, est in runs3[name].estimates.items():
        if est.witness is None:
            continue
        lhs, rhs, ratio = evaluate_witness(sp, json.loads(json.dumps(est.witness)))
        assert abs(ratio - est.value) <= 1e-12, c


def test_almost_greedy_variants_agree(runs3):
    for run in runs3.values():
        extra = run.estimates["C_ag"].extra
        assert extra["value_at_most_m_with_room"] == run.estimates["C_ag"].value


def test_estimates_worker_invariant(family3):
    sp = make_space(summing_config(3))
    a = estimate_constants(sp, family3, workers=1)
    b = estimate_constants(sp, family3, workers=4)
    dump = lambda r: json.dumps([e.to_dict() for e in r.estimates.values()])
    assert dump(a) == dump(b)


def test_all_names_estimated(runs3):
    assert tuple(runs3["l2"].estimates) == CONSTANT_NAMES
