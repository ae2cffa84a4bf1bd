import json

import numpy as np
import pytest

from tgalab.catalog import catalog_space, make_space
from tgalab.errors import ConfigError
from tgalab.estimators import ConstantEstimate
from tgalab.families import Family
from tgalab.greedy import apply_multiplier
from tgalab.harness import (CHECK_NAMES, MAX_REPORTED, HarnessContext, check_monotone_multiplier,
                            monotone_multiplier_grid, rerun_violation, run_checks)

from conftest import closed_family, max_functional_config, summing_config, weighted_l1_config


def run_all(space, family, names=None, **kw):
    return {r.check_name: r for r in run_checks(HarnessContext(space, family, **kw), names)}


@pytest.fixture(scope="module")
def weighted_reports(family4):
    return run_all(make_space(weighted_l1_config()), family4)


@pytest.mark.parametrize("name", ["l1", "l2", "linf", "l3", "weighted_l2", "lorentz_harmonic"])
def test_catalog_spaces_pass_dim3(family3, name):
    reports = run_all(catalog_space(name, 3), family3)
    assert list(reports) == list(CHECK_NAMES)
    for r in reports.values():
        assert r.passed, (r.check_name, r.violations[:1])
        assert r.instances_tested > 0 and r.total_violations == 0


def test_weighted_l1_passes_with_family_constants(weighted_reports):
    for r in weighted_reports.values():
        assert r.passed, (r.check_name, r.violations[:1])
    assert weighted_reports["extended_almost_greedy"].constants["C_ag"] > 1


def test_property_a_vacuous_on_weighted_l1(weighted_reports):
    r = weighted_reports["property_a"]
    assert r.constants["C_ag"] > 1 and r.constants["C_A_disjoint"] > 1
    assert any("consistent" in n for n in r.notes)


def test_lp_constants_in_reports(family4):
    reports = run_all(catalog_space("l2", 4), family4,
                      ["extended_almost_greedy", "property_a", "isometric_corollaries"])
    assert reports["extended_almost_greedy"].constants["C_ag"] == 1.0
    assert reports["property_a"].constants == {"C_A_disjoint": 1.0, "C_ag": 1.0, "C_l": 1.0}
    assert reports["isometric_corollaries"].passed


def test_dimension_one_sign_flip():
    sp = make_space({"kind": "functionals", "dim": 1, "params": {"functionals": [[2.0]]}})
    fam = closed_family(1)
    r = run_all(sp, fam, ["property_a"])["property_a"]
    assert r.passed and r.constants["C_A_disjoint"] == 1.0 and r.constants["C_ag"] == 1.0
    assert r.counts.get("sign_flip", 0) > 0


@pytest.mark.parametrize("cfg", [summing_config(3), max_functional_config(3)])
def test_non_lattice_norms_pass_dim3(family3, cfg):
    for r in run_all(make_space(cfg), family3).values():
        assert r.passed, (r.check_name, r.violations[:1])


def test_windows_l2_dim5():
    fam = closed_family(5, (0.0, 1.0))
    r = run_all(catalog_space("l2", 5), fam, ["multiplier_windows"])["multiplier_windows"]
    assert r.passed and r.instances_tested > 1000


def test_linf_reformulation_dim4(family4):
    r = run_all(catalog_space("linf", 4), family4, ["symmetry_reformulation"])
    assert r["symmetry_reformulation"].passed


def test_multiplier_example_l1():
    sp = catalog_space("l1", 4)
    v = np.ones(4)
    lhs = sp.norm(apply_multiplier(v, (0.2, 0.5, 1, 1), (1, 2, 3, 4)))
    assert abs(lhs - 2.7) < 1e-15 and lhs <= sp.norm(v)


def test_multiplier_grid_is_monotone():
    g = monotone_multiplier_grid(4)
    assert np.all(np.diff(g, axis=1) >= 0) and g.min() >= 0 and g.max() <= 1
    assert any(np.array_equal(r, np.ones(4)) for r in g)


def test_report_scope_and_serialization(family3):
    r = run_all(catalog_space("l2", 3), family3, ["monotone_multiplier"])["monotone_multiplier"]
    d = json.loads(json.dumps(r.to_dict(), allow_nan=False))
    assert "family" in d["scope"]
    # the histogram covers the inequality clauses, not the exact identities
    assert 0 < sum(d["gap_histogram"].values()) <= d["instances_tested"]


def test_unclosed_family_is_flagged():
    fam = Family(np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 1.0]]))
    r = run_all(catalog_space("l2", 3), fam, ["monotone_multiplier"])["monotone_multiplier"]
    assert any("not closed" in n for n in r.notes)


def test_unknown_check_rejected(family3):
    with pytest.raises(ConfigError) as exc:
        run_checks(HarnessContext(catalog_space("l2", 3), family3), ["nope"])
    assert exc.value.field == "checks"


def test_alias_accepted(family3):
    (r,) = run_checks(HarnessContext(catalog_space("l2", 3), family3), ["main_theorem"])
    assert r.check_name == "property_a"


def _planted(space, family, value):
    """A context whose C_l is deliberately too small, so the chain must fail."""
    fake = ConstantEstimate("C_l", value, None, {}, "family_lower_bound")
    return HarnessContext(space, family, estimates={"C_l": fake})


def test_violations_are_capped_and_replayable(family3):
    sp = catalog_space("l2", 3)
    r = check_monotone_multiplier(_planted(sp, family3, 0.5))
    assert not r.passed
    assert r.total_violations > MAX_REPORTED == len(r.violations)
    replayable = [v for v in r.violations if "lhs_terms" in v]
    assert replayable
    for v in replayable:
        lhs, rhs = rerun_violation(sp, json.loads(json.dumps(v)))
        assert abs(lhs - v["lhs"]) <= 1e-12 and abs(rhs - v["rhs"]) <= 1e-12


def test_violation_order_is_stable(family3):
    sp = catalog_space("l2", 3)
    a = check_monotone_multiplier(_planted(sp, family3, 0.5)).to_dict()
    b = check_monotone_multiplier(_planted(sp, family3, 0.5)).to_dict()
    assert json.dumps(a) == json.dumps(b)


def test_constant_level_violation_replays():
    # in dimension two this norm has C_l = 2 but no disjoint room for the
    # symmetry constant to exceed one, so the forward clause fails
    sp = make_space(max_functional_config(2))
    r = run_all(sp, closed_family(2), ["property_a"])["property_a"]
    assert not r.passed
    v = r.violations[0]
    assert rerun_violation(sp, v) == (v["lhs"], v["rhs"])


def test_worker_count_does_not_change_reports(family3):
    sp = make_space(summing_config(3))
    a = [r.to_dict() for r in run_checks(HarnessContext(sp, family3, workers=1))]
    b = [r.to_dict() for r in run_checks(HarnessContext(sp, family3, workers=8))]
    assert json.dumps(a) == json.dumps(b)
