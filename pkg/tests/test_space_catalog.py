import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tgalab.catalog import (CONSTANT_NAMES, catalog_names, catalog_space, make_space,
                            normalize_config, parse_space_arg, seminormalization_bounds)
from tgalab.errors import ConfigError, TgaError
from tgalab.space import (BasisSpace, as_coeffs, complement, index_set, indices_of, mask_of,
                          norm, project, subset_masks, support, validate_norm)

from conftest import max_functional_config, summing_config, weighted_l1_config

coeff = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vec(dim):
    return st.lists(coeff, min_size=dim, max_size=dim).map(np.array)


# norms -----------------------------------------------------------------


def test_euclidean_norm():
    assert norm(catalog_space("l2", 2), (3, 4)) == 5.0


def test_l1_norm():
    assert norm(catalog_space("l1", 3), (1, -1, 0.5)) == 2.5


def test_weighted_l1_norm():
    assert norm(make_space(weighted_l1_config()), (1, 1, 1, 1)) == 1.875


def test_lp_three_ones():
    sp = make_space({"kind": "lp", "dim": 3, "params": {"p": 2}})
    assert math.isclose(sp.norm(np.ones(3)), math.sqrt(3), rel_tol=1e-15)


def test_lorentz_sorts_moduli():
    sp = make_space({"kind": "lorentz", "dim": 2, "params": {"weights": [1, 0.5]}})
    assert sp.norm((1, -3)) == 3.5


def test_max_combine():
    sp = make_space({"kind": "max_combine", "dim": 2, "params": {"spaces": [
        {"kind": "lp", "params": {"p": 1}}, {"kind": "lp", "params": {"p": "inf"}}]}})
    assert sp.norm((1, 1)) == 2.0


def test_batch_norm_matches_single():
    sp = catalog_space("lorentz_harmonic", 4)
    X = np.random.default_rng(0).normal(size=(20, 4))
    assert np.array_equal(sp.norm(X), np.array([sp.norm(x) for x in X]))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(catalog_names()), st.data())
def test_catalog_norm_axioms(name, data):
    sp = catalog_space(name, 4)
    x, y = data.draw(vec(sp.dim)), data.draw(vec(sp.dim))
    c = data.draw(coeff)
    nx, ny = sp.norm(x), sp.norm(y)
    assert nx >= 0
    assert sp.norm(x + y) <= nx + ny + 1e-9 * (1 + nx + ny)
    assert math.isclose(sp.norm(c * x), abs(c) * nx, rel_tol=1e-12, abs_tol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(catalog_names()), st.data())
def test_catalog_norms_are_lattice(name, data):
    # every catalog norm is nondecreasing in each modulus
    sp = catalog_space(name, 4)
    x = data.draw(vec(sp.dim))
    k = data.draw(st.integers(0, sp.dim - 1))
    y = x.copy()
    y[k] = 0.0
    assert sp.lattice
    assert sp.norm(y) <= sp.norm(x) + 1e-12


# index sets and projections ---------------------------------------------


def test_project_examples():
    assert project((3, 2, 1), (1, 3)).tolist() == [3, 0, 1]
    assert project((3, 2, 1), ()).tolist() == [0, 0, 0]
    assert project((3, 2, 1), (1, 2, 3)).tolist() == [3, 2, 1]


@given(vec(5), st.sets(st.integers(1, 5)))
def test_projection_splits_vector(v, A):
    A = index_set(A, 5)
    assert np.array_equal(project(v, A) + project(v, complement(A, 5)), v)
    assert indices_of(mask_of(A, 5)) == A


def test_support_is_one_based():
    assert support((0, 2, 0, -1)) == (2, 4)


def test_index_validation():
    with pytest.raises(TgaError):
        index_set([0], 3)
    with pytest.raises(TgaError):
        index_set([4], 3)
    with pytest.raises(TgaError):
        as_coeffs([1, np.nan])


def test_subset_masks_order():
    m = subset_masks(3)
    assert [tuple(indices_of(r)) for r in m] == [
        (), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]
    assert subset_masks(4, [2]).shape == (6, 4)


# validation --------------------------------------------------------------


def test_validate_l2_passes():
    rep = validate_norm(catalog_space("l2", 3), np.random.default_rng(1).normal(size=(10, 3)))
    assert rep.passed and rep.checks > 0


def test_validate_signed_sum_fails_positivity():
    sp = BasisSpace(2, lambda x: np.abs(x.sum(axis=-1)))
    rep = validate_norm(sp, [(1, -1)])
    assert not rep.passed and rep.violation == "positivity"
    assert rep.witness == [[1.0, -1.0]]


def test_validate_non_spanning_functionals():
    F = np.array([[1.0, 1.0]])
    sp = BasisSpace(2, lambda x: np.max(np.abs(x @ F.T), axis=-1))
    rep = validate_norm(sp, [(1, 0)])
    assert not rep.passed and rep.violation == "positivity"


def test_validate_catches_nonconvex_oracle():
    sp = BasisSpace(2, lambda x: np.sum(np.sqrt(np.abs(x)), axis=-1) ** 2)
    rep = validate_norm(sp, [(1, 0), (0, 1)])
    assert not rep.passed and rep.violation in ("homogeneity", "triangle")


def test_make_space_rejects_invalid_norm():
    with pytest.raises(ConfigError) as exc:
        make_space({"kind": "functionals", "dim": 2, "params": {"functionals": [[1, -1]]}})
    assert exc.value.field == "params.functionals"


# catalog and configs -----------------------------------------------------


def test_seminormalization_bounds():
    assert seminormalization_bounds(catalog_space("l3", 5)) == (1.0, 1.0)
    assert seminormalization_bounds(make_space(weighted_l1_config())) == (0.125, 1.0)
    sp = make_space({"kind": "lorentz", "dim": 3, "params": {"weights": [1, 0.5, 0.25]}})
    assert seminormalization_bounds(sp) == (1.0, 1.0)


def test_lp_spaces_carry_exact_constants():
    for name in ("l1", "l2", "linf", "l3"):
        sp = catalog_space(name, 3)
        assert dict(sp.exact_constants) == {c: 1.0 for c in CONSTANT_NAMES}
    assert not make_space(weighted_l1_config()).exact_constants


def test_weighted_l1_has_fixed_dim():
    assert catalog_space("weighted_l1").dim == 4
    with pytest.raises(ConfigError):
        catalog_space("weighted_l1", 6)


@pytest.mark.parametrize("cfg,field", [
    ({"kind": "lp", "dim": 3, "params": {"p": 0.5}}, "params.p"),
    ({"kind": "lp", "dim": 0, "params": {"p": 2}}, "dim"),
    ({"kind": "nope", "dim": 2}, "kind"),
    ({"kind": "weighted_lp", "dim": 2, "params": {"p": 1, "weights": [1, -1]}}, "params.weights"),
    ({"kind": "weighted_lp", "dim": 2, "params": {"p": 1, "weights": [1]}}, "params.weights"),
    ({"kind": "lorentz", "dim": 2, "params": {"weights": [0.5, 1]}}, "params.weights"),
])
def test_config_errors_name_field(cfg, field):
    with pytest.raises(ConfigError) as exc:
        make_space(cfg)
    assert exc.value.field == field


def test_normalize_config_is_canonical():
    cfg = normalize_config({"kind": "lp", "dim": 2, "params": {"p": "inf"}})
    assert cfg == {"kind": "lp", "dim": 2, "params": {"p": "inf"}}
    assert normalize_config(cfg) == cfg


def test_parse_space_arg_forms(tmp_path):
    assert parse_space_arg("lp:p=2,dim=6") == {"kind": "lp", "dim": 6, "params": {"p": 2}}
    assert make_space(parse_space_arg("l2:dim=3")).dim == 3
    sp = make_space(parse_space_arg("weighted_lp:p=1,dim=4,weights=1;0.5;0.25;0.125"))
    assert sp.norm(np.ones(4)) == 1.875
    p = tmp_path / "s.json"
    p.write_text('{"kind": "functionals", "dim": 3, "params": {"functionals": '
                 '[[1, 0, 0], [1, 1, 0], [1, 1, 1]]}}')
    assert make_space(parse_space_arg(str(p))).config == normalize_config(summing_config(3))
    with pytest.raises(ConfigError):
        parse_space_arg(str(tmp_path / "missing.json"))


def test_non_lattice_examples_detected():
    assert not make_space(summing_config(3)).lattice
    assert not make_space(max_functional_config(3)).lattice
