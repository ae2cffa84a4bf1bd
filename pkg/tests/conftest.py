import sys
from pathlib import Path

import numpy as np
import pytest

from tgalab.catalog import catalog_space, make_space
from tgalab.families import FamilyDescriptor, close_under_constructions, sign_grid_family

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]


def summing_config(dim):
    return {"kind": "functionals", "dim": dim,
            "params": {"functionals": [[1.0] * k + [0.0] * (dim - k) for k in range(1, dim + 1)]}}


def max_functional_config(dim):
    """max(|x_1 + x_2|, 0.5 max|x_n|): unconditional with K_su = 2."""
    return {"kind": "max_combine", "dim": dim, "params": {"spaces": [
        {"kind": "functionals", "params": {"functionals": [[1.0, 1.0] + [0.0] * (dim - 2)]}},
        {"kind": "weighted_lp", "params": {"p": "inf", "weights": [0.5] * dim}}]}}


def weighted_l1_config():
    return {"kind": "weighted_lp", "dim": 4,
            "params": {"p": 1, "weights": [1, 0.5, 0.25, 0.125]}}


def closed_family(dim, levels=(0.0, 0.5, 1.0)):
    return close_under_constructions(sign_grid_family(FamilyDescriptor(dim=dim, levels=levels)))


@pytest.fixture(scope="session")
def family3():
    return closed_family(3)


@pytest.fixture(scope="session")
def family4():
    return closed_family(4)


@pytest.fixture(scope="session")
def summing3():
    return make_space(summing_config(3))


@pytest.fixture(scope="session")
def maxfun3():
    return make_space(max_functional_config(3))


def sigma_spaces():
    """Catalog norms plus non-lattice norms where the solver has real work."""
    rng = np.random.default_rng(7)
    F = rng.integers(-2, 3, size=(5, 3)).astype(float).tolist() + np.eye(3).tolist()
    return [
        catalog_space("l1", 3), catalog_space("l2", 3), catalog_space("linf", 3),
        catalog_space("l3", 4), catalog_space("weighted_l1"), catalog_space("weighted_l2", 3),
        catalog_space("lorentz_harmonic", 4),
        make_space(summing_config(3)), make_space(summing_config(4)),
        make_space(max_functional_config(3)),
        make_space({"kind": "functionals", "dim": 3, "params": {"functionals": F}}),
    ]


def sigma_triples(count=100, seed=2024):
    """Deterministic sample of (space, x, m) with x on a quarter grid."""
    rng = np.random.default_rng(seed)
    spaces = sigma_spaces()
    out = []
    for i in range(count):
        sp = spaces[i % len(spaces)]
        x = rng.integers(-4, 5, size=sp.dim) / 4.0
        if not np.any(x):
            x[0] = 1.0
        m = int(rng.integers(1, sp.dim))
        out.append((sp, x, m))
    return out


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def record_criterion(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
