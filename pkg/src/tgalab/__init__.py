"""Greedy-type basis constants on finite-dimensional normed spaces.

Norms are black-box oracles on coefficient vectors in the canonical basis;
constants are exhaustive maxima over finite coefficient families, each
returned with a witness that reproduces it.
"""

from .catalog import CONSTANT_NAMES, catalog_names, catalog_space, make_space, parse_space_arg
from .errors import CapExceededError, ConfigError, TgaError
from .estimators import ConstantEstimate, estimate_constants, evaluate_witness
from .families import (FamilyDescriptor, close_under_constructions, parse_family_arg,
                       sign_grid_family)
from .harness import CHECK_NAMES, CheckReport, HarnessContext, run_checks
from .mterm import best_mterm_error
from .space import BasisSpace, validate_norm

__version__ = "0.1.0"

__all__ = [
    "BasisSpace", "CHECK_NAMES", "CONSTANT_NAMES", "CapExceededError", "CheckReport",
    "ConfigError", "ConstantEstimate", "FamilyDescriptor", "HarnessContext", "TgaError",
    "best_mterm_error", "catalog_names", "catalog_space", "close_under_constructions",
    "estimate_constants", "evaluate_witness", "make_space", "parse_family_arg",
    "parse_space_arg", "run_checks", "sign_grid_family", "validate_norm",
]
