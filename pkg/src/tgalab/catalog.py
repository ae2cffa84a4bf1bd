"""Named norm families and the space-config JSON format.

Config shape::

    {"kind": "weighted_lp", "dim": 4, "params": {"p": 1, "weights": [1, 0.5, 0.25, 0.125]}}

Kinds and their norms (``x*`` is the non-increasing rearrangement of ``|x|``):

=============  ===============================================
lp             ``(sum |x_n|^p)^(1/p)``, ``max |x_n|`` for p = inf
weighted_lp    ``(sum w_n |x_n|^p)^(1/p)``, ``max w_n |x_n|`` for p = inf
lorentz        ``sum w_k x*_k``, ``w`` non-increasing, ``w_1 > 0``, ``w >= 0``
functionals    ``max_j |<f_j, x>|``
max_combine    maximum of the sub-config norms
=============  ===============================================
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .space import BasisSpace

KINDS = ("lp", "weighted_lp", "lorentz", "functionals", "max_combine")

CONSTANT_NAMES = (
    "C_g", "C_ag", "C_w", "C_l", "C_qg", "K_su", "Delta", "Gamma",
    "C_A_disjoint", "C_A_greedyperm",
)


def _parse_p(value, kind):
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity", "oo"):
            return math.inf
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{kind}: p must be a number >= 1 or 'inf', got {value!r}", "params.p")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{kind}: p must be a number >= 1 or 'inf', got {value!r}", "params.p")
    p = float(value)
    if math.isnan(p) or p < 1:
        raise ConfigError(f"{kind}: p must satisfy p >= 1, got {value!r}", "params.p")
    return p


def _float_array(values, fld, dim=None):
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(f"{fld} must be an array of numbers", fld)
    if arr.ndim != 1 or (dim is not None and arr.shape[0] != dim):
        raise ConfigError(f"{fld} must have exactly {dim} entries", fld)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{fld} must be finite", fld)
    return arr


def _lp_oracle(p):
    if p == 1:
        return lambda x: np.sum(np.abs(x), axis=-1)
    if p == 2:
        return lambda x: np.sqrt(np.sum(x * x, axis=-1))
    if math.isinf(p):
        return lambda x: np.max(np.abs(x), axis=-1)
    return lambda x: np.sum(np.abs(x) ** p, axis=-1) ** (1.0 / p)


def _weighted_oracle(p, w):
    if p == 1:
        return lambda x: np.sum(w * np.abs(x), axis=-1)
    if math.isinf(p):
        return lambda x: np.max(w * np.abs(x), axis=-1)
    return lambda x: np.sum(w * np.abs(x) ** p, axis=-1) ** (1.0 / p)


def _lorentz_oracle(w):
    def oracle(x):
        mods = -np.sort(-np.abs(x), axis=-1)
        return np.sum(w * mods, axis=-1)
    return oracle


def _functionals_oracle(F):
    def oracle(x):
        return np.max(np.abs(x @ F.T), axis=-1)
    return oracle


def _max_oracle(subs):
    def oracle(x):
        vals = [np.asarray(s(x), dtype=np.float64) for s in subs]
        return np.maximum.reduce(vals)
    return oracle


def _require(config, key, fld=None):
    if key not in config:
        raise ConfigError(f"missing required field {fld or key!r}", fld or key)
    return config[key]


def normalize_config(config) -> dict:
    """Validate a config dict and return a canonical JSON-ready copy."""
    if not isinstance(config, dict):
        raise ConfigError("space config must be a JSON object", "kind")
    kind = _require(config, "kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", "kind")
    dim = _require(config, "dim")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ConfigError(f"dim must be a positive integer, got {dim!r}", "dim")
    params = config.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be a JSON object", "params")
    out = {"kind": kind, "dim": dim, "params": {}}
    if "name" in config:
        out["name"] = str(config["name"])

    if kind == "lp":
        p = _parse_p(_require(params, "p", "params.p"), kind)
        out["params"]["p"] = "inf" if math.isinf(p) else p
    elif kind == "weighted_lp":
        p = _parse_p(params.get("p", 1), kind)
        w = _float_array(_require(params, "weights", "params.weights"), "params.weights", dim)
        if np.any(w <= 0):
            raise ConfigError("weighted_lp weights must be positive", "params.weights")
        out["params"] = {"p": "inf" if math.isinf(p) else p, "weights": w.tolist()}
    elif kind == "lorentz":
        w = _float_array(_require(params, "weights", "params.weights"), "params.weights", dim)
        if w[0] <= 0 or np.any(w < 0):
            raise ConfigError("lorentz weights must be nonnegative with a positive first weight",
                              "params.weights")
        if np.any(np.diff(w) > 0):
            raise ConfigError("lorentz weights must be non-increasing", "params.weights")
        out["params"] = {"weights": w.tolist()}
    elif kind == "functionals":
        fs = _require(params, "functionals", "params.functionals")
        if not isinstance(fs, list) or not fs:
            raise ConfigError("functionals must be a non-empty list of arrays", "params.functionals")
        rows = [_float_array(f, "params.functionals", dim) for f in fs]
        out["params"] = {"functionals": [r.tolist() for r in rows]}
    else:
        subs = _require(params, "spaces", "params.spaces")
        if not isinstance(subs, list) or not subs:
            raise ConfigError("max_combine needs a non-empty list of sub-configs", "params.spaces")
        norm_subs = []
        for sub in subs:
            if isinstance(sub, dict) and "dim" not in sub:
                sub = {**sub, "dim": dim}
            sub = normalize_config(sub)
            if sub["dim"] != dim:
                raise ConfigError("max_combine sub-configs must share the parent dim", "params.spaces")
            norm_subs.append(sub)
        out["params"] = {"spaces": norm_subs}
    return out


def _oracle_for(cfg):
    kind, params = cfg["kind"], cfg["params"]
    if kind == "lp":
        return _lp_oracle(_parse_p(params["p"], kind))
    if kind == "weighted_lp":
        return _weighted_oracle(_parse_p(params["p"], kind), np.array(params["weights"]))
    if kind == "lorentz":
        return _lorentz_oracle(np.array(params["weights"]))
    if kind == "functionals":
        return _functionals_oracle(np.array(params["functionals"]))
    return _max_oracle([_oracle_for(s) for s in params["spaces"]])


def _default_name(cfg):
    kind, params, dim = cfg["kind"], cfg["params"], cfg["dim"]
    if kind == "lp":
        p = params["p"]
        p = p if p == "inf" else (int(p) if float(p).is_integer() else p)
        return f"l{p}^{dim}"
    return f"{kind}^{dim}"


def make_space(config) -> BasisSpace:
    """Build a :class:`BasisSpace` from a config dict.

    Spaces whose norm is a symmetric lattice norm (``lp`` and ``lorentz``)
    carry ``exact_constants`` with every constant equal to 1: permutation
    and sign invariance give the democracy and symmetry constants, and
    monotonicity in ``|x_n|`` gives 1-suppression unconditionality.
    """
    cfg = normalize_config(config)
    if _functional_rows(cfg) is not None and \
            np.linalg.matrix_rank(_functional_rows(cfg)) < cfg["dim"]:
        raise ConfigError("functionals must span the dual space, otherwise the norm "
                          "vanishes on a nonzero vector", "params.functionals")
    exact = None
    if cfg["kind"] in ("lp", "lorentz"):
        exact = {name: 1.0 for name in CONSTANT_NAMES}
    return BasisSpace(
        dim=cfg["dim"],
        oracle=_oracle_for(cfg),
        name=cfg.get("name", _default_name(cfg)),
        exact_constants=exact,
        config=cfg,
        lattice=_is_lattice(cfg),
    )


def _functional_rows(cfg):
    """Stacked functionals when the norm is built from functionals only, else None."""
    if cfg["kind"] == "functionals":
        return np.array(cfg["params"]["functionals"])
    if cfg["kind"] == "max_combine":
        parts = [_functional_rows(s) for s in cfg["params"]["spaces"]]
        if all(p is not None for p in parts):
            return np.vstack(parts)
    return None


def _is_lattice(cfg) -> bool:
    if cfg["kind"] == "max_combine":
        return all(_is_lattice(s) for s in cfg["params"]["spaces"])
    return cfg["kind"] in ("lp", "weighted_lp", "lorentz")


def seminormalization_bounds(space: BasisSpace) -> tuple[float, float]:
    vals = space.batch_norm(np.eye(space.dim))
    return float(vals.min()), float(vals.max())


# Named catalog.  Every entry is a lattice norm; entries with a ``None``
# dim accept any dimension.
def _harmonic(dim):
    return [1.0 / k for k in range(1, dim + 1)]


def _dyadic(dim):
    return [2.0 ** -(k - 1) for k in range(1, dim + 1)]


CATALOG = {
    "l1": (None, lambda dim: {"kind": "lp", "dim": dim, "params": {"p": 1}}),
    "l2": (None, lambda dim: {"kind": "lp", "dim": dim, "params": {"p": 2}}),
    "linf": (None, lambda dim: {"kind": "lp", "dim": dim, "params": {"p": "inf"}}),
    "l3": (None, lambda dim: {"kind": "lp", "dim": dim, "params": {"p": 3}}),
    "weighted_l1": (4, lambda dim: {"kind": "weighted_lp", "dim": 4,
                                    "params": {"p": 1, "weights": [1, 0.5, 0.25, 0.125]}}),
    "weighted_l2": (None, lambda dim: {"kind": "weighted_lp", "dim": dim,
                                       "params": {"p": 2, "weights": _dyadic(dim)}}),
    "lorentz_harmonic": (None, lambda dim: {"kind": "lorentz", "dim": dim,
                                            "params": {"weights": _harmonic(dim)}}),
}


def catalog_names():
    return tuple(CATALOG)


def catalog_space(name: str, dim: int | None = None) -> BasisSpace:
    """Instantiate a named catalog entry; fixed-dim entries reject any other ``dim``."""
    if name not in CATALOG:
        raise ConfigError(f"unknown catalog space {name!r}; known: {', '.join(CATALOG)}", "space")
    fixed, build = CATALOG[name]
    if fixed is not None:
        if dim is not None and dim != fixed:
            raise ConfigError(f"catalog space {name!r} has fixed dim {fixed}", "dim")
        dim = fixed
    if dim is None:
        raise ConfigError(f"catalog space {name!r} needs a dim", "dim")
    cfg = build(dim)
    cfg["name"] = name if fixed is not None else f"{name}^{dim}"
    return make_space(cfg)


def _shorthand_value(raw):
    if ";" in raw:
        return [float(v) for v in raw.split(";") if v]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_space_arg(arg: str) -> dict:
    """Turn a ``--space`` argument into a config dict.

    Accepted forms: a path to a JSON file, ``kind:key=value,...`` shorthand
    (lists separated by ``;``, e.g. ``weighted_lp:p=1,dim=4,weights=1;0.5;0.25;0.125``),
    or a catalog name optionally followed by ``:dim=N``.
    """
    path = Path(arg)
    if arg.endswith(".json") or path.is_file():
        try:
            return json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"space config file not found: {arg}", "space")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"space config {arg} is not valid JSON: {exc}", "space")
    head, _, tail = arg.partition(":")
    fields = {}
    for item in filter(None, tail.split(",")):
        key, eq, raw = item.partition("=")
        if not eq:
            raise ConfigError(f"malformed shorthand item {item!r} (expected key=value)", "space")
        fields[key.strip()] = _shorthand_value(raw.strip())
    if head in CATALOG:
        return catalog_space(head, fields.get("dim")).config
    if head not in KINDS:
        raise ConfigError(f"unknown space kind or catalog name {head!r}", "kind")
    if "dim" not in fields:
        raise ConfigError("shorthand needs dim=N", "dim")
    dim = fields.pop("dim")
    return {"kind": head, "dim": dim, "params": fields}
