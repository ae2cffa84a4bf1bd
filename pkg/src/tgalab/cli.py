"""``tga-lab``: estimate constants, run the check suites, replay witnesses.

JSON is the source of truth; CSV files are derived from it.  Floats are
written with Python's shortest round-trip representation, so reading a
file back gives the same 64-bit values.  Nothing run-specific (timings,
worker count) is written, so outputs are byte-identical across runs.

Exit codes: 0 success, 1 violation or witness mismatch, 2 configuration
error, 3 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import CONSTANT_NAMES, catalog_names, make_space, parse_space_arg
from .errors import CapExceededError, ConfigError, TgaError
from .estimators import default_workers, estimate_constants, evaluate_witness
from .families import close_under_constructions, parse_family_arg, sign_grid_family
from .harness import CHECK_ALIASES, CHECK_NAMES, DEFAULT_TOL, HarnessContext, rerun_violation, run_checks

REPRODUCE_TOL = 1e-12


@dataclass
class RunConfig:
    space: dict
    family: object
    checks: list = field(default_factory=lambda: list(CHECK_NAMES))
    constants: list = field(default_factory=lambda: list(CONSTANT_NAMES))
    output_dir: Path = Path("tga-out")
    format: str = "json"
    workers: int = 1
    tolerance: float = DEFAULT_TOL
    cardinalities: list | None = None


def _names(arg, known, what, aliases=None):
    if arg is None or arg == "all":
        return list(known)
    names = [a.strip() for a in arg.split(",") if a.strip()]
    names = [(aliases or {}).get(a, a) for a in names]
    unknown = [a for a in names if a not in known]
    if unknown or not names:
        raise ConfigError(f"unknown {what}: {unknown}; known: {', '.join(known)}", what)
    return names


def build_config(args) -> RunConfig:
    if getattr(args, "space", None) is None:
        raise ConfigError("--space is required", "space")
    space_cfg = parse_space_arg(args.space)
    space = make_space(space_cfg)
    family = parse_family_arg(args.family, space.dim)
    if family.dim != space.dim:
        raise ConfigError(f"family dim {family.dim} differs from space dim {space.dim}",
                          "family.dim")
    cards = None
    if getattr(args, "cardinalities", None):
        try:
            cards = sorted({int(k) for k in args.cardinalities.split(",") if k.strip()})
        except ValueError:
            raise ConfigError("--cardinalities takes comma-separated integers", "cardinalities")
        if not cards or cards[0] < 1 or cards[-1] > space.dim:
            raise ConfigError(f"cardinalities must lie in [1, {space.dim}]", "cardinalities")
    workers = args.workers if args.workers is not None else default_workers()
    if workers < 1:
        raise ConfigError("--workers must be positive", "workers")
    if not args.tolerance >= 0:
        raise ConfigError("--tolerance must be nonnegative", "tolerance")
    return RunConfig(
        space=space.config,
        family=family,
        checks=_names(getattr(args, "checks", None), CHECK_NAMES, "checks", CHECK_ALIASES),
        constants=_names(getattr(args, "constants", None), CONSTANT_NAMES, "constants"),
        output_dir=Path(args.output_dir),
        format=args.format,
        workers=workers,
        tolerance=args.tolerance,
        cardinalities=cards,
    )


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _prepare(cfg: RunConfig):
    space = make_space(cfg.space)
    family = close_under_constructions(sign_grid_family(cfg.family))
    return space, family


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v) for v in r])
    return buf.getvalue()


def cmd_constants(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    space, family = _prepare(cfg)
    run = estimate_constants(space, family, cfg.constants, cfg.workers, cfg.cardinalities)
    rows = []
    for name, est in run.estimates.items():
        wit_ref = None
        if est.witness is not None:
            wit_ref = f"witnesses/{name}.json"
            _write(cfg.output_dir / wit_ref, dumps({
                "constant": name, "value": est.value, "space": cfg.space,
                "witness": est.witness}))
        d = est.to_dict()
        d["witness_file"] = wit_ref
        rows.append(d)
        exact = "" if est.exact_value is None else f" (exact {est.exact_value!r})"
        print(f"{name:15s} {est.value!r:>22} {est.bound_kind}{exact}", file=out)
    doc = {"space": cfg.space, "family": family.describe(),
           "cardinalities": cfg.cardinalities, "constants": rows}
    _write(cfg.output_dir / "constants.json", dumps(doc))
    if cfg.format == "csv":
        _write(cfg.output_dir / "constants.csv", _csv(
            [(r["name"], r["value"], r["bound_kind"], r["exact_value"], r["witness_file"])
             for r in rows], ["name", "value", "bound_kind", "exact_value", "witness_file"]))
    return 0


def cmd_verify(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    space, family = _prepare(cfg)
    ctx = HarnessContext(space, family, cfg.workers, cfg.tolerance,
                         cardinalities=cfg.cardinalities)
    reports = run_checks(ctx, cfg.checks)
    docs = []
    for rep in reports:
        d = {**rep.to_dict(), "space": cfg.space}
        docs.append(d)
        _write(cfg.output_dir / "reports" / f"{rep.check_name}.json", dumps(d))
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {rep.check_name:32s} instances={rep.instances_tested} "
              f"violations={rep.total_violations}", file=out)
    _write(cfg.output_dir / "verify.json", dumps({
        "space": cfg.space, "family": family.describe(), "tolerance": cfg.tolerance,
        "passed": all(r.passed for r in reports), "reports": docs}))
    if cfg.format == "csv":
        _write(cfg.output_dir / "verify.csv", _csv(
            [(r.check_name, r.passed, r.instances_tested, r.total_violations, r.tolerance)
             for r in reports],
            ["check", "passed", "instances_tested", "total_violations", "tolerance"]))
    return 0 if all(r.passed for r in reports) else 1


def _load_json(path: Path):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}", "witness")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}", "witness")


def cmd_witness(target: str, output_dir: Path, instance: int | None = None,
                out=None) -> int:
    """Replay a constant witness, or one violation of a check report."""
    out = out or sys.stdout
    path = Path(target)
    if not path.is_file():
        if target in CONSTANT_NAMES:
            path = output_dir / "witnesses" / f"{target}.json"
        elif target in CHECK_NAMES:
            path = output_dir / "reports" / f"{target}.json"
    doc = _load_json(path)
    if "check_name" in doc:
        space = make_space(doc["space"])
        viols = doc.get("violations", [])
        k = 0 if instance is None else instance
        if not 0 <= k < len(viols):
            raise ConfigError(f"report has {len(viols)} recorded violations; no instance {k}",
                              "instance")
        v = viols[k]
        lhs, rhs = rerun_violation(space, v)
        print(f"{doc['check_name']}[{k}] {v['clause']}: lhs={lhs!r} rhs={rhs!r}", file=out)
        ok = abs(lhs - v["lhs"]) <= REPRODUCE_TOL and abs(rhs - v["rhs"]) <= REPRODUCE_TOL
        print("reproduced" if ok else "MISMATCH", file=out)
        return 0 if ok else 1
    try:
        space = make_space(doc["space"])
        lhs, rhs, ratio = evaluate_witness(space, doc["witness"])
        recorded = float(doc["value"])
    except (KeyError, TypeError) as exc:
        print(f"malformed witness file: {exc!r}", file=out)
        return 1
    except TgaError as exc:
        print(f"witness does not describe a valid instance: {exc}", file=out)
        return 1
    print(f"{doc['constant']}: lhs={lhs!r} rhs={rhs!r} ratio={ratio!r} recorded={recorded!r}",
          file=out)
    ok = abs(ratio - recorded) <= REPRODUCE_TOL
    print("reproduced" if ok else "MISMATCH", file=out)
    return 0 if ok else 1


def cmd_report(output_dir: Path, fmt: str = "json", out=None) -> int:
    """Summarise a results directory and write a plot-ready summary table."""
    out = out or sys.stdout
    rows = []
    cpath, vpath = output_dir / "constants.json", output_dir / "verify.json"
    if cpath.is_file():
        for r in _load_json(cpath)["constants"]:
            rows.append({"kind": "constant", "name": r["name"], "value": r["value"],
                         "bound_kind": r["bound_kind"], "exact_value": r["exact_value"],
                         "passed": None, "instances": None})
    if vpath.is_file():
        for r in _load_json(vpath)["reports"]:
            rows.append({"kind": "check", "name": r["check_name"], "value": None,
                         "bound_kind": None, "exact_value": None, "passed": r["passed"],
                         "instances": r["instances_tested"]})
    if not rows:
        raise ConfigError(f"no constants.json or verify.json in {output_dir}", "output_dir")
    for r in rows:
        if r["kind"] == "constant":
            print(f"constant {r['name']:15s} {r['value']!r:>22} {r['bound_kind']}", file=out)
        else:
            print(f"check    {r['name']:32s} {'PASS' if r['passed'] else 'FAIL'} "
                  f"({r['instances']} instances)", file=out)
    _write(output_dir / "summary.json", dumps(rows))
    if fmt == "csv":
        header = list(rows[0])
        _write(output_dir / "summary.csv", _csv([[r[h] for h in header] for r in rows], header))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tga-lab",
        description="Greedy-type basis constants and their characterization checks "
                    "on finite-dimensional spaces.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, checks=False, constants=False):
        sp.add_argument("--space", help="JSON config path, kind:key=val,... shorthand, or one "
                        f"of the catalog names {', '.join(catalog_names())}")
        sp.add_argument("--family", help="family JSON path or key=val shorthand "
                        "(levels=0;0.5;1,include_signs=true,cap=200000)")
        if constants:
            sp.add_argument("--constants", default="all",
                            help="comma-separated constant names or 'all'")
            sp.add_argument("--cardinalities",
                            help="set sizes k for Delta and Gamma (default: all)")
        if checks:
            sp.add_argument("--checks", default="all",
                            help="comma-separated check names or 'all'")
            sp.add_argument("--cardinalities", help=argparse.SUPPRESS)
        sp.add_argument("--output-dir", default="tga-out")
        sp.add_argument("--format", choices=("json", "csv"), default="json",
                        help="json always; csv adds derived tables")
        sp.add_argument("--workers", type=int, default=None,
                        help="parallel workers (default: available CPUs)")
        sp.add_argument("--tolerance", type=float, default=DEFAULT_TOL)

    common(sub.add_parser("constants", help="estimate constants with witnesses"), constants=True)
    common(sub.add_parser("verify", help="run the inequality check suites"), checks=True)
    w = sub.add_parser("witness", help="replay a stored witness or violation")
    w.add_argument("target", help="constant name, check name, or path to a witness/report file")
    w.add_argument("--instance", type=int, default=None,
                   help="violation index inside a check report")
    w.add_argument("--output-dir", default="tga-out")
    r = sub.add_parser("report", help="summarise an output directory")
    r.add_argument("--output-dir", default="tga-out")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "witness":
            return cmd_witness(args.target, Path(args.output_dir), args.instance)
        if args.command == "report":
            return cmd_report(Path(args.output_dir), args.format)
        cfg = build_config(args)
        if args.command == "constants":
            return cmd_constants(cfg)
        return cmd_verify(cfg)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return 2
    except TgaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
