"""Command-line front end: ``liftopf {relax,export-milp,validate,info}``.

Exit codes: 0 success, 1 bad input (missing/unparsable file, bad flag),
2 LP failure, 3 relaxation proven infeasible, 4 validation found a violation.
"""
from __future__ import annotations

import argparse
import cmath
import datetime as _dt
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from . import cuts as C
from .cutting_plane import EngineError, SolveConfig, run
from .glover import DEFAULT_BITS, build_milp, export_milp, manifest_path
from .lifted_model import (OPERATIONAL_TAGS, PHYSICS_TAGS, bound_violation, build_base_model,
                           embed_feasible_point, max_violation)
from .netcase import CaseFormatError, Network, bundled_case, load_case
from .reference import reference_objective

EXIT_OK, EXIT_INPUT, EXIT_LP, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2, 3, 4
VALIDATE_TOL = 1e-7
VOLATILE_FIELDS = ("timestamp", "wall_time")


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    input: str
    command: str
    config: dict
    tool_version: str = __version__
    timestamp: str = ""

    def __post_init__(self):
        if not self.timestamp:
            self.timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _load(case: str) -> Network:
    p = Path(case)
    try:
        if p.exists():
            return load_case(p)
        if p.suffix == "" and "/" not in case:
            return bundled_case(case)
    except (CaseFormatError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from None
    raise InputError(f"case file not found: {case}")


def _families(text: str) -> tuple[str, ...]:
    text = text.strip().lower()
    if text == "all":
        return C.FAMILIES
    if text == "none":
        return ()
    fams = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in fams if f not in C.FAMILIES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown cut families {bad}; choose from {list(C.FAMILIES)}")
    return fams


def _interval(text: str) -> C.AngleInterval:
    try:
        bus, lo, hi = text.split(":")
        return C.AngleInterval(int(bus), float(lo), float(hi))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad angle interval {text!r} (want BUS:LO:HI): {exc}") from None


def _config(args) -> SolveConfig:
    return SolveConfig(
        families=args.cuts,
        tol_violation=args.tol,
        max_rounds=args.max_rounds,
        angle_intervals=tuple(args.angle_interval or ()),
        reference_angle=None if args.free_reference else 0.0,
        sdp_with_one=args.sdp_with_one,
        seed=args.seed,
        backend=args.backend,
    )


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _solver_flags(p):
    p.add_argument("--cuts", type=_families, default=C.FAMILIES,
                   help="comma list of families, 'all' or 'none' (default all)")
    p.add_argument("--max-rounds", type=int, default=200)
    p.add_argument("--tol", type=float, default=C.TOL, help="cut violation tolerance")
    p.add_argument("--angle-interval", type=_interval, action="append", metavar="BUS:LO:HI",
                   help="angle interval in radians; repeatable")
    p.add_argument("--free-reference", action="store_true",
                   help="do not fix the reference bus angle at zero")
    p.add_argument("--sdp-with-one", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=("highs", "simplex"), default="highs")


# ---------------------------------------------------------------- commands

def cmd_relax(args) -> int:
    net = _load(args.case)
    cfg = _config(args)
    ref = args.reference_obj
    if ref is not None and ref.lower() == "auto":
        ref = reference_objective(net.name)
        if ref is None:
            raise InputError(f"no stored reference objective for {net.name!r}")
    ref = float(ref) if ref is not None else None
    try:
        rep = run(net, cfg, ref)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LP
    if args.cut_log:
        C.write_cut_log(rep.model.cut_pool, rep.model.catalog, args.cut_log)
    if args.trajectory:
        Path(args.trajectory).write_text(rep.trajectory_csv())
    payload = rep.to_dict()
    payload["manifest"] = asdict(RunManifest(args.case, "relax", cfg.to_dict()))
    if args.out:
        Path(args.out).write_text(_dump(payload))
    print(f"case        {net.name} ({net.summary()})")
    print(f"status      {rep.status} ({rep.stop_reason})")
    if rep.bound is not None:
        print(f"bound       {rep.bound:.6f}")
    print(f"rounds      {rep.rounds}")
    print("cuts        " + ", ".join(f"{k}={v}" for k, v in rep.cut_counts.items()))
    print(f"time        {rep.wall_time:.2f} s")
    if rep.gap is not None:
        print(f"gap         {100 * rep.gap:.4f} % vs {rep.reference_obj:.6f}")
    return EXIT_INFEASIBLE if rep.status == "infeasible" else EXIT_OK


def cmd_export_milp(args) -> int:
    net = _load(args.case)
    milp = build_milp(net, args.bits)
    out = args.output or f"{net.name}_T{args.bits}.lp"
    try:
        export_milp(milp, out)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from None
    print(f"wrote {out} ({len(milp.names)} variables, {len(milp.rows)} rows, "
          f"{milp.binary_count} binaries over {len(milp.expansions)} expanded coordinates)")
    print(f"wrote {manifest_path(out)}")
    return EXIT_OK


def read_profile(path, net: Network) -> dict[int, complex]:
    """Voltage profile JSON: a list (or ``{"profile": [...]}``) of entries with
    ``bus`` and either ``vm`` + ``va_deg``/``va`` (radians) or ``re`` + ``im``."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read profile {path}: {exc}") from None
    entries = data.get("profile", data.get("buses")) if isinstance(data, dict) else data
    if not isinstance(entries, list):
        raise InputError("profile must be a list of bus entries")
    V = {}
    for e in entries:
        try:
            bus = int(e["bus"])
            if "re" in e:
                v = complex(float(e["re"]), float(e["im"]))
            else:
                ang = math.radians(float(e["va_deg"])) if "va_deg" in e else float(e.get("va", 0.0))
                v = cmath.rect(float(e["vm"]), ang)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad profile entry {e!r}: {exc}") from None
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise InputError(f"non-finite voltage at bus {bus}")
        V[bus] = v
    missing = [b.id for b in net.buses if b.id not in V]
    if missing:
        raise InputError(f"profile lacks buses {missing[:10]}")
    return V


def validate_profile(net: Network, V: dict[int, complex], cfg: SolveConfig, rounds: int = 5) -> dict:
    """Embed ``V`` (rotated so the reference angle is zero) and measure violations."""
    r = V[net.reference_bus]
    if abs(r) == 0:
        raise InputError("reference bus voltage is zero")
    rot = abs(r) / r
    V = {k: v * rot for k, v in V.items()}
    cfg_gen = SolveConfig(**{**cfg.__dict__, "max_rounds": rounds, "check_soundness": True})
    try:
        rep = run(net, cfg_gen)
    except EngineError:
        rep = None
    mi = rep.model if rep is not None else build_base_model(net)
    pt = embed_feasible_point(net, V, mi.catalog)
    x = pt.values
    static = [c for c in mi.constraints if c.tag not in PHYSICS_TAGS | OPERATIONAL_TAGS]
    per_family = {}
    for cut in mi.cut_pool:
        per_family[cut.family] = max(per_family.get(cut.family, 0.0), float(cut.constraint.violation(x)))
    if static:
        per_family["delta"] = float(max(c.violation(x) for c in static))
    physics = float(max_violation(mi.constraints, x, PHYSICS_TAGS))
    cut_max = max(per_family.values(), default=0.0)
    return {
        "physics_violation": physics,
        "operational_violation": float(max_violation(mi.constraints, x, OPERATIONAL_TAGS)),
        "bound_violation": float(bound_violation(mi.catalog, x)),
        "cut_violation": cut_max,
        "per_family": per_family,
        "cuts_checked": len(mi.cut_pool) + len(static),
        "max_violation": max(physics, cut_max),
        "objective": float(mi.objective_value(x)),
    }


def cmd_validate(args) -> int:
    net = _load(args.case)
    V = read_profile(args.profile, net)
    res = validate_profile(net, V, _config(args), args.rounds)
    ok = bool(res["max_violation"] <= VALIDATE_TOL)
    res["ok"] = ok
    if args.out:
        payload = dict(res, manifest=asdict(RunManifest(args.case, "validate", _config(args).to_dict())))
        Path(args.out).write_text(_dump(payload))
    print(f"physics rows      max violation {res['physics_violation']:.3e}")
    print(f"cuts ({res['cuts_checked']:5d})      max violation {res['cut_violation']:.3e}")
    for fam, v in sorted(res["per_family"].items()):
        print(f"  {fam:<8}        {v:.3e}")
    print(f"balance/cost rows max violation {res['operational_violation']:.3e} (informational)")
    print(f"variable bounds   max violation {res['bound_violation']:.3e} (informational)")
    print("valid" if ok else f"INVALID: {res['max_violation']:.3e} > {VALIDATE_TOL:g}")
    return EXIT_OK if ok else EXIT_INVALID


def cmd_info(args) -> int:
    net = _load(args.case)
    print(net.summary())
    if args.verbose:
        brs = net.active_branches
        print(f"base MVA            {net.base_mva:g}")
        print(f"reference bus       {net.reference_bus}")
        print(f"transformers        {sum(1 for b in brs if b.tau != 1 or b.sigma != 0)}")
        print(f"rated branches      {sum(1 for b in brs if b.rate_a > 0)}")
        print(f"total demand        {sum(b.Pd for b in net.buses) * net.base_mva:.2f} MW")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="liftopf", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"liftopf {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("relax", help="run the cutting-plane lower bound")
    r.add_argument("case", help="MATPOWER .m file or a bundled case name")
    _solver_flags(r)
    r.add_argument("--reference-obj", help="known feasible objective, or 'auto' for bundled cases")
    r.add_argument("--out", help="write the JSON report here")
    r.add_argument("--cut-log", help="write every dynamic cut as JSON here")
    r.add_argument("--trajectory", help="write the bound trajectory as CSV here")
    r.set_defaults(func=cmd_relax)

    e = sub.add_parser("export-milp", help="write the binary-expansion MILP in LP format")
    e.add_argument("case")
    e.add_argument("--bits", type=int, default=DEFAULT_BITS)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_export_milp)

    v = sub.add_parser("validate", help="check a voltage profile against the relaxation")
    v.add_argument("case")
    v.add_argument("profile", help="voltage profile JSON")
    _solver_flags(v)
    v.add_argument("--rounds", type=int, default=5, help="cutting-plane rounds used to generate cuts")
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    i = sub.add_parser("info", help="print network statistics")
    i.add_argument("case")
    i.add_argument("-v", "--verbose", action="store_true")
    i.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
