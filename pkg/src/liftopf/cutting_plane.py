"""Iterative lower bounding: solve the LP, separate, append, repeat."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cuts as C
from .lifted_model import ModelInstance, build_base_model
from .lp_backend import make_solver
from .netcase import Network

STALL_ROUNDS = 5
REPORT_SCHEMA = "report_v1"


class EngineError(RuntimeError):
    """LP failure other than infeasibility; carries the solver status."""

    def __init__(self, status: str, message: str = ""):
        super().__init__(f"LP solve failed with status {status}: {message}")
        self.status = status


@dataclass
class SolveConfig:
    families: tuple[str, ...] = ("delta", "loss", "circle", "sdp", "rating", "cost")
    tol_violation: float = C.TOL
    tol_improve: float = 1e-7
    max_rounds: int = 200
    max_cuts_per_family: int | None = None  # default 2 * branch count
    angle_intervals: tuple[C.AngleInterval, ...] = ()
    reference_angle: float | None = 0.0
    sdp_with_one: bool = False
    sdp_subsets: tuple[tuple[int, ...], ...] | None = None
    loss_k_side: bool = True
    seed: int = 0
    backend: str = "highs"
    check_soundness: bool = True

    def __post_init__(self):
        self.families = tuple(self.families)
        bad = set(self.families) - set(C.FAMILIES)
        if bad:
            raise ValueError(f"unknown cut families: {sorted(bad)}")
        if self.tol_violation <= 0 or self.tol_improve <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        self.angle_intervals = tuple(self.angle_intervals)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["families"] = list(self.families)
        d["angle_intervals"] = [[iv.bus, iv.lo, iv.hi] for iv in self.angle_intervals]
        if self.sdp_subsets is not None:
            d["sdp_subsets"] = [list(s) for s in self.sdp_subsets]
        return d


@dataclass
class SolveReport:
    case: str
    status: str  # converged | round-limit | infeasible
    stop_reason: str
    rounds: int
    bounds: list[float] = field(default_factory=list)  # raw LP objective per round
    best_bounds: list[float] = field(default_factory=list)  # running maximum
    cuts_per_round: list[dict] = field(default_factory=list)
    cut_counts: dict = field(default_factory=dict)
    static_cuts: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    reference_obj: float | None = None
    config: dict = field(default_factory=dict)
    model: ModelInstance | None = field(default=None, repr=False)
    x: np.ndarray | None = field(default=None, repr=False)

    @property
    def bound(self) -> float | None:
        return self.best_bounds[-1] if self.best_bounds else None

    @property
    def gap(self) -> float | None:
        if self.reference_obj is None or self.bound is None:
            return None
        return (self.reference_obj - self.bound) / abs(self.reference_obj)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "case": self.case,
            "status": self.status,
            "stop_reason": self.stop_reason,
            "rounds": self.rounds,
            "bound": self.bound,
            "reference_obj": self.reference_obj,
            "gap": self.gap,
            "bounds": self.bounds,
            "best_bounds": self.best_bounds,
            "cut_counts": self.cut_counts,
            "cuts_per_round": self.cuts_per_round,
            "static_cuts": self.static_cuts,
            "lp_iterations": self.lp_iterations,
            "wall_time": self.wall_time,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "lp_objective", "bound", "cuts_added"])
        for i, (b, bb) in enumerate(zip(self.bounds, self.best_bounds)):
            added = sum(self.cuts_per_round[i].values()) if i < len(self.cuts_per_round) else 0
            w.writerow([i, repr(b), repr(bb), added])
        return buf.getvalue()


def _cut_key(cut: C.Cut) -> tuple:
    con = cut.constraint
    return tuple(sorted((j, round(v, 9)) for j, v in con.coeffs.items())) + (round(con.rhs, 9),)


def separate(mi: ModelInstance, x, cfg: SolveConfig) -> list[C.Cut]:
    """Run every enabled dynamic separator at ``x``."""
    net, cat, tol = mi.net, mi.catalog, cfg.tol_violation
    fam = set(cfg.families)
    found: list[C.Cut] = []

    def keep(cut):
        if cut is not None:
            found.append(cut)

    for br in net.active_branches:
        if "loss" in fam and br.g >= 0:
            keep(C.loss_separate(br, cat, x, "m", tol))
            if cfg.loss_k_side:
                keep(C.loss_separate(br, cat, x, "k", tol))
        if "circle" in fam:
            keep(C.circle_separate(br, cat, x, "k", tol))
            keep(C.circle_separate(br, cat, x, "m", tol))
        if "rating" in fam and br.rate_a > 0:
            keep(C.rating_separate(br, cat, x, "k", tol))
            keep(C.rating_separate(br, cat, x, "m", tol))
    if "cost" in fam:
        for i, gen in net.active_generators:
            keep(C.cost_separate(gen, i, cat, x, tol))
    if "sdp" in fam:
        subsets = cfg.sdp_subsets if cfg.sdp_subsets is not None else C.branch_subsets(net)
        for s in subsets:
            keep(C.sdp_separate(cat, x, s, cfg.sdp_with_one, tol))
    return found


def _select(found, cfg: SolveConfig, cap: int, seen: set) -> list[C.Cut]:
    by_family: dict[str, dict[tuple, C.Cut]] = {}
    for cut in found:
        key = _cut_key(cut)
        if key not in seen:
            by_family.setdefault(cut.family, {}).setdefault(key, cut)
    chosen = []
    for fam in C.FAMILIES:
        group = sorted(by_family.get(fam, {}).items(), key=lambda kc: -kc[1].violation)
        for key, cut in group[:cap]:
            seen.add(key)
            chosen.append(cut)
    return chosen


def build_model(net: Network, cfg: SolveConfig) -> ModelInstance:
    mi = build_base_model(net, cfg.reference_angle, cfg.angle_intervals)
    if "delta" in cfg.families:
        for cut in C.all_delta_cuts(net, mi.catalog, mi.intervals):
            mi.constraints.append(cut.constraint)
    return mi


def run(net: Network, cfg: SolveConfig | None = None, reference_obj: float | None = None) -> SolveReport:
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    mi = build_model(net, cfg)
    n_static = sum(1 for c in mi.constraints if c.tag == "delta")
    cap = cfg.max_cuts_per_family or max(1, 2 * len(net.active_branches))
    solver = make_solver(mi.to_lpmodel(), cfg.backend)
    report = SolveReport(net.name, "round-limit", "round-limit", 0, static_cuts=n_static,
                         reference_obj=reference_obj, config=cfg.to_dict(), model=mi)
    report.cut_counts = {f: 0 for f in C.FAMILIES}
    report.cut_counts["delta"] = n_static
    seen: set = set()
    stall = 0
    best = -math.inf
    for rnd in range(cfg.max_rounds):
        sol = solver.solve()
        report.lp_iterations += sol.iterations
        report.rounds = rnd + 1
        if sol.status == "infeasible":
            report.status = report.stop_reason = "infeasible"
            break
        if not sol.optimal:
            raise EngineError(sol.status, sol.message)
        x = sol.x
        report.x = x
        obj = float(sol.objective)
        prev = best
        best = max(best, obj)
        report.bounds.append(obj)
        report.best_bounds.append(best)

        found = separate(mi, x, cfg)
        chosen = _select(found, cfg, cap, seen)
        counts = {f: 0 for f in C.FAMILIES}
        for cut in chosen:
            if cfg.check_soundness:
                assert cut.violation > cfg.tol_violation, (cut.family, cut.source, cut.violation)
            counts[cut.family] += 1
            report.cut_counts[cut.family] += 1
            mi.add_cut(cut)
        report.cuts_per_round.append(counts)
        if not chosen:
            report.status, report.stop_reason = "converged", "no-violations"
            break
        if math.isfinite(prev):
            rel = (best - prev) / max(1.0, abs(prev))
            stall = stall + 1 if rel < cfg.tol_improve else 0
            if stall >= STALL_ROUNDS:
                report.status, report.stop_reason = "converged", "stalled"
                break
        if rnd + 1 == cfg.max_rounds:
            break
        solver.add_rows([c.constraint.as_row() for c in chosen])
    report.wall_time = time.perf_counter() - t0
    return report
