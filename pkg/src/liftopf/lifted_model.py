"""The base linear relaxation in the lifted variable space.

Foundational variables are the line flows ``P, Q`` and squared voltage
magnitudes ``V2``.  Lifted variables are the rectangular voltages ``e, f``,
their pairwise products, the four transformer-adjusted absolute
differences per branch, the circle auxiliaries ``alpha, beta`` and the
generator outputs with their cost epigraph variables.

Variable names are deterministic: ``V2_<bus>``, ``e_<bus>``, ``P_<from>_<to>``
(and ``P_<to>_<from>`` for the receiving end), ``dE_<from>_<to>``, ... with a
``_<ordinal>`` suffix on parallel branches.  Product names: ``EE_<k>``,
``FF_<k>``, ``EF_<k>`` for ``e_k^2, f_k^2, e_k f_k``; ``EE_<a>_<b>``,
``EF_<a>_<b>``, ``FE_<a>_<b>``, ``FF_<a>_<b>`` for ``e_a e_b, e_a f_b, f_a e_b,
f_a f_b`` with ``a < b``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import branch_physics as phys
from .lp_backend import LPModel
from .netcase import BranchParams, Generator, Network

SENSES = ("<=", "=", ">=")


class ModelError(ValueError):
    pass


@dataclass
class LinearConstraint:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    tag: str = ""

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"bad sense {self.sense!r}")
        for j, v in self.coeffs.items():
            if not math.isfinite(v):
                raise ValueError(f"non-finite coefficient on variable {j}")

    def activity(self, x) -> float:
        return sum(v * x[j] for j, v in self.coeffs.items())

    def violation(self, x) -> float:
        """Amount by which ``x`` violates the row (<= 0 when satisfied)."""
        d = self.activity(x) - self.rhs
        if self.sense == "<=":
            return d
        if self.sense == ">=":
            return -d
        return abs(d)

    def as_row(self):
        return (self.coeffs, self.sense, self.rhs)


@dataclass(frozen=True)
class BranchVars:
    Pkm: int
    Qkm: int
    Pmk: int
    Qmk: int
    alpha_km: int
    beta_km: int
    alpha_mk: int
    beta_mk: int
    dE_km: int
    dF_km: int
    dE_mk: int
    dF_mk: int
    V2k: int
    V2m: int


class VarCatalog:
    """Name <-> index map with bounds for every model variable."""

    def __init__(self):
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.group: list[str] = []
        self.factors: dict[int, tuple[str, str]] = {}

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name: str) -> int:
        return self.index[name]

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def add(self, name: str, lb: float, ub: float, group: str) -> int:
        if name in self.index:
            raise ModelError(f"duplicate variable {name}")
        self.index[name] = len(self.names)
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.group.append(group)
        return self.index[name]

    def set_bounds(self, j: int, lb: float, ub: float) -> None:
        self.lb[j], self.ub[j] = lb, ub

    # names
    @staticmethod
    def product_name(s1: str, k: int, s2: str, m: int) -> str:
        if k == m:
            pair = "".join(sorted((s1, s2))).upper()
            return {"EE": f"EE_{k}", "FF": f"FF_{k}", "EF": f"EF_{k}"}[pair]
        if k > m:
            s1, k, s2, m = s2, m, s1, k
        return f"{s1.upper()}{s2.upper()}_{k}_{m}"

    def prod(self, s1: str, k: int, s2: str, m: int) -> int:
        return self.index[self.product_name(s1, k, s2, m)]

    @staticmethod
    def suffix(br: BranchParams) -> str:
        return f"_{br.ordinal}" if br.ordinal else ""

    def branch_vars(self, br: BranchParams) -> BranchVars:
        k, m, s = br.from_bus, br.to_bus, self.suffix(br)
        ix = self.index
        return BranchVars(
            ix[f"P_{k}_{m}{s}"], ix[f"Q_{k}_{m}{s}"], ix[f"P_{m}_{k}{s}"], ix[f"Q_{m}_{k}{s}"],
            ix[f"alpha_{k}_{m}{s}"], ix[f"beta_{k}_{m}{s}"],
            ix[f"alpha_{m}_{k}{s}"], ix[f"beta_{m}_{k}{s}"],
            ix[f"dE_{k}_{m}{s}"], ix[f"dF_{k}_{m}{s}"], ix[f"dE_{m}_{k}{s}"], ix[f"dF_{m}_{k}{s}"],
            ix[f"V2_{k}"], ix[f"V2_{m}"],
        )


@dataclass
class LiftedPoint:
    catalog: VarCatalog
    values: np.ndarray

    def __getitem__(self, key):
        if isinstance(key, str):
            key = self.catalog[key]
        return self.values[key]

    def __setitem__(self, key, val):
        if isinstance(key, str):
            key = self.catalog[key]
        self.values[key] = val


@dataclass
class ModelInstance:
    net: Network
    catalog: VarCatalog
    constraints: list[LinearConstraint]
    objective: dict[int, float]
    intervals: dict = field(default_factory=dict)
    cut_pool: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add_cut(self, cut) -> None:
        with self._lock:
            self.cut_pool.append(cut)

    @property
    def lb(self) -> np.ndarray:
        return np.array(self.catalog.lb)

    @property
    def ub(self) -> np.ndarray:
        return np.array(self.catalog.ub)

    def all_rows(self):
        return [c.as_row() for c in self.constraints] + [c.constraint.as_row() for c in self.cut_pool]

    def to_lpmodel(self, include_cuts: bool = True) -> LPModel:
        n = len(self.catalog)
        c = np.zeros(n)
        for j, v in self.objective.items():
            c[j] = v
        rows = [con.as_row() for con in self.constraints]
        rnames = [f"{con.tag or 'c'}_{i}" for i, con in enumerate(self.constraints)]
        if include_cuts:
            for i, cut in enumerate(self.cut_pool):
                rows.append(cut.constraint.as_row())
                rnames.append(f"{cut.family}_cut_{i}")
        return LPModel.from_rows(c, self.lb, self.ub, rows, names=list(self.catalog.names),
                                 row_names=rnames)

    def objective_value(self, x) -> float:
        return float(sum(v * x[j] for j, v in self.objective.items()))


# ------------------------------------------------------------ construction

def sector_box(vmin: float, vmax: float, lo: float, hi: float):
    """Bounds of ``(e, f) = rho (cos t, sin t)`` over ``rho in [vmin, vmax]``, ``t in [lo, hi]``."""
    def trig_range(fn, phase):
        vals = [fn(lo), fn(hi)]
        # interior extrema of cos(t - phase) at phase + j*pi
        j0 = math.ceil((lo - phase) / math.pi)
        j = j0
        while phase + j * math.pi <= hi:
            vals.append(fn(phase + j * math.pi))
            j += 1
        return min(vals), max(vals)

    cmin, cmax = trig_range(math.cos, 0.0)
    smin, smax = trig_range(math.sin, math.pi / 2)

    def scale(tmin, tmax):
        low = vmax * tmin if tmin < 0 else vmin * tmin
        high = vmax * tmax if tmax > 0 else vmin * tmax
        return low, high

    return scale(cmin, cmax), scale(smin, smax)


def _interval_product(a, b):
    cands = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    return min(cands), max(cands)


def _square_range(a):
    lo, hi = a
    top = max(lo * lo, hi * hi)
    low = 0.0 if lo <= 0 <= hi else min(lo * lo, hi * hi)
    return low, top


def flow_coefficients(br: BranchParams) -> dict[str, dict[str, float]]:
    """Linear coefficients of ``Pkm, Qkm, Pmk, Qmk`` in the product variables.

    Keys of the inner dicts: ``EEk, FFk, EEm, FFm`` (squares at each end) and
    ``EE, EF, FE, FF`` meaning ``e_k e_m, e_k f_m, f_k e_m, f_k f_m``.
    """
    Y = phys.branch_admittance_matrix(br)
    # S_km = conj(Y11)|V_k|^2 + conj(Y12) V_k conj(V_m);
    # V_k conj(V_m) = (EE + FF) + j (FE - EF)
    y11, y12 = Y[0, 0].conjugate(), Y[0, 1].conjugate()
    y22, y21 = Y[1, 1].conjugate(), Y[1, 0].conjugate()
    a, bq = y12.real, y12.imag
    pkm = {"EEk": y11.real, "FFk": y11.real, "EE": a, "FF": a, "FE": -bq, "EF": bq}
    qkm = {"EEk": y11.imag, "FFk": y11.imag, "EE": bq, "FF": bq, "FE": a, "EF": -a}
    # S_mk = conj(Y22)|V_m|^2 + conj(Y21) conj(V_k conj(V_m))
    a2, b2 = y21.real, y21.imag
    pmk = {"EEm": y22.real, "FFm": y22.real, "EE": a2, "FF": a2, "FE": b2, "EF": -b2}
    qmk = {"EEm": y22.imag, "FFm": y22.imag, "EE": b2, "FF": b2, "FE": -a2, "EF": a2}
    return {"Pkm": pkm, "Qkm": qkm, "Pmk": pmk, "Qmk": qmk}


def _product_index(cat: VarCatalog, key: str, k: int, m: int) -> int:
    table = {
        "EEk": ("e", k, "e", k), "FFk": ("f", k, "f", k),
        "EEm": ("e", m, "e", m), "FFm": ("f", m, "f", m),
        "EE": ("e", k, "e", m), "EF": ("e", k, "f", m),
        "FE": ("f", k, "e", m), "FF": ("f", k, "f", m),
    }
    return cat.prod(*table[key])


def absdiff_expressions(br: BranchParams) -> dict[str, dict[str, float]]:
    """Coefficients (over ``ek, fk, em, fm``) of the four signed differences."""
    t, c, s = br.tau, math.cos(br.sigma), math.sin(br.sigma)
    return {
        "dE_km": {"ek": 1 / t, "em": -c, "fm": s},
        "dF_km": {"fk": 1 / t, "fm": -c, "em": -s},
        "dE_mk": {"em": 1.0, "ek": -c / t, "fk": -s / t},
        "dF_mk": {"fm": 1.0, "fk": -c / t, "ek": s / t},
    }


def cost_epigraph_tangent(gen: Generator, p_hat: float, p_var: int = 0, t_var: int = 1) -> LinearConstraint:
    """``t >= c(p_hat) + c'(p_hat) (p - p_hat)`` as ``t - c'(p_hat) p >= c0 - c2 p_hat^2``."""
    c = gen.cost
    slope = 2 * c.c2 * p_hat + c.c1
    coeffs = {t_var: 1.0}
    if slope:
        coeffs[p_var] = -slope
    return LinearConstraint(coeffs, ">=", c.c0 - c.c2 * p_hat * p_hat, "cost")


def _cost_range(gen: Generator) -> tuple[float, float]:
    c = gen.cost
    vals = [c(gen.Pmin), c(gen.Pmax)]
    if c.c2 > 0:
        vertex = -c.c1 / (2 * c.c2)
        if gen.Pmin <= vertex <= gen.Pmax:
            vals.append(c(vertex))
    return min(vals), max(vals)


def build_catalog(net: Network, boxes: dict | None = None) -> VarCatalog:
    """All variables with their bounds.  ``boxes`` maps bus -> ((e_lo, e_hi), (f_lo, f_hi))."""
    cat = VarCatalog()
    boxes = boxes or {}
    ebox, fbox = {}, {}
    for bus in net.buses:
        k = bus.id
        ebox[k], fbox[k] = boxes.get(k, ((-bus.Vmax, bus.Vmax), (-bus.Vmax, bus.Vmax)))
        cat.add(f"V2_{k}", bus.Vmin**2, bus.Vmax**2, "V2")
        cat.add(f"e_{k}", *ebox[k], "e")
        cat.add(f"f_{k}", *fbox[k], "f")
    for bus in net.buses:
        k = bus.id
        j = cat.add(f"EE_{k}", *_square_range(ebox[k]), "prod")
        cat.factors[j] = (f"e_{k}", f"e_{k}")
        j = cat.add(f"FF_{k}", *_square_range(fbox[k]), "prod")
        cat.factors[j] = (f"f_{k}", f"f_{k}")
        j = cat.add(f"EF_{k}", *_interval_product(ebox[k], fbox[k]), "prod")
        cat.factors[j] = (f"e_{k}", f"f_{k}")

    seen_pairs = set()
    for br in net.active_branches:
        k, m, s = br.from_bus, br.to_bus, VarCatalog.suffix(br)
        if k == m:
            raise ModelError(f"branch {br.key} connects a bus to itself")
        vk, vm = net.bus(k).Vmax, net.bus(m).Vmax
        Y = phys.branch_admittance_matrix(br)
        pq_k = abs(Y[0, 0]) * vk * vk + abs(Y[0, 1]) * vk * vm
        pq_m = abs(Y[1, 1]) * vm * vm + abs(Y[1, 0]) * vk * vm
        radius = math.sqrt(br.g**2 + br.b**2) * vk * vm / br.tau
        for a, b_, bound in ((k, m, pq_k), (m, k, pq_m)):
            cat.add(f"P_{a}_{b_}{s}", -bound, bound, "P")
            cat.add(f"Q_{a}_{b_}{s}", -bound, bound, "Q")
        for a, b_ in ((k, m), (m, k)):
            cat.add(f"alpha_{a}_{b_}{s}", -radius, radius, "alpha")
            cat.add(f"beta_{a}_{b_}{s}", -radius, radius, "beta")
        dmax = vk / br.tau + vm
        for a, b_ in ((k, m), (m, k)):
            cat.add(f"dE_{a}_{b_}{s}", 0.0, dmax, "absdiff")
            cat.add(f"dF_{a}_{b_}{s}", 0.0, dmax, "absdiff")
        pair = (min(k, m), max(k, m))
        if pair not in seen_pairs:
            seen_pairs.add(pair)
            a, b_ = pair
            for s1, box1 in (("e", ebox[a]), ("f", fbox[a])):
                for s2, box2 in (("e", ebox[b_]), ("f", fbox[b_])):
                    name = VarCatalog.product_name(s1, a, s2, b_)
                    j = cat.add(name, *_interval_product(box1, box2), "prod")
                    cat.factors[j] = (f"{s1}_{a}", f"{s2}_{b_}")
    for i, gen in net.active_generators:
        cat.add(f"pg_{i + 1}", gen.Pmin, gen.Pmax, "pg")
        cat.add(f"qg_{i + 1}", gen.Qmin, gen.Qmax, "qg")
        cat.add(f"t_{i + 1}", *_cost_range(gen), "t")
    for j, (lo, hi) in enumerate(zip(cat.lb, cat.ub)):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ModelError(f"variable {cat.names[j]} is unbounded")
    return cat


def resolve_intervals(net: Network, reference_angle: float | None = 0.0, intervals=None) -> dict:
    """Per-bus angle intervals: the reference fixing plus any user-supplied ones (which win)."""
    out = {}
    if reference_angle is not None:
        out[net.reference_bus] = (reference_angle, reference_angle)
    for iv in (intervals or {}).values() if isinstance(intervals, dict) else (intervals or []):
        lo, hi = iv.lo, iv.hi
        if iv.bus not in {b.id for b in net.buses}:
            raise ModelError(f"angle interval for unknown bus {iv.bus}")
        out[iv.bus] = (lo, hi)
    return out


def build_base_model(net: Network, reference_angle: float | None = 0.0, intervals=None) -> ModelInstance:
    """Lifted base LP.  ``reference_angle=None`` leaves every angle free."""
    ivals = resolve_intervals(net, reference_angle, intervals)
    boxes = {k: sector_box(net.bus(k).Vmin, net.bus(k).Vmax, lo, hi) for k, (lo, hi) in ivals.items()}
    cat = build_catalog(net, boxes)
    rows: list[LinearConstraint] = []

    for bus in net.buses:
        k = bus.id
        rows.append(LinearConstraint({cat[f"V2_{k}"]: 1.0, cat[f"EE_{k}"]: -1.0, cat[f"FF_{k}"]: -1.0},
                                     "=", 0.0, "link"))
    for k, (lo, hi) in ivals.items():
        if lo == hi:
            # angle fixed at lo: sin(lo) e - cos(lo) f = 0
            co = {}
            if math.sin(lo):
                co[cat[f"e_{k}"]] = math.sin(lo)
            if math.cos(lo):
                co[cat[f"f_{k}"]] = -math.cos(lo)
            rows.append(LinearConstraint(co, "=", 0.0, "ref_angle"))

    for br in net.active_branches:
        bv = cat.branch_vars(br)
        k, m = br.from_bus, br.to_bus
        coefs = flow_coefficients(br)
        for flow, var in (("Pkm", bv.Pkm), ("Qkm", bv.Qkm), ("Pmk", bv.Pmk), ("Qmk", bv.Qmk)):
            co = {var: 1.0}
            for key, v in coefs[flow].items():
                if v:
                    j = _product_index(cat, key, k, m)
                    co[j] = co.get(j, 0.0) - v
            rows.append(LinearConstraint(co, "=", 0.0, "flow"))
        # circle auxiliaries; both ends use radius^2 = V2k V2m / (tau^2 z^2)
        g_c, b_c = br.g + br.g_sh / 2, br.b + br.b_sh / 2
        t2 = br.tau**2
        rows.append(LinearConstraint({bv.alpha_km: 1.0, bv.Pkm: -1.0, bv.V2k: g_c / t2}, "=", 0.0, "circle_def"))
        rows.append(LinearConstraint({bv.beta_km: 1.0, bv.Qkm: -1.0, bv.V2k: -b_c / t2}, "=", 0.0, "circle_def"))
        rows.append(LinearConstraint({bv.alpha_mk: 1.0, bv.Pmk: -1.0, bv.V2m: g_c}, "=", 0.0, "circle_def"))
        rows.append(LinearConstraint({bv.beta_mk: 1.0, bv.Qmk: -1.0, bv.V2m: -b_c}, "=", 0.0, "circle_def"))
        # absolute-difference lower bounds d >= +-expr
        ef = {"ek": cat[f"e_{k}"], "fk": cat[f"f_{k}"], "em": cat[f"e_{m}"], "fm": cat[f"f_{m}"]}
        dvars = {"dE_km": bv.dE_km, "dF_km": bv.dF_km, "dE_mk": bv.dE_mk, "dF_mk": bv.dF_mk}
        for key, expr in absdiff_expressions(br).items():
            for sign in (1.0, -1.0):
                co = {dvars[key]: 1.0}
                for sym, v in expr.items():
                    if v:
                        co[ef[sym]] = co.get(ef[sym], 0.0) - sign * v
                rows.append(LinearConstraint(co, ">=", 0.0, "absdiff"))

    # bus balance
    p_bal = {b.id: {cat[f"V2_{b.id}"]: b.Gs} for b in net.buses}
    q_bal = {b.id: {cat[f"V2_{b.id}"]: -b.Bs} for b in net.buses}
    for br in net.active_branches:
        bv = cat.branch_vars(br)
        p_bal[br.from_bus][bv.Pkm] = 1.0
        q_bal[br.from_bus][bv.Qkm] = 1.0
        p_bal[br.to_bus][bv.Pmk] = 1.0
        q_bal[br.to_bus][bv.Qmk] = 1.0
    for i, gen in net.active_generators:
        p_bal[gen.bus][cat[f"pg_{i + 1}"]] = -1.0
        q_bal[gen.bus][cat[f"qg_{i + 1}"]] = -1.0
    for bus in net.buses:
        k = bus.id
        rows.append(LinearConstraint({j: v for j, v in p_bal[k].items() if v}, "=", -bus.Pd, "balance_p"))
        rows.append(LinearConstraint({j: v for j, v in q_bal[k].items() if v}, "=", -bus.Qd, "balance_q"))

    objective = {}
    for i, gen in net.active_generators:
        p_hat = 0.5 * (gen.Pmin + gen.Pmax)
        rows.append(cost_epigraph_tangent(gen, p_hat, cat[f"pg_{i + 1}"], cat[f"t_{i + 1}"]))
        objective[cat[f"t_{i + 1}"]] = 1.0

    return ModelInstance(net, cat, rows, objective, ivals)


# ------------------------------------------------------------- exact points

def _bus_voltages(net: Network, voltages) -> dict[int, complex]:
    if isinstance(voltages, dict):
        return {k: complex(v) for k, v in voltages.items()}
    vals = list(voltages)
    if len(vals) != len(net.buses):
        raise ValueError("voltage vector length does not match the bus count")
    return {b.id: complex(v) for b, v in zip(net.buses, vals)}


def embed_feasible_point(net: Network, voltages, catalog: VarCatalog | None = None,
                         dispatch: dict | None = None) -> LiftedPoint:
    """Exact lifted point for the given bus voltages.

    Generator outputs come from ``dispatch`` (``{gen_index: complex S_g}``) when
    given; otherwise each bus's required injection is split evenly over its
    in-service generators.  Cost epigraph variables take the exact cost.
    """
    cat = catalog or build_catalog(net)
    V = _bus_voltages(net, voltages)
    x = np.zeros(len(cat))
    pt = LiftedPoint(cat, x)
    for bus in net.buses:
        v = V[bus.id]
        k = bus.id
        pt[f"e_{k}"], pt[f"f_{k}"] = v.real, v.imag
        pt[f"V2_{k}"] = v.real * v.real + v.imag * v.imag
    for j, (u, w) in cat.factors.items():
        x[j] = x[cat[u]] * x[cat[w]]

    inj = {b.id: complex(b.Pd + b.Gs * abs(V[b.id]) ** 2, b.Qd - b.Bs * abs(V[b.id]) ** 2)
           for b in net.buses}
    for br in net.active_branches:
        bv = cat.branch_vars(br)
        vp = phys.ComplexVoltagePair.from_complex(V[br.from_bus], V[br.to_bus])
        fl = phys.flow_rect(br, vp)
        x[bv.Pkm], x[bv.Qkm], x[bv.Pmk], x[bv.Qmk] = fl
        inj[br.from_bus] += complex(fl.Pkm, fl.Qkm)
        inj[br.to_bus] += complex(fl.Pmk, fl.Qmk)
        g_c, b_c, t2 = br.g + br.g_sh / 2, br.b + br.b_sh / 2, br.tau**2
        x[bv.alpha_km] = fl.Pkm - g_c * x[bv.V2k] / t2
        x[bv.beta_km] = fl.Qkm + b_c * x[bv.V2k] / t2
        x[bv.alpha_mk] = fl.Pmk - g_c * x[bv.V2m]
        x[bv.beta_mk] = fl.Qmk + b_c * x[bv.V2m]
        a_km, b_km, a_mk, b_mk = phys.transformer_differences(br, vp)
        x[bv.dE_km], x[bv.dF_km], x[bv.dE_mk], x[bv.dF_mk] = abs(a_km), abs(b_km), abs(a_mk), abs(b_mk)

    by_bus: dict[int, list[int]] = {}
    for i, gen in net.active_generators:
        by_bus.setdefault(gen.bus, []).append(i)
    for i, gen in net.active_generators:
        if dispatch is not None and i in dispatch:
            s = complex(dispatch[i])
        else:
            s = inj[gen.bus] / len(by_bus[gen.bus])
        pt[f"pg_{i + 1}"], pt[f"qg_{i + 1}"] = s.real, s.imag
        pt[f"t_{i + 1}"] = gen.cost(s.real)
    return pt


def bound_violation(cat: VarCatalog, x) -> float:
    lb, ub = np.array(cat.lb), np.array(cat.ub)
    return float(max(np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)))


def max_violation(constraints, x, tags=None) -> float:
    """Largest row violation over ``constraints`` (optionally only those whose tag is in ``tags``)."""
    worst = 0.0
    for con in constraints:
        if tags is not None and con.tag not in tags:
            continue
        worst = max(worst, con.violation(x))
    return worst


# rows whose validity depends only on the physics, not on demand/dispatch
PHYSICS_TAGS = frozenset({"link", "ref_angle", "flow", "circle_def", "absdiff"})
OPERATIONAL_TAGS = frozenset({"balance_p", "balance_q", "cost"})
