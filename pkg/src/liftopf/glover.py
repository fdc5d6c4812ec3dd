"""Binary-expansion MILP approximation of the lifted model.

Each product variable ``p = u v`` is replaced by a bracket that is exact up to
``2^-T``: one factor (the lexicographically smaller name) is normalized to
``u' in [0, 1]`` and written as ``sum_j 2^-j y_j + delta`` with binary
``y_j``; each ``w_j`` models ``y_j v'`` through four linking rows and

    sum_j 2^-j w_j  <=  u' v'  <=  sum_j 2^-j w_j + 2^-T v'.

Bits of a factor are shared by every product it takes part in.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lifted_model import LinearConstraint, build_base_model
from .lp_backend import BINARY, CONTINUOUS, LPModel, write_lp
from .netcase import Network

DEFAULT_BITS = 8
MAX_BITS = 30


@dataclass(frozen=True)
class ExpansionSpec:
    target: str
    T: int
    shift: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"{self.target}: scale must be positive")
        if not 1 <= self.T <= MAX_BITS:
            raise ValueError(f"bit count must lie in [1, {MAX_BITS}]")

    def normalize(self, value: float) -> float:
        return (value - self.shift) / self.scale


def binary_expansion(u: float, T: int) -> tuple[tuple[int, ...], float]:
    """Greedy bits with ``u = sum 2^-j y_j + delta`` and ``0 <= delta <= 2^-T``."""
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    bits, acc = [], 0.0
    for j in range(1, T + 1):
        step = 2.0 ** -j
        if acc + step <= u:
            bits.append(1)
            acc += step
        else:
            bits.append(0)
    return tuple(bits), u - acc


def mccormick_link(y: int, v: int, w: int, v_affine: tuple[float, float] = (1.0, 0.0)) -> list[LinearConstraint]:
    """``w <= v'``, ``w <= y``, ``w >= v' + y - 1``, ``w >= 0`` with ``v' = a v + c``."""
    a, c = v_affine
    return [
        LinearConstraint({w: 1.0, v: -a}, "<=", c, "link_w_le_v"),
        LinearConstraint({w: 1.0, y: -1.0}, "<=", 0.0, "link_w_le_y"),
        LinearConstraint({w: 1.0, v: -a, y: -1.0}, ">=", c - 1.0, "link_w_ge"),
        LinearConstraint({w: 1.0}, ">=", 0.0, "link_w_nonneg"),
    ]


@dataclass
class MilpBuilder:
    """Growing variable/row store with the product-linearization step."""

    T: int = DEFAULT_BITS
    names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    kind: list[int] = field(default_factory=list)
    rows: list[LinearConstraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    expansions: dict[str, dict] = field(default_factory=dict)
    products: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {n: j for j, n in enumerate(self.names)}
        if not 1 <= self.T <= MAX_BITS:
            raise ValueError(f"bit count must lie in [1, {MAX_BITS}]")

    def add_var(self, name, lb, ub, kind=CONTINUOUS) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        self.index[name] = len(self.names)
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.kind.append(kind)
        return self.index[name]

    def _spec(self, name) -> ExpansionSpec:
        j = self.index[name]
        lo, hi = self.lb[j], self.ub[j]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"factor {name} is unbounded and cannot be normalized")
        return ExpansionSpec(name, self.T, lo, hi - lo)

    def expand(self, name: str) -> dict:
        """Bits and remainder for factor ``name`` (created once)."""
        if name in self.expansions:
            return self.expansions[name]
        spec = self._spec(name)
        bits = [self.add_var(f"y_{name}_{j}", 0, 1, BINARY) for j in range(1, self.T + 1)]
        delta = self.add_var(f"delta_{name}", 0.0, 2.0 ** -self.T)
        # (u - shift)/scale = sum 2^-j y_j + delta
        co = {self.index[name]: 1.0 / spec.scale, delta: -1.0}
        for j, y in enumerate(bits, start=1):
            co[y] = -(2.0 ** -j)
        self.rows.append(LinearConstraint(co, "=", spec.shift / spec.scale, "expansion"))
        entry = {"spec": spec, "bits": bits, "delta": delta}
        self.expansions[name] = entry
        return entry

    def linearize_product(self, p: str, u: str, v: str) -> None:
        """Replace ``p = u v`` by the bracket; ``u`` is the expanded factor."""
        jp, ju, jv = self.index[p], self.index[u], self.index[v]
        lo_u, s_u = self.lb[ju], self.ub[ju] - self.lb[ju]
        lo_v, s_v = self.lb[jv], self.ub[jv] - self.lb[jv]
        if s_u == 0 or s_v == 0:
            # a fixed factor makes the product linear
            if s_u == 0:
                co = {jp: 1.0}
                co[jv] = co.get(jv, 0.0) - lo_u
            else:
                co = {jp: 1.0}
                co[ju] = co.get(ju, 0.0) - lo_v
            self.rows.append(LinearConstraint(co, "=", 0.0, "product_fixed"))
            self.products[p] = {"factors": [u, v], "expanded": None, "w": []}
            return
        ex = self.expand(u)
        # v' = (v - lo_v)/s_v
        a, c = 1.0 / s_v, -lo_v / s_v
        ws = []
        for j, y in enumerate(ex["bits"], start=1):
            w = self.add_var(f"w_{p}_{j}", 0.0, 1.0)
            ws.append(w)
            self.rows += mccormick_link(y, jv, w, (a, c))
        # p = lo_v u + lo_u v - lo_u lo_v + s_u s_v z with z bracketed
        base = {jp: 1.0}
        base[ju] = base.get(ju, 0.0) - lo_v
        base[jv] = base.get(jv, 0.0) - lo_u
        k = s_u * s_v
        lower = dict(base)
        for j, w in enumerate(ws, start=1):
            lower[w] = -k * 2.0 ** -j
        self.rows.append(LinearConstraint(lower, ">=", -lo_u * lo_v, "sandwich_lo"))
        upper = dict(lower)
        tail = k * 2.0 ** -self.T
        upper[jv] = upper.get(jv, 0.0) - tail * a
        self.rows.append(LinearConstraint(upper, "<=", -lo_u * lo_v + tail * c, "sandwich_hi"))
        self.products[p] = {"factors": [u, v], "expanded": u, "w": ws}

    def to_lpmodel(self) -> LPModel:
        n = len(self.names)
        cvec = np.zeros(n)
        for j, v in self.objective.items():
            cvec[j] = v
        rows = [r.as_row() for r in self.rows]
        rnames = [f"{r.tag}_{i}" for i, r in enumerate(self.rows)]
        return LPModel.from_rows(cvec, self.lb, self.ub, rows, names=list(self.names),
                                 row_names=rnames, integrality=np.array(self.kind, dtype=int))

    def manifest(self) -> dict:
        return {
            "bits": self.T,
            "expanded": {
                name: {
                    "shift": e["spec"].shift,
                    "scale": e["spec"].scale,
                    "bits": [self.names[j] for j in e["bits"]],
                    "delta": self.names[e["delta"]],
                }
                for name, e in sorted(self.expansions.items())
            },
            "products": {
                p: {"factors": d["factors"], "expanded": d["expanded"],
                    "w": [self.names[j] for j in d["w"]]}
                for p, d in sorted(self.products.items())
            },
        }

    @property
    def binary_count(self) -> int:
        return sum(1 for k in self.kind if k == BINARY)


def build_milp(net: Network, T: int = DEFAULT_BITS, reference_angle: float | None = 0.0) -> MilpBuilder:
    """Base model with every product variable replaced by its ``T``-bit bracket."""
    if T < 1:
        raise ValueError("T must be at least 1")
    mi = build_base_model(net, reference_angle)
    cat = mi.catalog
    b = MilpBuilder(T=T)
    for j, name in enumerate(cat.names):
        b.add_var(name, cat.lb[j], cat.ub[j])
    b.rows = list(mi.constraints)
    b.objective = dict(mi.objective)
    for j in sorted(cat.factors, key=lambda j: cat.names[j]):
        u, v = sorted(cat.factors[j])
        b.linearize_product(cat.names[j], u, v)
    return b


def export_milp(model: MilpBuilder, path, comment: str = "") -> str:
    """Write LP-format text to ``path`` and the manifest next to it; returns the LP text."""
    text = write_lp(model.to_lpmodel(), path, comment or f"binary-expansion MILP, T={model.T}")
    with open(manifest_path(path), "w") as fh:
        json.dump(model.manifest(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return text


def manifest_path(path) -> str:
    path = str(path)
    stem = path[:-3] if path.endswith(".lp") else path
    return stem + ".manifest.json"
