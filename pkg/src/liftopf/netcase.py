"""MATPOWER case files -> immutable per-unit network model.

Only the subset of the MATPOWER v2 format needed for AC OPF lower bounding
is accepted: polynomial generator costs of degree <= 2, no active branch
angle-difference limits and no ramp limits.  Anything outside that subset
raises :class:`CaseFormatError` instead of being dropped silently.
"""
from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .branch_physics import ZeroImpedanceError, series_admittance

SCHEMA = "network_v1"


class CaseFormatError(ValueError):
    pass


class BusKind(enum.Enum):
    PQ = 1
    PV = 2
    REF = 3


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    Pd: float
    Qd: float
    Gs: float
    Bs: float
    Vmin: float
    Vmax: float

    def __post_init__(self):
        if not self.Vmin > 0:
            raise CaseFormatError(f"bus {self.id}: Vmin must be positive")
        if self.Vmin > self.Vmax:
            raise CaseFormatError(f"bus {self.id}: Vmin > Vmax")


@dataclass(frozen=True)
class CostCurve:
    """Quadratic cost ``c2 p^2 + c1 p + c0`` with ``p`` in per-unit."""

    c2: float
    c1: float
    c0: float

    def __post_init__(self):
        if self.c2 < 0:
            raise CaseFormatError("nonconvex generator cost (c2 < 0)")

    def __call__(self, p: float) -> float:
        return (self.c2 * p + self.c1) * p + self.c0


@dataclass(frozen=True)
class Generator:
    bus: int
    Pmin: float
    Pmax: float
    Qmin: float
    Qmax: float
    cost: CostCurve
    in_service: bool = True

    def __post_init__(self):
        if self.Pmin > self.Pmax:
            raise CaseFormatError(f"generator at bus {self.bus}: Pmin > Pmax")
        if self.Qmin > self.Qmax:
            raise CaseFormatError(f"generator at bus {self.bus}: Qmin > Qmax")


@dataclass(frozen=True)
class BranchParams:
    from_bus: int
    to_bus: int
    r: float
    x: float
    g: float
    b: float
    g_sh: float
    b_sh: float
    tau: float = 1.0
    sigma: float = 0.0
    rate_a: float = 0.0
    in_service: bool = True
    ordinal: int = 0

    @classmethod
    def from_impedance(cls, from_bus, to_bus, r, x, b_sh=0.0, g_sh=0.0, tau=1.0,
                       sigma=0.0, rate_a=0.0, in_service=True, ordinal=0):
        try:
            g, b = series_admittance(r, x)
        except ZeroImpedanceError:
            if in_service:
                raise
            g, b = 0.0, 0.0
        return cls(from_bus, to_bus, r, x, g, b, g_sh, b_sh, tau, sigma,
                   rate_a, in_service, ordinal)

    def __post_init__(self):
        if not self.tau > 0:
            raise CaseFormatError(f"branch {self.key}: tap ratio must be positive")
        if self.rate_a < 0:
            raise CaseFormatError(f"branch {self.key}: negative rating")

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.from_bus, self.to_bus, self.ordinal)

    @property
    def z2(self) -> float:
        return self.r * self.r + self.x * self.x


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    branches: tuple[BranchParams, ...]
    reference_bus: int
    name: str = ""
    _bus_pos: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        pos = {}
        for i, bus in enumerate(self.buses):
            if bus.id in pos:
                raise CaseFormatError(f"duplicate bus id {bus.id}")
            pos[bus.id] = i
        object.__setattr__(self, "_bus_pos", pos)
        refs = [b.id for b in self.buses if b.kind is BusKind.REF]
        if len(refs) != 1:
            raise CaseFormatError(f"expected exactly one reference bus, found {len(refs)}")
        if refs[0] != self.reference_bus:
            raise CaseFormatError("reference_bus does not match the bus kinds")
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in pos:
                    raise CaseFormatError(f"branch {br.from_bus}-{br.to_bus}: unknown bus {end}")
        for gen in self.generators:
            if gen.bus not in pos:
                raise CaseFormatError(f"generator: unknown bus {gen.bus}")

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self._bus_pos[bus_id]]

    def bus_position(self, bus_id: int) -> int:
        return self._bus_pos[bus_id]

    @property
    def active_branches(self) -> list[BranchParams]:
        return [br for br in self.branches if br.in_service]

    @property
    def active_generators(self) -> list[tuple[int, Generator]]:
        return [(i, g) for i, g in enumerate(self.generators) if g.in_service]

    def summary(self) -> str:
        return (f"{len(self.buses)} buses, {len(self.branches)} branches, "
                f"{len(self.generators)} generators")


# ---------------------------------------------------------------- parsing

_BLOCK = re.compile(r"(?:mpc\.)?(\w+)\s*=\s*\[(.*?)\]\s*;?", re.S)
_SCALAR = re.compile(r"(?:mpc\.)?baseMVA\s*=\s*([^;\n]+);")


def _strip_comments(text: str) -> str:
    out = []
    for line in text.splitlines():
        # '%' inside a quoted string (e.g. bus_name cells) is not a comment
        in_str = False
        for i, ch in enumerate(line):
            if ch == "'":
                in_str = not in_str
            elif ch == "%" and not in_str:
                line = line[:i]
                break
        out.append(line)
    return "\n".join(out)


def _parse_matrix(name: str, body: str) -> list[list[float]]:
    rows = []
    for raw in re.split(r"[;\n]", body):
        tokens = raw.replace(",", " ").split()
        if not tokens:
            continue
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise CaseFormatError(f"non-numeric token in '{name}': {exc}") from None
    return rows


def _blocks(text: str) -> dict[str, list[list[float]]]:
    found = {}
    for m in _BLOCK.finditer(text):
        name = m.group(1)
        if name in ("bus", "gen", "branch", "gencost"):
            found[name] = _parse_matrix(name, m.group(2))
    return found


def _need_cols(name, rows, n):
    for i, row in enumerate(rows):
        if len(row) < n:
            raise CaseFormatError(f"'{name}' row {i + 1} has {len(row)} columns, need {n}")


def _cost_row(row, base) -> CostCurve:
    model, n = int(row[0]), int(row[3])
    if model != 2:
        raise CaseFormatError("only polynomial generator costs (MODEL=2) are supported")
    if n > 3:
        raise CaseFormatError(f"polynomial cost of degree {n - 1} is not supported")
    coef = row[4:4 + n]
    if len(coef) < n:
        raise CaseFormatError("gencost row shorter than its coefficient count")
    coef = [0.0] * (3 - n) + list(coef)
    c2, c1, c0 = coef
    return CostCurve(c2 * base * base, c1 * base, c0)


def parse_case(text: str, name: str = "") -> Network:
    text = _strip_comments(text)
    m = _SCALAR.search(text)
    if m is None:
        raise CaseFormatError("missing baseMVA")
    try:
        base = float(m.group(1))
    except ValueError:
        raise CaseFormatError(f"non-numeric baseMVA: {m.group(1)!r}") from None
    if not base > 0:
        raise CaseFormatError("baseMVA must be positive")
    blocks = _blocks(text)
    for req in ("bus", "gen", "branch", "gencost"):
        if req not in blocks:
            raise CaseFormatError(f"missing matrix block '{req}'")

    bus_rows, gen_rows = blocks["bus"], blocks["gen"]
    branch_rows, cost_rows = blocks["branch"], blocks["gencost"]
    _need_cols("bus", bus_rows, 13)
    _need_cols("gen", gen_rows, 10)
    _need_cols("branch", branch_rows, 11)
    _need_cols("gencost", cost_rows, 4)

    buses = []
    for row in bus_rows:
        kind = int(row[1])
        if kind not in (1, 2, 3):
            raise CaseFormatError(f"bus {int(row[0])}: unsupported bus type {kind}")
        buses.append(Bus(int(row[0]), BusKind(kind), row[2] / base, row[3] / base,
                         row[4] / base, row[5] / base, row[12], row[11]))
    ids = {b.id for b in buses}
    refs = [b.id for b in buses if b.kind is BusKind.REF]
    if len(refs) != 1:
        raise CaseFormatError(f"expected exactly one reference bus, found {len(refs)}")

    if len(cost_rows) > len(gen_rows):
        if any(any(v != 0 for v in r[1:]) for r in cost_rows[len(gen_rows):]):
            raise CaseFormatError("reactive power costs are not supported")
    if len(cost_rows) < len(gen_rows):
        raise CaseFormatError("gencost has fewer rows than gen")

    gens = []
    for row, crow in zip(gen_rows, cost_rows):
        bus = int(row[0])
        if bus not in ids:
            raise CaseFormatError(f"generator references unknown bus {bus}")
        if len(row) > 19 and any(v != 0 for v in row[16:20]):
            raise CaseFormatError(f"generator at bus {bus}: ramp limits are not supported")
        gens.append(Generator(bus, row[9] / base, row[8] / base, row[4] / base,
                              row[3] / base, _cost_row(crow, base), row[7] > 0))

    branches = []
    seen: dict[frozenset, int] = {}
    for row in branch_rows:
        f, t = int(row[0]), int(row[1])
        for end in (f, t):
            if end not in ids:
                raise CaseFormatError(f"branch {f}-{t}: unknown bus {end}")
        status = row[10] > 0
        if status and len(row) >= 13:
            angmin, angmax = row[11], row[12]
            unlimited = (angmin <= -360 and angmax >= 360) or (angmin == 0 and angmax == 0)
            if not unlimited:
                raise CaseFormatError(f"branch {f}-{t}: angle-difference limits are not supported")
        pair = frozenset((f, t))
        ordinal = seen.get(pair, -1) + 1
        seen[pair] = ordinal
        tau = row[8] if row[8] != 0 else 1.0
        try:
            branches.append(BranchParams.from_impedance(
                f, t, row[2], row[3], b_sh=row[4], tau=tau, sigma=math.radians(row[9]),
                rate_a=row[5] / base, in_service=status, ordinal=ordinal))
        except ZeroImpedanceError:
            raise CaseFormatError(f"branch {f}-{t}: zero series impedance") from None

    return Network(base, tuple(buses), tuple(gens), tuple(branches), refs[0], name)


def load_case(path) -> Network:
    path = Path(path)
    return parse_case(path.read_text(), name=path.stem)


def bundled_case(name: str) -> Network:
    """Load one of the MATPOWER cases shipped with the package (case9 ... case118)."""
    path = Path(__file__).parent / "data" / "cases" / f"{name}.m"
    if not path.exists():
        raise FileNotFoundError(f"no bundled case named {name!r}")
    return load_case(path)


# ---------------------------------------------------------- serialization

def write_case(net: Network) -> str:
    """Serialize back to MATPOWER syntax.  ``parse_case(write_case(n)) == n``."""
    base = net.base_mva
    lines = [f"function mpc = {net.name or 'case'}", "mpc.version = '2';",
             f"mpc.baseMVA = {base!r};", "mpc.bus = ["]
    for b in net.buses:
        vals = [b.id, b.kind.value, b.Pd * base, b.Qd * base, b.Gs * base, b.Bs * base,
                1, 1.0, 0.0, 0.0, 1, b.Vmax, b.Vmin]
        lines.append("\t" + "\t".join(repr(v) for v in vals) + ";")
    lines += ["];", "mpc.gen = ["]
    for g in net.generators:
        vals = [g.bus, 0.0, 0.0, g.Qmax * base, g.Qmin * base, 1.0, base,
                int(g.in_service), g.Pmax * base, g.Pmin * base]
        lines.append("\t" + "\t".join(repr(v) for v in vals) + ";")
    lines += ["];", "mpc.branch = ["]
    for br in net.branches:
        vals = [br.from_bus, br.to_bus, br.r, br.x, br.b_sh, br.rate_a * base, 0.0, 0.0,
                br.tau, math.degrees(br.sigma), int(br.in_service), -360, 360]
        lines.append("\t" + "\t".join(repr(v) for v in vals) + ";")
    lines += ["];", "mpc.gencost = ["]
    for g in net.generators:
        c = g.cost
        vals = [2, 0, 0, 3, c.c2 / (base * base), c.c1 / base, c.c0]
        lines.append("\t" + "\t".join(repr(v) for v in vals) + ";")
    lines.append("];")
    return "\n".join(lines) + "\n"


def to_dict(net: Network) -> dict:
    return {
        "schema": SCHEMA,
        "name": net.name,
        "base_mva": net.base_mva,
        "reference_bus": net.reference_bus,
        "buses": [
            {"id": b.id, "kind": b.kind.name, "Pd": b.Pd, "Qd": b.Qd, "Gs": b.Gs,
             "Bs": b.Bs, "Vmin": b.Vmin, "Vmax": b.Vmax}
            for b in net.buses
        ],
        "generators": [
            {"bus": g.bus, "Pmin": g.Pmin, "Pmax": g.Pmax, "Qmin": g.Qmin, "Qmax": g.Qmax,
             "cost": {"c2": g.cost.c2, "c1": g.cost.c1, "c0": g.cost.c0},
             "in_service": g.in_service}
            for g in net.generators
        ],
        "branches": [
            {"from": br.from_bus, "to": br.to_bus, "ordinal": br.ordinal, "r": br.r, "x": br.x,
             "g": br.g, "b": br.b, "g_sh": br.g_sh, "b_sh": br.b_sh, "tau": br.tau,
             "sigma": br.sigma, "rate_a": br.rate_a, "in_service": br.in_service}
            for br in net.branches
        ],
    }


def from_dict(d: dict) -> Network:
    if d.get("schema") != SCHEMA:
        raise CaseFormatError(f"unexpected schema {d.get('schema')!r}")
    buses = tuple(Bus(b["id"], BusKind[b["kind"]], b["Pd"], b["Qd"], b["Gs"], b["Bs"],
                      b["Vmin"], b["Vmax"]) for b in d["buses"])
    gens = tuple(Generator(g["bus"], g["Pmin"], g["Pmax"], g["Qmin"], g["Qmax"],
                           CostCurve(**g["cost"]), g["in_service"]) for g in d["generators"])
    branches = tuple(BranchParams(br["from"], br["to"], br["r"], br["x"], br["g"], br["b"],
                                  br["g_sh"], br["b_sh"], br["tau"], br["sigma"], br["rate_a"],
                                  br["in_service"], br["ordinal"]) for br in d["branches"])
    return Network(d["base_mva"], buses, gens, branches, d["reference_bus"], d.get("name", ""))


def to_json(net: Network) -> str:
    return json.dumps(to_dict(net), indent=1)


def from_json(text: str) -> Network:
    return from_dict(json.loads(text))


def max_field_difference(a: Network, b: Network) -> float:
    """Largest absolute difference over all numeric fields; ``inf`` if the structure differs."""
    da, db = to_dict(a), to_dict(b)
    worst = 0.0

    def walk(x, y):
        nonlocal worst
        if isinstance(x, dict) and isinstance(y, dict) and x.keys() == y.keys():
            for k in x:
                walk(x[k], y[k])
        elif isinstance(x, list) and isinstance(y, list) and len(x) == len(y):
            for u, v in zip(x, y):
                walk(u, v)
        elif isinstance(x, bool) or isinstance(x, str) or isinstance(y, (bool, str)):
            if x != y:
                worst = math.inf
        elif isinstance(x, (int, float)) and isinstance(y, (int, float)):
            worst = max(worst, abs(x - y))
        else:
            worst = math.inf

    da.pop("name"), db.pop("name")
    walk(da, db)
    return worst
