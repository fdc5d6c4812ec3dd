"""Cut families over the lifted model and their separators.

Every cut is stored as ``a.x <= rhs`` with ``||a||_2 = 1``; its ``violation``
is ``a.x_hat - rhs`` at the point it was generated from.  Separators return
``None`` when the point violates the family by at most ``tol``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .lifted_model import LinearConstraint, VarCatalog
from .netcase import BranchParams, Generator, Network

FAMILIES = ("delta", "loss", "circle", "sdp", "rating", "cost")
TOL = 1e-6
TOL_PSD = 1e-8
JACOBI_SWEEPS = 100


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class AngleInterval:
    bus: int
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("angle interval endpoints must be finite")
        if self.lo > self.hi:
            raise ValueError(f"interval for bus {self.bus}: lo > hi")
        if self.hi - self.lo > 2 * math.pi + 1e-12:
            raise ValueError(f"interval for bus {self.bus} is wider than 2*pi")

    def contains(self, other: "AngleInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


@dataclass
class Cut:
    constraint: LinearConstraint
    family: str
    source: str
    violation: float

    def slack(self, x) -> float:
        return -self.constraint.violation(x)


def make_cut(coeffs: dict[int, float], rhs: float, family: str, source: str,
             x=None, tol: float | None = None) -> Cut | None:
    """Normalize ``coeffs.x <= rhs``; if ``x`` is given, keep it only when violated by more than ``tol``."""
    coeffs = {j: v for j, v in coeffs.items() if v != 0.0}
    norm = math.sqrt(sum(v * v for v in coeffs.values()))
    if norm == 0.0:
        return None
    coeffs = {j: v / norm for j, v in coeffs.items()}
    con = LinearConstraint(coeffs, "<=", rhs / norm, family)
    viol = 0.0 if x is None else con.violation(x)
    if tol is not None and not viol > tol:
        return None
    return Cut(con, family, source, viol)


def _add(co: dict, j: int, v: float) -> None:
    co[j] = co.get(j, 0.0) + v


def branch_label(br: BranchParams) -> str:
    return f"{br.from_bus}-{br.to_bus}" + (f"#{br.ordinal}" if br.ordinal else "")


# ----------------------------------------------------------------- delta

def max_abs_cos(lo: float, hi: float, phi: float) -> float:
    """``max |cos(t - phi)|`` over ``t in [lo, hi]``."""
    if hi - lo >= math.pi:
        return 1.0
    a, b = lo - phi, hi - phi
    # |cos| peaks at multiples of pi
    if math.floor(b / math.pi) * math.pi >= a:
        return 1.0
    return max(abs(math.cos(a)), abs(math.cos(b)))


def _as_pair(interval):
    if interval is None:
        return None
    if isinstance(interval, AngleInterval):
        return interval.lo, interval.hi
    return tuple(interval)


def delta_bounds(br: BranchParams, vmax: float, interval=None) -> tuple[float, float]:
    """Bounds on ``|g e + b f|`` and ``|g f - b e|`` at a bus with magnitude ``<= vmax``."""
    if vmax <= 0:
        raise ValueError("vmax must be positive")
    ymag = math.hypot(br.g, br.b) * vmax
    iv = _as_pair(interval)
    if iv is None:
        return ymag, ymag
    phi = math.atan2(br.b, br.g)
    phi2 = math.atan2(br.g, -br.b)
    return ymag * max_abs_cos(*iv, phi), ymag * max_abs_cos(*iv, phi2)


def delta_cuts(br: BranchParams, cat: VarCatalog, mu: float, nu: float,
               mu_rev: float, nu_rev: float) -> list[Cut]:
    """``+-(P - shunt) <= mu dE + nu dF`` at both ends of the branch."""
    if min(mu, nu, mu_rev, nu_rev) < 0:
        raise ValueError("delta bounds must be nonnegative")
    bv = cat.branch_vars(br)
    src = branch_label(br)
    t = br.tau
    out = []
    ends = (
        (bv.Pkm, bv.V2k, br.g_sh / (2 * t * t), mu / t, nu / t, bv.dE_km, bv.dF_km),
        (bv.Pmk, bv.V2m, br.g_sh / 2, mu_rev, nu_rev, bv.dE_mk, bv.dF_mk),
    )
    for p, v2, sh, a, b, de, df in ends:
        for sign in (1.0, -1.0):
            co = {}
            _add(co, p, sign)
            _add(co, v2, -sign * sh)
            _add(co, de, -a)
            _add(co, df, -b)
            cut = make_cut(co, 0.0, "delta", src)
            if cut is not None:
                out.append(cut)
    return out


def all_delta_cuts(net: Network, cat: VarCatalog, intervals: dict | None = None) -> list[Cut]:
    intervals = intervals or {}
    out = []
    for br in net.active_branches:
        mu, nu = delta_bounds(br, net.bus(br.from_bus).Vmax, intervals.get(br.from_bus))
        mu_r, nu_r = delta_bounds(br, net.bus(br.to_bus).Vmax, intervals.get(br.to_bus))
        out += delta_cuts(br, cat, mu, nu, mu_r, nu_r)
    return out


# ------------------------------------------------------------------ loss

def loss_separate(br: BranchParams, cat: VarCatalog, x, side: str = "m", tol: float = TOL) -> Cut | None:
    """Tangent of ``g (dE^2 + dF^2) <= Pkm + Pmk - (g_sh/2)(V2k/tau^2 + V2m)`` at ``x``."""
    if br.g < 0:
        warnings.warn(f"branch {branch_label(br)} has g < 0; loss cut skipped", stacklevel=2)
        return None
    bv = cat.branch_vars(br)
    de, df = (bv.dE_mk, bv.dF_mk) if side == "m" else (bv.dE_km, bv.dF_km)
    d1, d2 = x[de], x[df]
    g = br.g
    co = {}
    _add(co, de, 2 * g * d1)
    _add(co, df, 2 * g * d2)
    _add(co, bv.Pkm, -1.0)
    _add(co, bv.Pmk, -1.0)
    _add(co, bv.V2k, br.g_sh / (2 * br.tau**2))
    _add(co, bv.V2m, br.g_sh / 2)
    return make_cut(co, g * (d1 * d1 + d2 * d2), "loss", f"{branch_label(br)}:{side}", x, tol)


# ---------------------------------------------------------------- circle

def circle_constant(br: BranchParams) -> float:
    return 1.0 / (br.tau**2 * br.z2)


def circle_separate(br: BranchParams, cat: VarCatalog, x, end: str = "k", tol: float = TOL) -> Cut | None:
    """Supporting hyperplane of ``||(2a, 2b, c V2own - V2oth)|| <= c V2own + V2oth``."""
    bv = cat.branch_vars(br)
    if end == "k":
        a, b, own, oth = bv.alpha_km, bv.beta_km, bv.V2k, bv.V2m
    else:
        a, b, own, oth = bv.alpha_mk, bv.beta_mk, bv.V2m, bv.V2k
    c = circle_constant(br)
    w = np.array([2 * x[a], 2 * x[b], c * x[own] - x[oth]])
    nw = float(np.linalg.norm(w))
    if nw == 0.0 or nw - (c * x[own] + x[oth]) <= 0:
        return None
    n = w / nw
    co = {}
    _add(co, a, 2 * n[0])
    _add(co, b, 2 * n[1])
    _add(co, own, c * n[2] - c)
    _add(co, oth, -n[2] - 1.0)
    return make_cut(co, 0.0, "circle", f"{branch_label(br)}:{end}", x, tol)


# ---------------------------------------------------------------- rating

def rating_separate(br: BranchParams, cat: VarCatalog, x, end: str = "k", tol: float = TOL) -> Cut | None:
    if br.rate_a <= 0:
        return None
    bv = cat.branch_vars(br)
    p, q = (bv.Pkm, bv.Qkm) if end == "k" else (bv.Pmk, bv.Qmk)
    ph, qh = x[p], x[q]
    mag = math.hypot(ph, qh)
    if mag * mag <= br.rate_a**2 + tol:
        return None
    return make_cut({p: ph, q: qh}, br.rate_a * mag, "rating", f"{branch_label(br)}:{end}", x, tol)


# ------------------------------------------------------------------ cost

def cost_separate(gen: Generator, index: int, cat: VarCatalog, x, tol: float = TOL) -> Cut | None:
    """Tangent of the quadratic cost at the point's output, if ``t`` underestimates it."""
    p, t = cat[f"pg_{index + 1}"], cat[f"t_{index + 1}"]
    ph = x[p]
    c = gen.cost
    slope = 2 * c.c2 * ph + c.c1
    return make_cut({t: -1.0, p: slope}, c.c2 * ph * ph - c.c0, "cost", f"gen{index + 1}", x, tol)


# ------------------------------------------------------------------- sdp

def jacobi_eigh(M: np.ndarray, max_sweeps: int = JACOBI_SWEEPS, tol: float = 1e-14):
    """Cyclic Jacobi eigen-decomposition of a small symmetric matrix."""
    A = np.array(M, dtype=float)
    A = (A + A.T) / 2
    n = A.shape[0]
    V = np.eye(n)
    scale = max(float(np.max(np.abs(A))), 1.0) if n else 1.0
    mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        if n < 2 or float(np.sqrt(np.sum(A[mask] ** 2))) <= tol * scale:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                if abs(theta) > 1e150:
                    t = 1 / (2 * theta)  # theta^2 would overflow
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                # A <- R' A R with R the (p, q) plane rotation
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :], A[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
    raise NumericalFailure(f"Jacobi did not converge in {max_sweeps} sweeps")


def psd_certificate(M, tol: float = TOL_PSD):
    """Unit ``u`` with ``u' M u < -tol`` (minimum eigenvector), or ``None`` if ``M`` is PSD to ``tol``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if M.shape[0] > 9:
        raise ValueError("certificate search is limited to dimension 9")
    Ms = (M + M.T) / 2
    try:
        # quick screen: Cholesky of M + tol I succeeds iff min eigenvalue > -tol
        np.linalg.cholesky(Ms + tol * np.eye(M.shape[0]))
        return None
    except np.linalg.LinAlgError:
        pass
    vals, vecs = jacobi_eigh(Ms)
    i = int(np.argmin(vals))
    if vals[i] >= -tol:
        return None
    u = vecs[:, i] / np.linalg.norm(vecs[:, i])
    # sign convention: first nonzero entry positive
    nz = np.flatnonzero(np.abs(u) > 1e-12)
    if nz.size and u[nz[0]] < 0:
        u = -u
    return u, float(u @ Ms @ u)


def branch_subsets(net: Network) -> list[tuple[int, ...]]:
    """Default SDP subsets: each connected bus pair once, in branch order."""
    seen, out = set(), []
    for br in net.active_branches:
        pair = (min(br.from_bus, br.to_bus), max(br.from_bus, br.to_bus))
        if pair not in seen:
            seen.add(pair)
            out.append((br.from_bus, br.to_bus))
    return out


def moment_matrix(cat: VarCatalog, x, buses, include_one: bool = False):
    """Matrix of product values for ``w = ([1,] e_b1, f_b1, e_b2, f_b2, ...)`` and its index map."""
    coords = [(s, b) for b in buses for s in ("e", "f")]
    idx = {}
    for i, (s1, b1) in enumerate(coords):
        for j, (s2, b2) in enumerate(coords):
            name = VarCatalog.product_name(s1, b1, s2, b2)
            if name not in cat:
                raise KeyError(f"product variable {name} is not in the model")
            idx[i, j] = cat[name]
    n = len(coords) + (1 if include_one else 0)
    off = 1 if include_one else 0
    W = np.zeros((n, n))
    ref = {}
    for (i, j), v in idx.items():
        W[i + off, j + off] = x[v]
        ref[i + off, j + off] = v
    if include_one:
        W[0, 0] = 1.0
        for i, (s, b) in enumerate(coords):
            v = cat[f"{s}_{b}"]
            W[0, i + 1] = W[i + 1, 0] = x[v]
            ref[0, i + 1] = ref[i + 1, 0] = v
    return W, ref


def sdp_separate(cat: VarCatalog, x, buses, include_one: bool = False, tol: float = TOL,
                 tol_psd: float = TOL_PSD) -> Cut | None:
    """``u' W u >= 0`` for the certificate ``u`` of the subset's moment matrix."""
    W, ref = moment_matrix(cat, x, buses, include_one)
    cert = psd_certificate(W, tol_psd)
    if cert is None:
        return None
    u, _ = cert
    co, const = {}, 0.0
    n = len(u)
    for i in range(n):
        for j in range(n):
            w = u[i] * u[j]
            if (i, j) in ref:
                _add(co, ref[i, j], -w)
            else:
                const += w
    # -sum u_i u_j W_ij <= const
    return make_cut(co, const, "sdp", "sdp:" + ",".join(str(b) for b in buses), x, tol)


# ------------------------------------------------------------- audit log

def cut_record(cut: Cut, cat: VarCatalog) -> dict:
    return {
        "family": cut.family,
        "source": cut.source,
        "coefficients": {cat.names[j]: v for j, v in sorted(cut.constraint.coeffs.items())},
        "sense": cut.constraint.sense,
        "rhs": cut.constraint.rhs,
        "violation": cut.violation,
    }


def write_cut_log(cuts, cat: VarCatalog, path) -> None:
    with open(path, "w") as fh:
        json.dump([cut_record(c, cat) for c in cuts], fh, indent=1)
        fh.write("\n")
