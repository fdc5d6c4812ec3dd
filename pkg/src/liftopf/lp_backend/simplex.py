"""Bounded-variable primal simplex on dense working matrices.

Every row gets a slack (``A x + s = b``) whose bounds encode the row sense.
Rows whose slack cannot absorb the starting residual receive an artificial
column; phase 1 drives the artificials to zero, phase 2 optimizes the real
objective with the artificials fixed at zero.  Nonbasic variables always sit
at a finite bound; the ratio test includes bound flips of the entering
variable.

Pricing takes the most attractive reduced cost and falls back to Bland's
smallest-index rule once 50 consecutive degenerate pivots are seen.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as la

from .model import LPModel, LPSolution

DEGENERATE_SWITCH = 50
PIVOT_TOL = 1e-9
BREAKDOWN_TOL = 1e-11
OPT_TOL = 1e-9
STEP_TOL = 1e-12


class NumericalBreakdown(RuntimeError):
    pass


class _Work:
    """Working arrays for one solve: columns are [x | slacks | artificials]."""

    def __init__(self, A, b, lo, hi, basis, value):
        self.A, self.b = A, b
        self.lo, self.hi = lo, hi
        self.basis = basis
        self.value = value
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[basis] = True

    def factor(self):
        B = self.A[:, self.basis]
        try:
            lu = la.lu_factor(B, check_finite=False)
        except (la.LinAlgError, ValueError) as exc:
            raise NumericalBreakdown(f"singular basis: {exc}") from None
        if np.min(np.abs(np.diag(lu[0]))) < BREAKDOWN_TOL:
            raise NumericalBreakdown("basis matrix is numerically singular")
        return lu

    def refresh_basic(self, lu):
        nb = ~self.is_basic
        r = self.b - self.A[:, nb] @ self.value[nb]
        self.value[self.basis] = la.lu_solve(lu, r, check_finite=False)


def _run_phase(w: _Work, cost: np.ndarray, max_iter: int, it0: int) -> tuple[str, int]:
    it = it0
    degenerate_run = 0
    while True:
        if it >= max_iter:
            return "iteration-limit", it
        lu = w.factor()
        w.refresh_basic(lu)
        y = la.lu_solve(lu, cost[w.basis], trans=1, check_finite=False)
        d = cost - w.A.T @ y
        movable = (~w.is_basic) & (w.hi > w.lo)
        at_lo = w.value <= w.lo
        can_up = movable & (w.value < w.hi) & (d < -OPT_TOL) & (at_lo | np.isinf(w.lo))
        can_dn = movable & (w.value > w.lo) & (d > OPT_TOL) & ~at_lo
        cand = np.flatnonzero(can_up | can_dn)
        if cand.size == 0:
            return "optimal", it
        if degenerate_run >= DEGENERATE_SWITCH:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        direction = 1.0 if can_up[j] else -1.0

        alpha = la.lu_solve(lu, w.A[:, j], check_finite=False)
        # basic values move by -direction * t * alpha
        move = -direction * alpha
        xb = w.value[w.basis]
        lob, hib = w.lo[w.basis], w.hi[w.basis]
        ratios = np.full(len(w.basis), np.inf)
        dec = move < -PIVOT_TOL
        inc = move > PIVOT_TOL
        ratios[dec] = (xb[dec] - lob[dec]) / -move[dec]
        ratios[inc] = (hib[inc] - xb[inc]) / move[inc]
        ratios = np.maximum(ratios, 0.0)
        t_flip = w.hi[j] - w.lo[j]
        t_row = float(np.min(ratios)) if ratios.size else np.inf
        t = min(t_row, t_flip)
        if not np.isfinite(t):
            return "unbounded", it

        if t_flip <= t_row:
            w.value[j] = w.hi[j] if direction > 0 else w.lo[j]
            leave = None
        else:
            ties = np.flatnonzero(ratios <= t_row + STEP_TOL)
            if degenerate_run >= DEGENERATE_SWITCH:
                leave = int(ties[np.argmin(np.asarray(w.basis)[ties])])
            else:
                leave = int(ties[np.argmax(np.abs(alpha[ties]))])
            if abs(alpha[leave]) < BREAKDOWN_TOL:
                raise NumericalBreakdown(f"pivot magnitude {abs(alpha[leave]):.3e}")
        w.value[w.basis] = xb + move * t
        w.value[j] = w.value[j] + direction * t if leave is not None else w.value[j]
        if leave is not None:
            out = w.basis[leave]
            w.value[out] = w.lo[out] if move[leave] < 0 else w.hi[out]
            w.is_basic[out] = False
            w.is_basic[j] = True
            w.basis[leave] = j
        degenerate_run = degenerate_run + 1 if t <= STEP_TOL else 0
        it += 1


class SimplexSolver:
    """Reusable solver.  ``add_rows`` followed by ``solve`` restarts from the previous basis."""

    def __init__(self, model: LPModel, max_iter: int | None = None):
        self.model = model
        self.lb, self.ub = model.finite_bounds()
        self.max_iter = max_iter
        self._basis = None  # over x + slack columns
        self._value = None

    def add_rows(self, rows) -> None:
        self.model.append_rows(rows)

    def _slack_bounds(self):
        m = self.model.num_rows
        lo, hi = np.zeros(m), np.zeros(m)
        for i, s in enumerate(self.model.sense):
            if s == "<=":
                hi[i] = np.inf
            elif s == ">=":
                lo[i] = -np.inf
        return lo, hi

    def _start(self):
        model = self.model
        n, m = model.num_vars, model.num_rows
        A = model.A.toarray()
        s_lo, s_hi = self._slack_bounds()
        value = np.zeros(n + m)
        basis = None
        if self._basis is not None and self._value is not None:
            old_m = len(self._value) - n
            value[:n] = self._value[:n]
            value[n:n + old_m] = self._value[n:]
            basis = list(self._basis) + list(range(n + old_m, n + m))
        else:
            value[:n] = np.where(np.isfinite(self.lb), self.lb, self.ub)
            basis = list(range(n, n + m))
        value[:n] = np.clip(value[:n], self.lb, self.ub)

        # residual each basic slack would need if the structural basis were kept
        full = np.hstack([A, np.eye(m)])
        lo = np.concatenate([self.lb, s_lo])
        hi = np.concatenate([self.ub, s_hi])
        is_basic = np.zeros(n + m, dtype=bool)
        is_basic[basis] = True
        try:
            lu = la.lu_factor(full[:, basis], check_finite=False)
            if np.min(np.abs(np.diag(lu[0]))) < BREAKDOWN_TOL:
                raise la.LinAlgError("singular")
        except (la.LinAlgError, ValueError):
            basis = list(range(n, n + m))
            is_basic[:] = False
            is_basic[basis] = True
            value[:n] = np.clip(np.where(np.isfinite(self.lb), self.lb, self.ub), self.lb, self.ub)
            lu = la.lu_factor(full[:, basis], check_finite=False)
        nb = ~is_basic
        value[basis] = la.lu_solve(lu, model.rhs - full[:, nb] @ value[nb], check_finite=False)

        # basic variables outside their bounds get an artificial that takes over
        art_cols, art_sign = [], []
        for pos, col in enumerate(basis):
            v = value[col]
            if v < lo[col] - 1e-12 or v > hi[col] + 1e-12:
                target = lo[col] if v < lo[col] else hi[col]
                art_cols.append(pos)
                art_sign.append((col, target, v - target))
        k = len(art_cols)
        Aw = np.hstack([full, np.zeros((m, k))])
        low = np.concatenate([lo, np.zeros(k)])
        hiw = np.concatenate([hi, np.full(k, np.inf)])
        valw = np.concatenate([value, np.zeros(k)])
        # the column leaving the basis sits at the bound it violated; the
        # artificial absorbs the difference in the direction of B^-1 a_col
        B = full[:, basis]
        for a, (pos, (col, target, excess)) in enumerate(zip(art_cols, art_sign)):
            valw[col] = target
            Aw[:, n + m + a] = np.sign(excess) * B[:, pos]
            valw[n + m + a] = abs(excess)
            basis[pos] = n + m + a
        return _Work(Aw, model.rhs.copy(), low, hiw, basis, valw), n, m, k

    def solve(self) -> LPSolution:
        model = self.model
        n, m = model.num_vars, model.num_rows
        max_iter = self.max_iter if self.max_iter is not None else 50 * (m + n)
        if m == 0:
            x = np.where(model.c > 0, self.lb, np.where(model.c < 0, self.ub, np.clip(0, self.lb, self.ub)))
            return LPSolution("optimal", x, np.zeros(0), model.objective(x), 0)
        try:
            w, n, m, k = self._start()
            it = 0
            if k:
                cost1 = np.zeros(n + m + k)
                cost1[n + m:] = 1.0
                status, it = _run_phase(w, cost1, max_iter, 0)
                if status != "optimal":
                    return LPSolution(status, iterations=it, message="phase 1")
                infeas = float(np.sum(w.value[n + m:]))
                scale = 1.0 + float(np.max(np.abs(model.rhs), initial=0.0))
                if infeas > 1e-9 * scale:
                    return LPSolution("infeasible", iterations=it,
                                      message=f"phase 1 residual {infeas:.3e}")
                w.hi[n + m:] = 0.0
                w.value[n + m:] = np.minimum(w.value[n + m:], 0.0)
            cost2 = np.zeros(n + m + k)
            cost2[:n] = model.c
            status, it = _run_phase(w, cost2, max_iter, it)
        except NumericalBreakdown as exc:
            return LPSolution("numerical", message=str(exc))
        if status != "optimal":
            return LPSolution(status, iterations=it)

        lu = w.factor()
        w.refresh_basic(lu)
        y = la.lu_solve(lu, cost2[w.basis], trans=1, check_finite=False)
        x = w.value[:n].copy()
        # keep the warm-start basis only if no artificial is still basic
        if all(col < n + m for col in w.basis):
            self._basis = list(w.basis)
            self._value = w.value[:n + m].copy()
        else:
            self._basis, self._value = None, None
        return LPSolution("optimal", x, y, model.objective(x), it)


def solve_simplex(model: LPModel, max_iter: int | None = None) -> LPSolution:
    return SimplexSolver(model, max_iter=max_iter).solve()
