from __future__ import annotations

import highspy
import numpy as np

from .model import LPModel, LPSolution

_STATUS = {
    "kOptimal": "optimal",
    "kInfeasible": "infeasible",
    "kUnbounded": "unbounded",
    "kUnboundedOrInfeasible": "infeasible",
    "kIterationLimit": "iteration-limit",
    "kTimeLimit": "iteration-limit",
}


def _row_bounds(sense, rhs):
    lo = np.where(np.array([s == "<=" for s in sense], dtype=bool), -highspy.kHighsInf, rhs)
    hi = np.where(np.array([s == ">=" for s in sense], dtype=bool), highspy.kHighsInf, rhs)
    return lo.astype(float), hi.astype(float)


class HighsSolver:
    """HiGHS dual simplex; appended rows are solved from the previous basis."""

    def __init__(self, model: LPModel, threads: int = 1):
        self.model = model
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", threads)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("solver", "simplex")
        h.setOptionValue("presolve", "off")
        lb, ub = model.finite_bounds()
        h.addVars(model.num_vars, lb, ub)
        h.changeColsCost(model.num_vars, np.arange(model.num_vars, dtype=np.int32), model.c)
        self.h = h
        self._push_rows(model.A, model.sense, model.rhs)

    def _push_rows(self, A, sense, rhs):
        if A.shape[0] == 0:
            return
        lo, hi = _row_bounds(sense, rhs)
        A = A.tocsr()
        self.h.addRows(A.shape[0], lo, hi, A.nnz, A.indptr[:-1].astype(np.int32),
                       A.indices.astype(np.int32), A.data.astype(float))

    def add_rows(self, rows) -> None:
        start = self.model.num_rows
        self.model.append_rows(rows)
        A = self.model.A[start:]
        self._push_rows(A, self.model.sense[start:], self.model.rhs[start:])

    def solve(self) -> LPSolution:
        self.h.run()
        status = self.h.getModelStatus()
        name = _STATUS.get(status.name, "numerical")
        info = self.h.getInfo()
        if name != "optimal":
            return LPSolution(name, iterations=int(info.simplex_iteration_count),
                              message=self.h.modelStatusToString(status))
        sol = self.h.getSolution()
        x = np.array(sol.col_value)
        y = np.array(sol.row_dual)
        return LPSolution("optimal", x, y, self.model.objective(x),
                          int(info.simplex_iteration_count))


def solve_highs(model: LPModel) -> LPSolution:
    return HighsSolver(model).solve()
