from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

BIG_BOUND = 1e6
SENSES = ("<=", "=", ">=")

CONTINUOUS, BINARY, INTEGER = 0, 1, 2


@dataclass
class LPModel:
    """``min c.x + obj_const`` s.t. ``A x (sense) rhs``, ``lb <= x <= ub``."""

    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    A: sp.csr_matrix
    sense: list[str]
    rhs: np.ndarray
    names: list[str] | None = None
    row_names: list[str] | None = None
    obj_const: float = 0.0
    integrality: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.A = sp.csr_matrix(self.A, shape=(len(self.rhs), len(self.c)))
        n = len(self.c)
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bound arrays do not match the variable count")
        if len(self.sense) != len(self.rhs):
            raise ValueError("sense and rhs lengths differ")
        if any(s not in SENSES for s in self.sense):
            raise ValueError(f"unknown row sense in {set(self.sense)}")
        if np.any(self.lb > self.ub):
            bad = int(np.argmax(self.lb > self.ub))
            raise ValueError(f"variable {bad}: lower bound exceeds upper bound")
        if self.integrality is None:
            self.integrality = np.zeros(n, dtype=int)

    @property
    def num_vars(self) -> int:
        return len(self.c)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    @classmethod
    def from_rows(cls, c, lb, ub, rows, names=None, row_names=None, obj_const=0.0,
                  integrality=None) -> "LPModel":
        """Build from ``rows = [(coeffs: dict[int, float], sense, rhs), ...]``."""
        n = len(c)
        data, ind, ptr = [], [], [0]
        sense, rhs = [], []
        for coeffs, s, r in rows:
            for j, v in coeffs.items():
                ind.append(j)
                data.append(v)
            ptr.append(len(ind))
            sense.append(s)
            rhs.append(r)
        A = sp.csr_matrix((data, ind, ptr), shape=(len(rhs), n))
        return cls(np.asarray(c, float), lb, ub, A, sense, np.asarray(rhs, float), names,
                   row_names, obj_const, integrality)

    def finite_bounds(self, big: float = BIG_BOUND) -> tuple[np.ndarray, np.ndarray]:
        lb, ub = self.lb.copy(), self.ub.copy()
        if np.any(~np.isfinite(lb)) or np.any(~np.isfinite(ub)):
            warnings.warn(f"infinite variable bounds replaced by +-{big:g}; "
                          "the model builder should supply finite bounds", stacklevel=3)
            lb[~np.isfinite(lb)] = -big
            ub[~np.isfinite(ub)] = big
        return lb, ub

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def primal_residual(self, x: np.ndarray) -> float:
        """Largest violation of a row or a bound at ``x`` (0 when feasible)."""
        act = self.row_activity(x)
        worst = 0.0
        for s in SENSES:
            mask = np.array([q == s for q in self.sense], dtype=bool)
            if not mask.any():
                continue
            d = act[mask] - self.rhs[mask]
            if s == "<=":
                worst = max(worst, float(np.max(d, initial=0.0)))
            elif s == ">=":
                worst = max(worst, float(np.max(-d, initial=0.0)))
            else:
                worst = max(worst, float(np.max(np.abs(d), initial=0.0)))
        worst = max(worst, float(np.max(self.lb - x, initial=0.0)),
                    float(np.max(x - self.ub, initial=0.0)))
        return worst

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.obj_const

    def dual_objective(self, y: np.ndarray) -> float:
        """Lagrangian dual value for row multipliers ``y`` (``c - A^T y`` priced at the bounds).

        Valid as a lower bound only when ``y`` has the right sign per row:
        ``y <= 0`` on ``<=`` rows and ``y >= 0`` on ``>=`` rows.
        """
        d = self.c - self.A.T @ y
        lb, ub = self.lb, self.ub
        at = np.where(d > 0, lb, ub)
        terms = np.where(d == 0, 0.0, d * at)
        return float(self.rhs @ y + np.sum(terms)) + self.obj_const

    def append_rows(self, rows) -> None:
        extra = LPModel.from_rows(self.c, self.lb, self.ub, rows)
        self.A = sp.vstack([self.A, extra.A], format="csr")
        self.sense = list(self.sense) + extra.sense
        self.rhs = np.concatenate([self.rhs, extra.rhs])
        if self.row_names is not None:
            start = len(self.row_names)
            self.row_names = list(self.row_names) + [f"r{start + i}" for i in range(len(rows))]


@dataclass
class LPSolution:
    status: str  # optimal | infeasible | unbounded | iteration-limit | numerical
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"
