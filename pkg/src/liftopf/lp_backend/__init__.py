"""Linear programming: model container, LP-format I/O and two interchangeable solvers.

``simplex`` is the self-contained reference implementation; ``highs`` wraps
the HiGHS dual simplex for the larger cutting-plane runs.  Both expose
``add_rows`` + ``solve`` with warm starts.
"""
from .lpformat import read_lp, write_lp
from .model import BINARY, CONTINUOUS, INTEGER, LPModel, LPSolution
from .simplex import SimplexSolver, solve_simplex

BACKENDS = ("simplex", "highs")


def make_solver(model: LPModel, backend: str = "highs"):
    if backend == "simplex":
        return SimplexSolver(model)
    if backend == "highs":
        from .highs import HighsSolver
        return HighsSolver(model)
    raise ValueError(f"unknown LP backend {backend!r}; choose from {BACKENDS}")


def solve_lp(model: LPModel, backend: str = "simplex") -> LPSolution:
    return make_solver(model, backend).solve()


__all__ = ["BACKENDS", "BINARY", "CONTINUOUS", "INTEGER", "LPModel", "LPSolution",
           "SimplexSolver", "make_solver", "read_lp", "solve_lp", "solve_simplex", "write_lp"]
