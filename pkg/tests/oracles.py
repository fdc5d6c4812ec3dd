"""Independent reference computations used by several test files."""
import itertools

import numpy as np

from liftopf.lp_backend import LPModel


def random_box_lp(rng, max_n=6, max_m=6):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    c = rng.integers(-5, 6, n).astype(float)
    lb = rng.integers(-3, 1, n).astype(float)
    ub = lb + rng.integers(1, 5, n)
    rows = []
    for _ in range(m):
        a = rng.integers(-4, 5, n).astype(float)
        sense = rng.choice(["<=", ">="])
        rows.append(({j: float(a[j]) for j in range(n) if a[j]}, str(sense), float(rng.integers(-4, 6))))
    return LPModel.from_rows(c, lb, ub, rows)


def vertex_enumeration(model: LPModel):
    """Minimum of a bounded inequality LP over all basic feasible points; ``None`` if infeasible."""
    n = model.num_vars
    A = model.A.toarray()
    G, h = [], []  # G x <= h
    for i, s in enumerate(model.sense):
        if s == "<=":
            G.append(A[i]); h.append(model.rhs[i])
        elif s == ">=":
            G.append(-A[i]); h.append(-model.rhs[i])
        else:
            G.append(A[i]); h.append(model.rhs[i])
            G.append(-A[i]); h.append(-model.rhs[i])
    I = np.eye(n)
    for j in range(n):
        G.append(I[j]); h.append(model.ub[j])
        G.append(-I[j]); h.append(-model.lb[j])
    G, h = np.array(G), np.array(h)
    combos = np.array(list(itertools.combinations(range(len(G)), n)))
    M = G[combos]  # (K, n, n)
    rhs = h[combos]
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-9
    if not ok.any():
        return None
    X = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(X @ G.T <= h + 1e-9, axis=1)
    if not feas.any():
        return None
    return float(np.min(X[feas] @ model.c))
