import json

import numpy as np
import pytest
from scipy.optimize import fsolve

from conftest import two_bus_network
from liftopf import branch_physics as bp
from liftopf import cuts as C
from liftopf import lifted_model as lm
from liftopf.cutting_plane import SolveConfig, run
from liftopf.netcase import CostCurve, Generator, Network
from liftopf.reference import reference_objective, reference_voltages


def two_bus_feasible_cost(net):
    """Cost of a power-flow solution with |V1| = 1 (an upper bound on the optimum)."""
    Y = bp.branch_admittance_matrix(net.branches[0])
    load = complex(net.buses[1].Pd, net.buses[1].Qd)

    def resid(z):
        V = np.array([1.0, complex(*z)])
        S = V * np.conj(Y @ V)
        return [S[1].real + load.real, S[1].imag + load.imag]

    e, f = fsolve(resid, [1.0, 0.0], xtol=1e-12)
    V = {1: 1.0 + 0j, 2: complex(e, f)}
    mi = lm.build_base_model(net)
    x = lm.embed_feasible_point(net, V, mi.catalog).values
    assert lm.max_violation(mi.constraints, x) <= 1e-8
    return mi.objective_value(x)


def monotone(seq):
    return all(b >= a - 1e-9 for a, b in zip(seq, seq[1:]))


def test_two_bus_converges_below_feasible_cost():
    net = two_bus_network()
    ub = two_bus_feasible_cost(net)
    rep = run(net, reference_obj=ub)
    assert rep.status == "converged"
    assert rep.bound <= ub + 1e-6
    assert rep.gap < 0.01
    assert monotone(rep.best_bounds)


def test_backends_agree():
    net = two_bus_network()
    a = run(net, SolveConfig(backend="highs", max_rounds=30))
    b = run(net, SolveConfig(backend="simplex", max_rounds=30))
    assert a.bound == pytest.approx(b.bound, rel=1e-6)


def test_round_limit_status():
    rep = run(two_bus_network(), SolveConfig(max_rounds=1))
    assert rep.status == "round-limit" and rep.rounds == 1
    assert len(rep.bounds) == 1


def test_infeasible_network():
    base = two_bus_network()
    gen = Generator(1, 100.0, 100.0, -1.0, 1.0, CostCurve(0.0, 1.0, 0.0))
    net = Network(base.base_mva, base.buses, (gen,), base.branches, 1, "stuck")
    rep = run(net)
    assert rep.status == "infeasible" and rep.bound is None


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(families=("bogus",))
    with pytest.raises(ValueError):
        SolveConfig(tol_violation=0.0)
    with pytest.raises(ValueError):
        SolveConfig(max_rounds=0)


def test_deterministic_report():
    net = two_bus_network()
    a = json.loads(run(net, SolveConfig(max_rounds=20)).to_json())
    b = json.loads(run(net, SolveConfig(max_rounds=20)).to_json())
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_trajectory_csv():
    rep = run(two_bus_network(), SolveConfig(max_rounds=5))
    lines = rep.trajectory_csv().splitlines()
    assert lines[0] == "round,lp_objective,bound,cuts_added"
    assert len(lines) == 1 + len(rep.bounds)


def test_angle_interval_tightens():
    net = two_bus_network()
    loose = run(net, SolveConfig(reference_angle=None))
    tight = run(net, SolveConfig(reference_angle=None,
                                 angle_intervals=(C.AngleInterval(1, 0.0, 0.0),
                                                  C.AngleInterval(2, -0.2, 0.0))))
    assert tight.bound >= loose.bound - 1e-7


def test_fewer_families_weaker(cases):
    net = cases["case9"]
    full = run(net)
    none = run(net, SolveConfig(families=()))
    assert none.rounds == 1 and none.status == "converged"
    assert none.bound <= full.bound + 1e-7


def test_sdp_with_one_runs():
    rep = run(two_bus_network(), SolveConfig(sdp_with_one=True))
    assert rep.status == "converged"


@pytest.mark.parametrize("name", ["case9", "case30"])
def test_final_pool_contains_reference(name, cases):
    net = cases[name]
    rep = run(net, reference_obj=reference_objective(name))
    assert monotone(rep.bounds[:1] + rep.best_bounds)
    assert rep.bound <= rep.reference_obj * (1 + 1e-7)
    mi = rep.model
    V = reference_voltages(name)
    r = V[net.reference_bus]
    V = {k: v * abs(r) / r for k, v in V.items()}
    x = lm.embed_feasible_point(net, V, mi.catalog).values
    pool = [c.constraint for c in mi.cut_pool]
    assert lm.max_violation(pool, x) <= 1e-7
    assert lm.max_violation(mi.constraints, x) <= 1e-6
    static = sum(1 for c in mi.constraints if c.tag == "delta")
    assert sum(rep.cut_counts.values()) == static + len(pool)
