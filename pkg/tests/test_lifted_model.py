import math

import numpy as np
import pytest

from conftest import random_profile, two_bus_network
from liftopf import branch_physics as bp
from liftopf import lifted_model as lm
from liftopf.lp_backend import read_lp, write_lp
from liftopf.netcase import CostCurve, Generator
from liftopf.reference import reference_objective, reference_voltages


def test_two_bus_catalog_size():
    mi = lm.build_base_model(two_bus_network())
    assert len(mi.catalog) == 31
    groups = mi.catalog.group
    assert groups.count("prod") == 10 and groups.count("absdiff") == 4
    assert {groups.count(g) for g in ("pg", "qg", "t")} == {1}


def test_names_are_deterministic():
    a = lm.build_base_model(two_bus_network()).catalog.names
    b = lm.build_base_model(two_bus_network()).catalog.names
    assert a == b
    for name in ("V2_1", "e_2", "P_1_2", "P_2_1", "Q_2_1", "dE_1_2", "dF_2_1", "alpha_2_1",
                 "EE_1", "EF_2", "EF_1_2", "FE_1_2", "pg_1", "t_1"):
        assert name in a


def test_every_variable_bounded(cases):
    for net in cases.values():
        mi = lm.build_base_model(net)
        assert np.all(np.isfinite(mi.lb)) and np.all(np.isfinite(mi.ub))
        assert np.all(mi.lb <= mi.ub)


def test_reference_fixing_rows():
    mi = lm.build_base_model(two_bus_network())
    cat = mi.catalog
    assert cat.lb[cat["f_1"]] == cat.ub[cat["f_1"]] == 0.0
    assert cat.lb[cat["e_1"]] == pytest.approx(0.9)
    free = lm.build_base_model(two_bus_network(), reference_angle=None).catalog
    assert free.lb[free["f_1"]] == pytest.approx(-1.1)


def test_general_reference_angle():
    theta = 0.4
    net = two_bus_network()
    mi = lm.build_base_model(net, reference_angle=theta)
    rows = [c for c in mi.constraints if c.tag == "ref_angle"]
    assert len(rows) == 1
    V = {1: 1.05 * complex(math.cos(theta), math.sin(theta)), 2: 0.98 + 0.1j}
    pt = lm.embed_feasible_point(net, V, mi.catalog)
    assert abs(rows[0].violation(pt.values)) <= 1e-12
    cat = mi.catalog
    for name in ("e_1", "f_1", "EE_1", "FF_1", "EF_1", "EF_1_2", "FE_1_2"):
        j = cat[name]
        assert cat.lb[j] - 1e-12 <= pt[name] <= cat.ub[j] + 1e-12


def test_unit_tap_absdiff_rows():
    mi = lm.build_base_model(two_bus_network())
    cat = mi.catalog
    rows = [c for c in mi.constraints if c.tag == "absdiff" and cat["dE_1_2"] in c.coeffs]
    got = sorted(tuple(sorted((cat.names[j], round(v, 12)) for j, v in r.coeffs.items())) for r in rows)
    assert got == sorted([
        (("dE_1_2", 1.0), ("e_1", -1.0), ("e_2", 1.0)),
        (("dE_1_2", 1.0), ("e_1", 1.0), ("e_2", -1.0)),
    ])


def test_flow_coefficients_simple_case():
    br = two_bus_network().branches[0]
    co = lm.flow_coefficients(br)
    g, b = br.g, br.b
    assert co["Pkm"]["EEk"] == pytest.approx(g) and co["Pkm"]["EE"] == pytest.approx(-g)
    assert co["Pkm"]["EF"] == pytest.approx(b) and co["Pkm"]["FE"] == pytest.approx(-b)
    assert co["Qkm"]["EEk"] == pytest.approx(-b) and co["Qkm"]["EE"] == pytest.approx(b)
    assert co["Qkm"]["EF"] == pytest.approx(g) and co["Qkm"]["FE"] == pytest.approx(-g)


def test_flat_lossless_point():
    net = two_bus_network(r=0.0, x=0.1)
    pt = lm.embed_feasible_point(net, {1: 1 + 0j, 2: 1 + 0j})
    for name in ("P_1_2", "P_2_1", "dE_1_2", "dF_1_2", "dE_2_1", "dF_2_1"):
        assert pt[name] == pytest.approx(0.0, abs=1e-15)


def test_embedded_point_identities(cases, rng):
    for net in cases.values():
        mi = lm.build_base_model(net)
        cat = mi.catalog
        for _ in range(3):
            pt = lm.embed_feasible_point(net, random_profile(net, rng), cat)
            x = pt.values
            assert lm.max_violation(mi.constraints, x, lm.PHYSICS_TAGS) <= 1e-9
            for bus in net.buses:
                k = bus.id
                assert pt[f"V2_{k}"] == pt[f"EE_{k}"] + pt[f"FF_{k}"]
            for br in net.active_branches:
                bv = cat.branch_vars(br)
                lhs = x[bv.alpha_km] ** 2 + x[bv.beta_km] ** 2
                rhs = x[bv.V2k] * x[bv.V2m] / (br.tau**2 * br.z2)
                assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)
                lhs_m = x[bv.alpha_mk] ** 2 + x[bv.beta_mk] ** 2
                assert lhs_m == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_physics_bounds_hold_for_random_profiles(cases, rng):
    phys = {"V2", "e", "f", "prod", "P", "Q", "alpha", "beta", "absdiff"}
    for net in cases.values():
        mi = lm.build_base_model(net)
        cat = mi.catalog
        idx = np.array([g in phys for g in cat.group])
        lb, ub = mi.lb[idx], mi.ub[idx]
        for _ in range(5):
            x = lm.embed_feasible_point(net, random_profile(net, rng), cat).values[idx]
            assert np.all(x >= lb - 1e-12) and np.all(x <= ub + 1e-12)


@pytest.mark.parametrize("name", ["case9", "case30", "case57", "case118"])
def test_reference_solution_objective(name, cases):
    net = cases[name]
    mi = lm.build_base_model(net)
    V = reference_voltages(name)
    r = V[net.reference_bus]
    V = {k: v * abs(r) / r for k, v in V.items()}
    x = lm.embed_feasible_point(net, V, mi.catalog).values
    assert lm.max_violation(mi.constraints, x, lm.PHYSICS_TAGS) <= 1e-9
    # the stored profile is rounded at the reference solver's tolerance
    assert lm.max_violation(mi.constraints, x, {"balance_p", "balance_q"}) <= 1e-6
    assert mi.objective_value(x) == pytest.approx(reference_objective(name), rel=1e-6)


def test_objective_equals_cost_at_embedded_point(rng):
    net = two_bus_network()
    pt = lm.embed_feasible_point(net, {1: 1.05 + 0j, 2: 0.97 - 0.05j})
    mi = lm.build_base_model(net)
    gen = net.generators[0]
    assert mi.objective_value(pt.values) == pytest.approx(gen.cost(pt["pg_1"]), abs=1e-9)


def test_cost_tangent_examples():
    gen = Generator(1, -2, 2, 0, 0, CostCurve(1.0, 0.0, 0.0))
    at0 = lm.cost_epigraph_tangent(gen, 0.0, 0, 1)
    assert at0.coeffs == {1: 1.0} and at0.sense == ">=" and at0.rhs == 0.0
    at1 = lm.cost_epigraph_tangent(gen, 1.0, 0, 1)
    assert at1.coeffs == {1: 1.0, 0: -2.0} and at1.rhs == -1.0
    assert at1.violation([1.0, 1.0]) <= 0.0
    lin = Generator(1, 0, 2, 0, 0, CostCurve(0.0, 3.0, 4.0))
    for p_hat in (0.0, 1.7):
        row = lm.cost_epigraph_tangent(lin, p_hat, 0, 1)
        assert row.coeffs == {1: 1.0, 0: -3.0} and row.rhs == 4.0


def test_tangent_underestimates(rng):
    gen = Generator(1, -2, 2, 0, 0, CostCurve(2.5, -1.0, 0.3))
    for _ in range(100):
        p_hat, p = rng.uniform(-2, 2, 2)
        row = lm.cost_epigraph_tangent(gen, p_hat, 0, 1)
        assert row.violation([p, gen.cost(p)]) <= 1e-12


def test_lp_export_names(tmp_path):
    mi = lm.build_base_model(two_bus_network())
    lp = mi.to_lpmodel()
    text = write_lp(lp, tmp_path / "m.lp")
    again = read_lp(text)
    assert again.names == mi.catalog.names
    assert again.num_rows == lp.num_rows


def test_linear_constraint_validation():
    with pytest.raises(ValueError):
        lm.LinearConstraint({0: float("nan")}, "<=", 0.0)
    with pytest.raises(ValueError):
        lm.LinearConstraint({0: 1.0}, "<", 0.0)
    c = lm.LinearConstraint({0: 1.0}, "=", 2.0)
    assert c.violation([3.0]) == 1.0 and c.violation([1.0]) == 1.0


def test_sector_box():
    (elo, ehi), (flo, fhi) = lm.sector_box(0.9, 1.1, 0.0, 0.0)
    assert (elo, ehi, flo, fhi) == pytest.approx((0.9, 1.1, 0.0, 0.0))
    (elo, ehi), (flo, fhi) = lm.sector_box(0.9, 1.1, -math.pi, math.pi)
    assert (elo, ehi, flo, fhi) == pytest.approx((-1.1, 1.1, -1.1, 1.1))
    (elo, ehi), (flo, fhi) = lm.sector_box(1.0, 1.0, 0.1, 0.5)
    assert elo == pytest.approx(math.cos(0.5)) and fhi == pytest.approx(math.sin(0.5))
