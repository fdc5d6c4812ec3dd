import math
import sys

import numpy as np
import pytest

from liftopf.netcase import (BranchParams, Bus, BusKind, CostCurve, Generator, Network,
                             bundled_case, parse_case)

SMALL_CASES = ("case9", "case30", "case57", "case118")

TWO_BUS = """
function mpc = twobus
mpc.version = '2';
mpc.baseMVA = 100;
%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin
mpc.bus = [
  1 3 0  0 0 0 1 1 0 135 1 1.1 0.9;
  2 1 50 10 0 0 1 1 0 135 1 1.1 0.9;
];
%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin
mpc.gen = [
  1 0 0 100 -100 1 100 1 200 0 0 0 0 0 0 0 0 0 0 0 0;
];
mpc.branch = [
  1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360;
];
mpc.gencost = [
  2 0 0 3 0.01 10 5;
];
"""


def two_bus_network(**branch_kw) -> Network:
    kw = dict(r=0.01, x=0.1)
    kw.update(branch_kw)
    buses = (
        Bus(1, BusKind.REF, 0.0, 0.0, 0.0, 0.0, 0.9, 1.1),
        Bus(2, BusKind.PQ, 0.5, 0.1, 0.0, 0.0, 0.9, 1.1),
    )
    gens = (Generator(1, 0.0, 2.0, -1.0, 1.0, CostCurve(100.0, 1000.0, 5.0)),)
    br = (BranchParams.from_impedance(1, 2, **kw),)
    return Network(100.0, buses, gens, br, 1, "twobus")


def random_branch(rng, regime: str = "general", rate: float = 0.0) -> BranchParams:
    """Random in-service branch; ``regime`` in {plain, shunt, general}."""
    r = rng.uniform(0.0, 0.1)
    x = rng.uniform(0.01, 0.5) * rng.choice([1, 1, 1, -1])
    b_sh = g_sh = 0.0
    tau, sigma = 1.0, 0.0
    if regime in ("shunt", "general"):
        b_sh = rng.uniform(-0.2, 0.5)
        g_sh = rng.uniform(-0.05, 0.05)
    if regime == "general":
        tau = rng.uniform(0.85, 1.15)
        sigma = rng.uniform(-0.5, 0.5)
    return BranchParams.from_impedance(1, 2, r, x, b_sh=b_sh, g_sh=g_sh, tau=tau, sigma=sigma,
                                       rate_a=rate)


def random_profile(net: Network, rng, spread: float = math.pi) -> dict[int, complex]:
    """In-box voltages: magnitudes uniform in [Vmin, Vmax], reference angle 0."""
    V = {}
    for bus in net.buses:
        mag = rng.uniform(bus.Vmin, bus.Vmax)
        ang = 0.0 if bus.id == net.reference_bus else rng.uniform(-spread, spread)
        V[bus.id] = mag * complex(math.cos(ang), math.sin(ang))
    return V


@pytest.fixture(scope="session")
def cases():
    return {name: bundled_case(name) for name in SMALL_CASES}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def twobus():
    return parse_case(TWO_BUS, "twobus")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
