import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_branch
from liftopf import branch_physics as bp
from liftopf.netcase import BranchParams


def test_series_admittance_examples():
    assert bp.series_admittance(0, 1) == (0.0, -1.0)
    assert bp.series_admittance(1, 0) == (1.0, 0.0)
    g, b = bp.series_admittance(0.01, 0.1)
    assert g == pytest.approx(0.990099, abs=1e-6) and b == pytest.approx(-9.90099, abs=1e-5)
    with pytest.raises(bp.ZeroImpedanceError):
        bp.series_admittance(0, 0)


def test_admittance_matrix_examples():
    br = BranchParams.from_impedance(1, 2, 0.02, 0.2)
    y = complex(br.g, br.b)
    assert np.allclose(bp.branch_admittance_matrix(br), [[y, -y], [-y, y]])
    br2 = BranchParams.from_impedance(1, 2, 0.02, 0.2, tau=2.0)
    assert np.allclose(bp.branch_admittance_matrix(br2), [[y / 4, -y / 2], [-y / 2, y]])
    br3 = BranchParams.from_impedance(1, 2, 0.02, 0.2, b_sh=0.2)
    assert bp.branch_admittance_matrix(br3)[0, 0] == pytest.approx(y + 0.1j)


def test_admittance_matrix_phase_shift():
    br = BranchParams.from_impedance(1, 2, 0.02, 0.2, tau=1.1, sigma=0.3, b_sh=0.1, g_sh=0.01)
    y, ysh = complex(br.g, br.b), complex(0.01, 0.1)
    Y = bp.branch_admittance_matrix(br)
    assert Y[0, 1] == pytest.approx(-y / (1.1 * cmath.exp(-0.3j)))
    assert Y[1, 0] == pytest.approx(-y / (1.1 * cmath.exp(0.3j)))
    assert Y[0, 0] == pytest.approx((y + ysh / 2) / 1.21)
    assert Y[1, 1] == pytest.approx(y + ysh / 2)


def test_equal_voltages_give_zero_flow():
    br = BranchParams.from_impedance(1, 2, 0.05, 0.3)
    v = bp.ComplexVoltagePair.from_complex(1.02 + 0.1j, 1.02 + 0.1j)
    assert np.allclose(bp.flow_rect(br, v), 0.0, atol=1e-15)


def test_pure_reactance_flow():
    br = BranchParams(1, 2, 0.0, 0.1, 0.0, -10.0, 0.0, 0.0)
    v = bp.ComplexVoltagePair.from_polar(1.0, 0.0, 1.0, -0.1)
    assert bp.flow_rect(br, v).Pkm == pytest.approx(10 * math.sin(0.1), abs=1e-12)
    assert bp.flow_rect(br, v).Pkm == pytest.approx(0.99833, abs=1e-5)


def test_symmetric_no_angle_polar():
    br = BranchParams.from_impedance(1, 2, 0.05, 0.3)
    f = bp.flow_polar(br, 1.05, 1.05, 0.0)
    assert f.Pkm == pytest.approx(0.0, abs=1e-14) and f.Pmk == pytest.approx(0.0, abs=1e-14)


def test_k1_voltage_examples():
    assert bp.k1_voltage(BranchParams.from_impedance(1, 2, 0, 1), 0.7 + 0.2j) == pytest.approx(0.7 + 0.2j)
    assert bp.k1_voltage(BranchParams.from_impedance(1, 2, 0, 1, tau=2.0), 1 + 0j) == pytest.approx(0.5)
    v = bp.k1_voltage(BranchParams.from_impedance(1, 2, 0, 1, sigma=math.pi / 2), 1 + 0j)
    assert v == pytest.approx(-1j, abs=1e-15)


def _v_random(rng):
    return bp.ComplexVoltagePair.from_polar(rng.uniform(0.8, 1.2), rng.uniform(-math.pi, math.pi),
                                            rng.uniform(0.8, 1.2), rng.uniform(-math.pi, math.pi))


@pytest.mark.parametrize("regime", ["plain", "shunt", "general"])
def test_rect_matches_complex_power(regime, rng):
    for _ in range(300):
        br = random_branch(rng, regime)
        v = _v_random(rng)
        Y = bp.branch_admittance_matrix(br)
        I = Y @ np.array([v.vk, v.vm])
        S = np.array([v.vk, v.vm]) * np.conj(I)
        f = bp.flow_rect(br, v)
        assert np.allclose(f, [S[0].real, S[0].imag, S[1].real, S[1].imag], atol=1e-10)


@pytest.mark.parametrize("regime", ["plain", "shunt", "general"])
def test_rect_matches_polar(regime, rng):
    for _ in range(1000):
        br = random_branch(rng, regime)
        v = _v_random(rng)
        a = bp.flow_rect(br, v)
        b = bp.flow_polar(br, v.vk_mag, v.vm_mag, v.theta_k - v.theta_m)
        assert np.allclose(a, b, atol=1e-9, rtol=0)


def test_simple_loss_identity(rng):
    for _ in range(500):
        br = random_branch(rng, "plain")
        v = _v_random(rng)
        f = bp.flow_rect(br, v)
        assert f.Pkm + f.Pmk == pytest.approx(br.g * abs(v.vk - v.vm) ** 2, abs=1e-9)


def test_general_loss_identity(rng):
    for _ in range(500):
        br = random_branch(rng, "general")
        v = _v_random(rng)
        f = bp.flow_rect(br, v)
        t, s = br.tau, br.sigma
        expected = (br.g * (v.vk_mag**2 / t**2 + v.vm_mag**2)
                    - 2 * br.g * v.vk_mag / t * v.vm_mag * math.cos(v.theta_k - v.theta_m - s)
                    + br.g_sh * v.vk_mag**2 / (2 * t**2) + br.g_sh * v.vm_mag**2 / 2)
        assert f.Pkm + f.Pmk == pytest.approx(expected, abs=1e-9)


def test_loss_identity_tau2_sigma01():
    br = BranchParams.from_impedance(1, 2, 0.04, 0.3, tau=2.0, sigma=0.1)
    v = bp.ComplexVoltagePair.from_polar(1.05, 0.2, 0.97, -0.1)
    f = bp.flow_polar(br, 1.05, 0.97, 0.3)
    expected = br.g * (1.05**2 / 4 + 0.97**2) - 2 * br.g * (1.05 / 2) * 0.97 * math.cos(0.3 - 0.1)
    assert f.Pkm + f.Pmk == pytest.approx(expected, abs=1e-12)
    assert np.allclose(bp.flow_rect(br, v), f, atol=1e-12)


def test_transformer_differences_magnitudes(rng):
    for _ in range(200):
        br = random_branch(rng, "general")
        v = _v_random(rng)
        A, B, C, D = bp.transformer_differences(br, v)
        assert math.hypot(A, B) == pytest.approx(math.hypot(C, D), abs=1e-12)
        assert math.hypot(C, D) == pytest.approx(abs(bp.k1_voltage(br, v.vk) - v.vm), abs=1e-12)


def test_transformer_differences_reduce():
    br = BranchParams.from_impedance(1, 2, 0.01, 0.1)
    v = bp.ComplexVoltagePair(1.0, 0.1, 0.95, -0.05)
    A, B, C, D = bp.transformer_differences(br, v)
    assert (A, B) == pytest.approx((0.05, 0.15))
    assert (C, D) == pytest.approx((-0.05, -0.15))


@settings(max_examples=100, deadline=None)
@given(r=st.floats(0.0, 0.2), x=st.floats(0.01, 1.0), bsh=st.floats(-0.5, 0.5),
       ek=st.floats(-1.2, 1.2), fk=st.floats(-1.2, 1.2), em=st.floats(-1.2, 1.2), fm=st.floats(-1.2, 1.2))
def test_unit_tap_reduction(r, x, bsh, ek, fk, em, fm):
    """tau=1, sigma=0 general formulas match the shunt-only construction."""
    v = bp.ComplexVoltagePair(ek, fk, em, fm)
    a = bp.flow_rect(BranchParams.from_impedance(1, 2, r, x, b_sh=bsh, tau=1.0, sigma=0.0), v)
    g, b = bp.series_admittance(r, x)
    y, ysh = complex(g, b), complex(0, bsh)
    Ik = (y + ysh / 2) * v.vk - y * v.vm
    Im = (y + ysh / 2) * v.vm - y * v.vk
    Sk, Sm = v.vk * Ik.conjugate(), v.vm * Im.conjugate()
    assert np.allclose(a, [Sk.real, Sk.imag, Sm.real, Sm.imag], atol=1e-12)
