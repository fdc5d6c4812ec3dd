"""Exact AC equations for a single pi-model branch.

The transformer (tap ``tau``, shift ``sigma``) sits at the from ("k") end of
the branch, the series admittance ``y = g + jb`` between the fictitious
point ``k1`` and the to ("m") end, and half of the line charging
``y_sh = g_sh + j b_sh`` at each side of the series element.

Two independent evaluation routes are provided: ``flow_rect`` expands the
branch currents in rectangular voltage coordinates with real arithmetic,
and ``flow_polar`` evaluates the closed-form polar expressions.  Every
relaxation cut in this package is tested against these functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class ZeroImpedanceError(ValueError):
    pass


def series_admittance(r: float, x: float) -> tuple[float, float]:
    """Return ``(g, b)`` with ``g + jb = 1 / (r + jx)``."""
    den = r * r + x * x
    if den <= 0.0:
        raise ZeroImpedanceError(f"zero series impedance (r={r}, x={x})")
    return r / den, -x / den


@dataclass(frozen=True)
class ComplexVoltagePair:
    e_k: float
    f_k: float
    e_m: float
    f_m: float

    @classmethod
    def from_complex(cls, vk: complex, vm: complex) -> "ComplexVoltagePair":
        return cls(vk.real, vk.imag, vm.real, vm.imag)

    @classmethod
    def from_polar(cls, vk_mag, theta_k, vm_mag, theta_m) -> "ComplexVoltagePair":
        return cls(vk_mag * math.cos(theta_k), vk_mag * math.sin(theta_k),
                   vm_mag * math.cos(theta_m), vm_mag * math.sin(theta_m))

    @property
    def vk(self) -> complex:
        return complex(self.e_k, self.f_k)

    @property
    def vm(self) -> complex:
        return complex(self.e_m, self.f_m)

    @property
    def vk_mag(self) -> float:
        return math.hypot(self.e_k, self.f_k)

    @property
    def vm_mag(self) -> float:
        return math.hypot(self.e_m, self.f_m)

    @property
    def theta_k(self) -> float:
        return math.atan2(self.f_k, self.e_k)

    @property
    def theta_m(self) -> float:
        return math.atan2(self.f_m, self.e_m)


class FlowQuad(NamedTuple):
    Pkm: float
    Qkm: float
    Pmk: float
    Qmk: float


def branch_admittance_matrix(br) -> np.ndarray:
    """2x2 complex matrix Y with ``(I_km, I_mk) = Y (V_k, V_m)``."""
    y = complex(br.g, br.b)
    ysh = complex(br.g_sh, br.b_sh)
    tau, sigma = br.tau, br.sigma
    n = tau * complex(math.cos(sigma), math.sin(sigma))
    return np.array([
        [(y + ysh / 2) / tau**2, -y / n.conjugate()],
        [-y / n, y + ysh / 2],
    ])


def k1_voltage(br, vk: complex) -> complex:
    """Voltage at the point between the ideal transformer and the series element."""
    e, f = vk.real, vk.imag
    c, s = math.cos(br.sigma), math.sin(br.sigma)
    return complex((e * c + f * s) / br.tau, (f * c - e * s) / br.tau)


def branch_currents(br, v: ComplexVoltagePair) -> tuple[float, float, float, float]:
    """Real and imaginary parts of ``I_km`` and ``I_mk``, expanded in rectangular form."""
    g, b, gsh, bsh = br.g, br.b, br.g_sh, br.b_sh
    tau = br.tau
    c, s = math.cos(br.sigma), math.sin(br.sigma)
    ek, fk, em, fm = v.e_k, v.f_k, v.e_m, v.f_m

    a = ek / tau - em * c + fm * s
    bb = fk / tau - em * s - fm * c
    re_km = g / tau * a - b / tau * bb + (gsh * ek - bsh * fk) / (2 * tau**2)
    im_km = b / tau * a + g / tau * bb + (bsh * ek + gsh * fk) / (2 * tau**2)

    rk = ek * c + fk * s
    ik = -ek * s + fk * c
    re_mk = -g / tau * rk + b / tau * ik + (g + gsh / 2) * em - (b + bsh / 2) * fm
    im_mk = -g / tau * ik - b / tau * rk + (b + bsh / 2) * em + (g + gsh / 2) * fm
    return re_km, im_km, re_mk, im_mk


def flow_rect(br, v: ComplexVoltagePair) -> FlowQuad:
    re_km, im_km, re_mk, im_mk = branch_currents(br, v)
    # S = V conj(I): P = e Re(I) + f Im(I), Q = f Re(I) - e Im(I)
    return FlowQuad(
        v.e_k * re_km + v.f_k * im_km,
        v.f_k * re_km - v.e_k * im_km,
        v.e_m * re_mk + v.f_m * im_mk,
        v.f_m * re_mk - v.e_m * im_mk,
    )


def flow_polar(br, vk_mag: float, vm_mag: float, theta_km: float) -> FlowQuad:
    g, b, gsh, bsh = br.g, br.b, br.g_sh, br.b_sh
    tau, sigma = br.tau, br.sigma
    vk2, vm2, vkm = vk_mag**2, vm_mag**2, vk_mag * vm_mag
    d_km = theta_km - sigma
    d_mk = -theta_km + sigma
    pkm = vk2 * (g + gsh / 2) / tau**2 - vkm * g / tau * math.cos(d_km) - vkm * b / tau * math.sin(d_km)
    qkm = -vk2 * (b + bsh / 2) / tau**2 + vkm * b / tau * math.cos(d_km) - vkm * g / tau * math.sin(d_km)
    pmk = vm2 * (g + gsh / 2) - vkm * g / tau * math.cos(d_mk) - vkm * b / tau * math.sin(d_mk)
    qmk = -vm2 * (b + bsh / 2) + vkm * b / tau * math.cos(d_mk) - vkm * g / tau * math.sin(d_mk)
    return FlowQuad(pkm, qkm, pmk, qmk)


def transformer_differences(br, v: ComplexVoltagePair) -> tuple[float, float, float, float]:
    """Signed quantities whose absolute values the lifted model tracks.

    Returns ``(a_km, b_km, a_mk, b_mk)``:

    * ``a_km = e_k/tau - e_m cos(sigma) + f_m sin(sigma)``
    * ``b_km = f_k/tau - f_m cos(sigma) - e_m sin(sigma)``
    * ``a_mk = e_m - (e_k cos(sigma) + f_k sin(sigma))/tau``
    * ``b_mk = f_m - (f_k cos(sigma) - e_k sin(sigma))/tau``

    ``(a_mk, b_mk)`` is ``V_m - V_k1`` and ``(a_km, b_km)`` the same vector
    rotated by ``sigma``, so both pairs have the same Euclidean norm.
    """
    tau = br.tau
    c, s = math.cos(br.sigma), math.sin(br.sigma)
    ek, fk, em, fm = v.e_k, v.f_k, v.e_m, v.f_m
    return (
        ek / tau - em * c + fm * s,
        fk / tau - fm * c - em * s,
        em - (ek * c + fk * s) / tau,
        fm - (fk * c - ek * s) / tau,
    )
