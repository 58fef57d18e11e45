"""Flux and interphase-exchange closures.

Scalar formulas, all numpy-broadcasting so the model can evaluate every face
or cell in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .thermo import SIGMA, enthalpy

DARCY_COEFF = 0.316
# Pressure gradient (Pa/m) below which the turbulent law is blended into a
# linear one, so the velocity stays differentiable at zero flow.
DARCY_SMOOTHING = 1e-2


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class CellGeometry:
    dz: float
    dy: float
    w: float
    particle_diameter: float = 0.040
    shape_factor: float = 0.25

    def __post_init__(self):
        if min(self.dz, self.dy, self.w, self.particle_diameter) <= 0:
            raise GeometryError("cell lengths must be positive")
        if self.particle_diameter >= self.dy:
            raise GeometryError("particle diameter must be smaller than the layer height")

    @property
    def volume(self) -> float:
        return self.w * self.dy * self.dz


def advective_flux(v, C):
    """N = v C (per species; broadcast ``v`` over the trailing axis yourself)."""
    return np.asarray(v, dtype=float) * np.asarray(C, dtype=float)


def upwind(v, C_left, C_right):
    """Donor-cell face value: left cell for v >= 0, right cell otherwise."""
    v = np.asarray(v, dtype=float)
    return np.where(v[..., None] >= 0, C_left, C_right)


def enthalpy_flux(T, P, N, phase):
    """H(T, P, N): enthalpy carried by a molar flux, W/m2."""
    return enthalpy(T, P, N, phase)


def harmonic_mean(k_left, k_right):
    k_left = np.asarray(k_left, dtype=float)
    k_right = np.asarray(k_right, dtype=float)
    s = k_left + k_right
    return np.where(s > 0, 2.0 * k_left * k_right / np.where(s > 0, s, 1.0), 0.0)


def conduction_flux(k, T_left, T_right, distance):
    """Fourier flux from left to right, -k (T_right - T_left)/distance."""
    return -np.asarray(k) * (np.asarray(T_right) - np.asarray(T_left)) / distance


def air_density(C_a, V_a_hat, molar_mass):
    """Density of the gas inside its own sub-volume, kg/m3."""
    V_a_hat = np.asarray(V_a_hat, dtype=float)
    if np.any(V_a_hat <= 0):
        raise GeometryError("gas volume fraction must be positive")
    return np.sum(np.asarray(C_a) * molar_mass, axis=-1) / V_a_hat


def clinker_surface(V_s, particle_diameter):
    """Total sphere surface of a bulk solid volume, pi D^2 V_s/(pi D^3/6)."""
    d = particle_diameter
    return np.asarray(V_s, dtype=float) / (math.pi / 6.0 * d ** 3) * (math.pi * d ** 2)


def hydraulic_diameters(geom: CellGeometry, V_a, V_s):
    """Hydraulic diameters of the gas channel for vertical and axial flow."""
    A_yz = geom.dz * geom.dy
    A_wy = geom.w * geom.dy
    A_wz = geom.w * geom.dz
    A_c = clinker_surface(V_s, geom.particle_diameter)
    V_a = np.asarray(V_a, dtype=float)
    D_y = 4.0 * V_a / (2.0 * A_yz + 2.0 * A_wy + A_c)
    D_z = 4.0 * V_a / (2.0 * A_yz + 2.0 * A_wz + A_c)
    return D_y, D_z


def darcy_velocity(dP, distance, D_H, mu, rho, friction_scale=100.0,
                   smoothing=DARCY_SMOOTHING):
    """Turbulent Darcy-Weisbach velocity with Blasius friction.

    Solves dP/distance = f_D rho v^2/(2 D_H) with f_D = scale*0.316 Re^-1/4
    for v; flow goes down the pressure gradient. With ``smoothing > 0`` the
    gradient magnitude g enters as g (g^2 + s^2)^(-3/14) instead of
    sgn(g) |g|^(4/7), which only differs for |g| comparable to s.
    """
    g = -np.asarray(dP, dtype=float) / distance
    base = 2.0 / (DARCY_COEFF * friction_scale) * (D_H ** 5 / (mu * rho ** 3)) ** 0.25
    if smoothing > 0:
        shaped = g * (g * g + smoothing * smoothing) ** (-3.0 / 14.0)
    else:
        shaped = np.sign(g) * np.abs(g) ** (4.0 / 7.0)
    return base ** (4.0 / 7.0) * shaped


def specific_surface(V_a_hat, particle_diameter):
    return 6.0 / particle_diameter * (1.0 - np.asarray(V_a_hat, dtype=float))


def nusselt(Pr, Re, re_smoothing=0.0):
    """Nu = 2 + 1.8 Pr^1/3 Re^1/2.

    With ``re_smoothing = Re0 > 0`` the square root is replaced by
    (Re^2 + Re0^2)^(1/4) - Re0^(1/2), which is smooth in Re, still exactly 0 at
    Re = 0, and tends to sqrt(|Re|) - sqrt(Re0) for |Re| >> Re0.
    """
    Re = np.asarray(Re, dtype=float)
    if re_smoothing > 0:
        root = (Re * Re + re_smoothing ** 2) ** 0.25 - math.sqrt(re_smoothing)
    else:
        root = np.sqrt(np.abs(Re))
    return 2.0 + 1.8 * np.cbrt(Pr) * root


def heat_transfer_coefficient(k_s, Nu, particle_diameter, shape_factor):
    d = particle_diameter
    return k_s * Nu / (d + 0.5 * shape_factor * d * Nu)


def interphase_heat(geom: CellGeometry, V_a_hat, T_s, T_a, k_s, cp_s, mu_a, k_a, rho_a,
                    v_y, eps_a, eps_s=0.9, re_smoothing=0.0):
    """Convective and radiative solid-to-gas heat per unit volume, W/m3.

    ``cp_s`` is the specific heat that enters the Prandtl number.
    Returns ``(Q_conv, Q_rad)``; both are positive when the solid heats the gas.
    """
    A = specific_surface(V_a_hat, geom.particle_diameter)
    Pr = cp_s * mu_a / k_a
    Re = rho_a * np.asarray(v_y) * geom.particle_diameter / mu_a
    beta = heat_transfer_coefficient(k_s, nusselt(Pr, Re, re_smoothing),
                                     geom.particle_diameter,
                                     geom.shape_factor)
    T_s = np.asarray(T_s, dtype=float)
    T_a = np.asarray(T_a, dtype=float)
    Q_conv = A * beta * (T_s - T_a)
    Q_rad = A * SIGMA * (eps_s * T_s ** 4 - eps_a * T_a ** 4)
    return Q_conv, Q_rad
