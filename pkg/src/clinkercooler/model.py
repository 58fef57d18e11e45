"""Finite-volume assembly of the grate-cooler DAE.

The cooler is cut into ``n_segments`` axial segments and ``n_layers``
horizontal layers. Layer 0 (bottom) is the clinker bed: it carries the solids
on the grate and receives the fan air through its bottom face. Upper layers
hold gas only. The top layer vents each segment to the external pressure
assigned to it (kiln, tertiary-air duct or ambient).

Every cell has the differential state ``[C_s (9), C_a (7), U_s, U_a]`` and
the algebraic state ``[T_s, T_a, P]``. Concentrations are moles per cell
volume and energies are per cell volume. Flat vectors are cell-major. All
residual functions accept leading batch axes.

Residual ``g`` per cell:

* ``g1 = (U_s - H_s(T_s, C_s)) / s_s`` in bed cells and ``(T_s - T_a)/1000``
  in gas-only cells, where ``T_s`` has no physical meaning;
* ``g2 = (U_a - H_a(T_a, C_a) + P V_a) / s_a``;
* ``g3 = V_a + V_s - 1``.

``s_s`` and ``s_a`` are the heat capacities of the phase times 1000 K (plus
1 J/m3) so that ``g1, g2`` read as temperature errors in kK.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import thermo
from .kinetics import KineticsTable
from .scenario import Scenario
from .thermo import GASES, SOLIDS, R, molar_enthalpy
from .transport import CellGeometry, clinker_surface, darcy_velocity, harmonic_mean, \
    interphase_heat

NS = len(SOLIDS)
NG = len(GASES)
NXC = NS + NG + 2
NYC = 3
IS = slice(0, NS)
IA = slice(NS, NS + NG)
IUS = NS + NG
IUA = NS + NG + 1

T_CAP = 1000.0


class AssemblyError(ArithmeticError):
    pass


class InitializationError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass
class FluxField:
    """Boundary flows of one state, all in mol/s or W (positive into the cooler)."""

    clinker_in: np.ndarray        # (NS,)
    clinker_in_H: float
    solid_out: np.ndarray         # (NS,) leaving through the east face
    solid_out_H: float
    fan_in: np.ndarray            # (n_segments, NG)
    fan_in_H: np.ndarray          # (n_segments,)
    vent_out: np.ndarray          # (n_segments, NG) leaving through the top faces
    vent_out_H: np.ndarray        # (n_segments,)
    vent_velocity: np.ndarray     # (n_segments,) m/s, positive outwards

    def net_solid(self):
        return self.clinker_in - self.solid_out

    def net_gas(self):
        return self.fan_in.sum(axis=0) - self.vent_out.sum(axis=0)

    def net_enthalpy(self):
        return (self.clinker_in_H - self.solid_out_H + self.fan_in_H.sum()
                - self.vent_out_H.sum())


def mass_to_mole(composition, molar_mass_of):
    """Mass fractions to mole fractions (dict in, dict out)."""
    moles = {s: w / molar_mass_of(s) for s, w in composition}
    total = sum(moles.values())
    return {s: n / total for s, n in moles.items()}


# Velocity (m/s) over which the donor cell switches. Faces flowing faster than a
# few times this are plain first-order upwind; the blend keeps the flux smooth
# for Newton when a face is nearly stagnant.
UPWIND_BLEND = 2e-2

# Reynolds number below which the sqrt(Re) in the Nusselt correlation is rounded off.
RE_SMOOTHING = 1.0


def upwind_weight(v, v0=UPWIND_BLEND):
    """Weight of the left/lower cell in the donor value; 1 for v >> v0, 0 for v << -v0."""
    return 0.5 * (1.0 + np.tanh(np.asarray(v) / v0))


class CoolerModel:
    """DAE problem for one scenario: exposes ``f``, ``g`` and solver hooks."""

    batched = True

    def __init__(self, scenario: Scenario):
        sc = scenario
        self.scenario = sc
        self.table = (thermo.load_species_table(sc.species_overrides()) if sc.species
                      else thermo.DEFAULT_TABLE)
        self.solid = self.table.solid
        self.gas = self.table.gas
        self.kinetics = KineticsTable(table=self.table).with_overrides(
            sc.kinetics_overrides())
        g = sc.geometry
        self.eta = g.porosity
        self.n_seg = g.n_segments
        self.n_layers = g.n_layers
        self.ncell = self.n_seg * self.n_layers
        self.nx = self.ncell * NXC
        self.ny = self.ncell * NYC
        self.dz = g.dz
        self.width = g.width
        self.dp = g.particle_diameter
        self.layer_dy = np.array(g.layer_heights)
        layer = np.repeat(np.arange(self.n_layers), self.n_seg)
        seg = np.tile(np.arange(self.n_seg), self.n_layers)
        self.layer, self.seg = layer, seg
        self.dy = self.layer_dy[layer]
        self.V = self.width * self.dy * self.dz
        self.solid_cell = layer == 0
        self.geoms = [CellGeometry(self.dz, dy, self.width, g.particle_diameter,
                                   g.shape_factor) for dy in self.layer_dy]
        self.sv = self.solid.specific_volume
        self.cp1000_s = thermo.cp_species(T_CAP, self.solid)
        self.cp1000_a = thermo.cp_species(T_CAP, self.gas)
        cal = sc.calibration
        self.friction_scale = cal.friction_scale
        self.smoothing = cal.darcy_smoothing_Pa_m
        self.eps_s = cal.solid_emissivity
        self.path_length = g.height / 2.0 if cal.path_length_m is None else cal.path_length_m
        self.wsgg = (thermo.WSGGCoefficients.from_dict(cal.wsgg) if cal.wsgg
                     else thermo.DEFAULT_WSGG)
        self.pr_solid = cal.prandtl_heat_capacity == "solid"
        self.i_h2o = self.gas.index("H2O")
        self.i_co2 = self.gas.index("CO2")
        self._build_faces()
        self._build_boundaries()

    # geometry ----------------------------------------------------------------

    def cell(self, layer: int, segment: int) -> int:
        return layer * self.n_seg + segment

    def _build_faces(self):
        fa, fb, dist, area, vert = [], [], [], [], []
        nv = self.n_seg
        for j in range(self.n_layers - 1):
            for k in range(nv):
                fa.append(self.cell(j, k))
                fb.append(self.cell(j + 1, k))
                dist.append(0.5 * (self.layer_dy[j] + self.layer_dy[j + 1]))
                area.append(self.width * self.dz)
                vert.append(True)
        for j in range(self.n_layers):
            for k in range(nv - 1):
                fa.append(self.cell(j, k))
                fb.append(self.cell(j, k + 1))
                dist.append(self.dz)
                area.append(self.width * self.layer_dy[j])
                vert.append(False)
        self.fa = np.array(fa, dtype=int)
        self.fb = np.array(fb, dtype=int)
        self.fdist = np.array(dist)
        self.farea = np.array(area)
        self.fvert = np.array(vert, dtype=bool)
        nf = len(fa)
        D = np.zeros((self.ncell, nf))
        D[self.fa, np.arange(nf)] -= self.farea / self.V[self.fa]
        D[self.fb, np.arange(nf)] += self.farea / self.V[self.fb]
        self.Dg = D
        # solid faces: grate transport along the bed layer
        sa = np.array([self.cell(0, k) for k in range(nv - 1)], dtype=int)
        self.sa, self.sb = sa, sa + 1
        self.sarea = self.width * self.layer_dy[0]
        Ds = np.zeros((self.ncell, len(sa)))
        Ds[self.sa, np.arange(len(sa))] -= self.sarea / self.V[self.sa]
        Ds[self.sb, np.arange(len(sa))] += self.sarea / self.V[self.sb]
        self.Ds = Ds
        self.top = np.array([self.cell(self.n_layers - 1, k) for k in range(nv)], dtype=int)
        self.bottom = np.array([self.cell(0, k) for k in range(nv)], dtype=int)
        self.top_dist = 0.5 * self.layer_dy[-1]
        self.top_area = self.width * self.dz
        # face index above each cell (interior vertical face or top boundary)
        above = np.full(self.ncell, -1, dtype=int)
        for i in np.nonzero(self.fvert)[0]:
            above[self.fa[i]] = i
        n_vert = int(self.fvert.sum())
        above[self.top] = n_vert + np.arange(nv)
        self.above = above
        self.n_vert = n_vert

    def _build_boundaries(self):
        sc = self.scenario
        gas, solid = self.gas, self.solid
        nv = self.n_seg
        for i, name in enumerate(sc.pressures.segment_map):
            if name not in dict(sc.pressures.external_Pa):
                raise ConfigurationError(f"segment {i + 1}: unknown pressure id {name!r}")
        self.P_ext = np.array([sc.pressures.pressure(n) for n in sc.pressures.segment_map])
        self.grate = np.asarray(sc.grate_speed_m_s, dtype=float)
        # fan air
        fan = sc.fans
        if fan.basis == "mass":
            x = mass_to_mole(fan.composition, lambda s: gas.molar_mass[gas.index(s)])
        else:
            x = dict(fan.composition)
        self.x_air = gas.vector(x)
        M_air = float(self.x_air @ gas.molar_mass)
        self.fan_molar = (np.asarray(fan.mass_flow_kg_s)[:, None] / M_air) * self.x_air
        self.fan_H = thermo.enthalpy(fan.temperature_K, 0.0, self.fan_molar, gas)
        # backflow through the vents carries fan-type air at the backflow temperature
        Tb = sc.pressures.backflow_temperature_K
        self.C_back = self.x_air[None, :] * (self.P_ext / (R * Tb))[:, None]
        self.h_back = molar_enthalpy(Tb, gas)
        # clinker inflow
        cl = sc.clinker
        mdot = cl.rate_t_per_h * 1000.0 / 3600.0
        comp = dict(cl.composition)
        if cl.basis == "mass":
            self.clinker_molar = solid.vector(
                {s: mdot * wf / solid.molar_mass[solid.index(s)] for s, wf in comp.items()})
        else:
            xs = solid.vector(comp)
            self.clinker_molar = xs * mdot / float(xs @ solid.molar_mass)
        self.clinker_H = float(thermo.enthalpy(cl.temperature_K, 0.0, self.clinker_molar,
                                               solid))
        self.clinker_T = cl.temperature_K

    # layout --------------------------------------------------------------------

    def unpack(self, x, y):
        X = np.asarray(x).reshape(np.shape(x)[:-1] + (self.ncell, NXC))
        Y = np.asarray(y).reshape(np.shape(y)[:-1] + (self.ncell, NYC))
        return (X[..., IS], X[..., IA], X[..., IUS], X[..., IUA],
                Y[..., 0], Y[..., 1], Y[..., 2])

    def pack(self, C_s, C_a, U_s, U_a, T_s, T_a, P):
        X = np.concatenate([C_s, C_a, U_s[..., None], U_a[..., None]], axis=-1)
        Y = np.stack([T_s, T_a, P], axis=-1)
        lead = X.shape[:-2]
        return X.reshape(lead + (self.nx,)), Y.reshape(lead + (self.ny,))

    # closures ------------------------------------------------------------------

    def _state(self, x, y):
        C_s, C_a, U_s, U_a, T_s, T_a, P = self.unpack(x, y)
        Csp = np.maximum(C_s, 0.0)
        Cap = np.maximum(C_a, 0.0)
        n_a = Cap.sum(-1)
        n_safe = np.where(n_a > 0, n_a, 1.0)
        Va = n_a * R * T_a / P
        Va_safe = np.maximum(Va, 1e-9)
        Vs = (Csp @ self.sv) / (1.0 - self.eta)
        return dict(C_s=C_s, C_a=C_a, U_s=U_s, U_a=U_a, T_s=T_s, T_a=T_a, P=P,
                    Csp=Csp, Cap=Cap, n_a=n_a, x_a=Cap / n_safe[..., None],
                    Va=Va, Va_safe=Va_safe, Vs=Vs)

    def _fluxes(self, x, y):
        st = self._state(x, y)
        Csp, Cap, T_s, T_a, P = st["Csp"], st["Cap"], st["T_s"], st["T_a"], st["P"]
        gas = self.gas
        mu, k_a = thermo.mixture_transport(st["x_a"], T_a, gas)
        rho = (Cap @ gas.molar_mass) / st["Va_safe"]
        # hydraulic diameters per cell
        A_c = clinker_surface(st["Vs"] * self.V, self.dp)
        V_gas = st["Va_safe"] * self.V
        A_yz = self.dz * self.dy
        D_y = 4.0 * V_gas / (2 * A_yz + 2 * self.width * self.dy + A_c)
        D_z = 4.0 * V_gas / (2 * A_yz + 2 * self.width * self.dz + A_c)
        h_a = molar_enthalpy(T_a, gas)
        h_s = molar_enthalpy(T_s, self.solid)

        # interior gas faces
        fa, fb = self.fa, self.fb
        dP = P[..., fb] - P[..., fa]
        Dfa = np.where(self.fvert, D_y[..., fa], D_z[..., fa])
        Dfb = np.where(self.fvert, D_y[..., fb], D_z[..., fb])
        # one channel per face: the narrower cell dominates the hydraulic diameter
        v = darcy_velocity(dP, self.fdist, harmonic_mean(Dfa, Dfb),
                           0.5 * (mu[..., fa] + mu[..., fb]),
                           0.5 * (rho[..., fa] + rho[..., fb]),
                           self.friction_scale, self.smoothing)
        th = upwind_weight(v)[..., None]
        N_g = v[..., None] * (th * Cap[..., fa, :] + (1 - th) * Cap[..., fb, :])
        H_g = np.sum(v[..., None] * (th * Cap[..., fa, :] * h_a[..., fa, :]
                                     + (1 - th) * Cap[..., fb, :] * h_a[..., fb, :]), axis=-1)
        Q_g = -harmonic_mean(k_a[..., fa], k_a[..., fb]) * (T_a[..., fb] - T_a[..., fa]) \
            / self.fdist

        # vents
        top = self.top
        v_top = darcy_velocity(self.P_ext - P[..., top], self.top_dist, D_y[..., top],
                               mu[..., top], rho[..., top], self.friction_scale,
                               self.smoothing)
        th = upwind_weight(v_top)[..., None]
        N_top = v_top[..., None] * (th * Cap[..., top, :] + (1 - th) * self.C_back)
        H_top = np.sum(v_top[..., None] * (th * Cap[..., top, :] * h_a[..., top, :]
                                           + (1 - th) * self.C_back * self.h_back), axis=-1)

        # solids on the grate
        sa, sb = self.sa, self.sb
        vg = self.grate[self.seg[sa]]
        N_s = vg[:, None] * Csp[..., sa, :]
        H_s = np.sum(N_s * h_s[..., sa, :], axis=-1)
        k_s = thermo.solid_conductivity(Csp, self.eta, k_a, self.table)
        Q_s = -harmonic_mean(k_s[..., sa], k_s[..., sb]) * (T_s[..., sb] - T_s[..., sa]) \
            / self.dz
        last = self.cell(0, self.n_seg - 1)
        N_out = self.grate[-1] * Csp[..., last, :] * self.sarea
        H_out = np.sum(N_out * h_s[..., last, :], axis=-1)

        # reactions and interphase exchange (bed cells only)
        mask = self.solid_cell
        r = self.kinetics.rates(T_s, Csp) * mask[:, None]
        R_s, R_a = self.kinetics.production(r)
        # released CO2 enters the gas at the solid temperature
        J = r[..., 0] * molar_enthalpy(T_s, gas)[..., self.i_co2]
        if self.pr_solid:
            cp_mass = (np.sum(Csp * thermo.cp_species(T_s, self.solid), -1)
                       / np.maximum(Csp @ self.solid.molar_mass, 1e-300))
        else:
            cp_mass = (np.sum(Cap * thermo.cp_species(T_a, gas), -1)
                       / np.maximum(Cap @ gas.molar_mass, 1e-300))
        v_all = np.concatenate([v[..., :self.n_vert], v_top], axis=-1)
        v_y = v_all[..., self.above]
        eps_a = thermo.gas_emissivity(st["x_a"][..., self.i_h2o], st["x_a"][..., self.i_co2],
                                      T_a, P, self.path_length, self.wsgg)
        geom = self.geoms[0]
        Va_hat = np.minimum(st["Va"], 1.0)
        Q_cv, Q_rad = interphase_heat(geom, Va_hat, T_s, T_a, k_s, cp_mass, mu, k_a, rho,
                                      v_y, eps_a, self.eps_s, RE_SMOOTHING)
        Q_cv = Q_cv * mask
        Q_rad = Q_rad * mask
        return dict(st=st, N_g=N_g, H_g=H_g, Q_g=Q_g, v=v, v_top=v_top, N_top=N_top,
                    H_top=H_top, N_s=N_s, H_s=H_s, Q_s=Q_s, N_out=N_out, H_out=H_out,
                    R_s=R_s, R_a=R_a, r=r, J=J, Q_cv=Q_cv, Q_rad=Q_rad, mu=mu, k_a=k_a,
                    k_s=k_s, rho=rho, D_y=D_y, D_z=D_z, eps_a=eps_a, v_y=v_y)

    # residuals -----------------------------------------------------------------

    def f(self, x, y):
        F = self._fluxes(x, y)
        V = self.V
        dCs = np.matmul(self.Ds, F["N_s"]) + F["R_s"]
        dCa = np.matmul(self.Dg, F["N_g"]) + F["R_a"]
        dUs = (F["H_s"] + F["Q_s"]) @ self.Ds.T - F["Q_rad"] - F["Q_cv"] - F["J"]
        dUa = (F["H_g"] + F["Q_g"]) @ self.Dg.T + F["Q_rad"] + F["Q_cv"] + F["J"]
        c0 = self.cell(0, 0)
        last = self.cell(0, self.n_seg - 1)
        dCs[..., c0, :] += self.clinker_molar / V[c0]
        dUs[..., c0] += self.clinker_H / V[c0]
        dCs[..., last, :] -= F["N_out"] / V[last]
        dUs[..., last] -= F["H_out"] / V[last]
        bot, top = self.bottom, self.top
        dCa[..., bot, :] += self.fan_molar / V[bot][:, None]
        dUa[..., bot] += self.fan_H / V[bot]
        dCa[..., top, :] -= F["N_top"] * (self.top_area / V[top])[:, None]
        dUa[..., top] -= F["H_top"] * self.top_area / V[top]
        X = np.concatenate([dCs, dCa, dUs[..., None], dUa[..., None]], axis=-1)
        return X.reshape(X.shape[:-2] + (self.nx,))

    def g(self, x, y, scaled=True):
        C_s, C_a, U_s, U_a, T_s, T_a, P = self.unpack(x, y)
        H_s = np.sum(C_s * molar_enthalpy(T_s, self.solid), -1)
        H_a = np.sum(C_a * molar_enthalpy(T_a, self.gas), -1)
        n_a = C_a.sum(-1)
        Va = n_a * R * T_a / P
        Vs = (C_s @ self.sv) / (1.0 - self.eta)
        g1 = U_s - H_s
        g2 = U_a - (H_a - P * Va)
        if scaled:
            g1 = np.where(self.solid_cell, g1 / self._cap_s(C_s), (T_s - T_a) / T_CAP)
            g2 = g2 / self._cap_a(C_a)
        else:
            g1 = np.where(self.solid_cell, g1, T_s - T_a)
        G = np.stack([g1, g2, Va + Vs - 1.0], axis=-1)
        return G.reshape(G.shape[:-2] + (self.ny,))

    def _cap_s(self, C_s):
        return np.abs(C_s) @ self.cp1000_s * T_CAP + 1.0

    def _cap_a(self, C_a):
        return np.abs(C_a) @ self.cp1000_a * T_CAP + 1.0

    # solver hooks --------------------------------------------------------------

    def x_scale(self, x):
        X = np.asarray(x).reshape(self.ncell, NXC)
        s = np.empty_like(X)
        s[:, IS] = np.maximum(np.abs(X[:, IS]).sum(-1), 1.0)[:, None]
        s[:, IA] = np.maximum(np.abs(X[:, IA]).sum(-1), 1.0)[:, None]
        s[:, IUS] = self._cap_s(X[:, IS])
        s[:, IUA] = self._cap_a(X[:, IA])
        return s.ravel()

    @property
    def w_scale(self):
        xs = np.ones((self.ncell, NXC))
        xs[:, IUS:] = 1e3
        ys = np.empty((self.ncell, NYC))
        ys[:, :2] = 1e3
        ys[:, 2] = 1e5
        return np.concatenate([xs.ravel(), ys.ravel()])

    def cell_adjacency(self):
        A = np.eye(self.ncell, dtype=bool)
        A[self.fa, self.fb] = A[self.fb, self.fa] = True
        return A

    def sparsity(self):
        A = self.cell_adjacency()
        idx = [np.concatenate([c * NXC + np.arange(NXC), self.nx + c * NYC + np.arange(NYC)])
               for c in range(self.ncell)]
        n = self.nx + self.ny
        S = np.zeros((n, n), dtype=bool)
        for a in range(self.ncell):
            for b in np.nonzero(A[a])[0]:
                S[np.ix_(idx[a], idx[b])] = True
        return S

    def clip(self, x):
        X = x.reshape(self.ncell, NXC).copy()
        C = X[:, :NS + NG]
        neg = np.minimum(C, 0.0)
        if not np.any(neg):
            return x, 0.0
        M = np.concatenate([self.solid.molar_mass, self.gas.molar_mass])
        amount = float(-np.sum(neg * M * self.V[:, None]))
        X[:, :NS + NG] = np.maximum(C, 0.0)
        return X.ravel(), amount

    def max_step_fraction(self, x, y, dx, dy):
        Y = y.reshape(self.ncell, NYC)
        dY = dy.reshape(self.ncell, NYC)
        alpha = 1.0
        dT = np.abs(dY[:, :2])
        big = np.max(dT)
        if big > 300.0:
            alpha = 300.0 / big
        T_new = Y[:, :2] + alpha * dY[:, :2]
        low = T_new < 150.0
        if np.any(low):
            alpha = min(alpha, float(np.min(0.5 * (Y[:, :2][low] - 150.0)
                                            / -dY[:, :2][low])))
        dP = dY[:, 2]
        shrink = dP < 0
        if np.any(shrink):
            alpha = min(alpha, float(np.min(0.5 * Y[shrink, 2] / -dP[shrink])))
        return max(alpha, 1e-3)

    # public operations ---------------------------------------------------------

    def assemble_f(self, x, y):
        out = self.f(np.asarray(x, float), np.asarray(y, float))
        self._check_finite(out, "f", NXC)
        return out

    def assemble_g(self, x, y, scaled=True):
        out = self.g(np.asarray(x, float), np.asarray(y, float), scaled=scaled)
        self._check_finite(out, "g", NYC)
        return out

    def _check_finite(self, arr, name, per_cell):
        bad = np.nonzero(~np.isfinite(arr.reshape(-1)))[0]
        if bad.size:
            i = int(bad[0]) % (self.ncell * per_cell)
            c, e = divmod(i, per_cell)
            raise AssemblyError(f"non-finite {name} residual in cell {c} "
                                f"(layer {self.layer[c]}, segment {self.seg[c]}), "
                                f"equation {e}")

    def boundary_fluxes(self, x, y) -> FluxField:
        F = self._fluxes(np.asarray(x, float), np.asarray(y, float))
        st = F["st"]
        last = self.cell(0, self.n_seg - 1)
        return FluxField(
            clinker_in=self.clinker_molar.copy(),
            clinker_in_H=self.clinker_H,
            solid_out=F["N_out"],
            solid_out_H=float(F["H_out"]),
            fan_in=self.fan_molar.copy(),
            fan_in_H=self.fan_H.copy(),
            vent_out=F["N_top"] * self.top_area,
            vent_out_H=F["H_top"] * self.top_area,
            vent_velocity=F["v_top"],
        )

    def diagnostics(self, x, y) -> dict:
        """Per-cell closure values (velocities, exchange terms, properties)."""
        F = self._fluxes(np.asarray(x, float), np.asarray(y, float))
        keep = ("v", "v_top", "Q_cv", "Q_rad", "J", "r", "mu", "k_a", "k_s", "rho",
                "D_y", "D_z", "eps_a", "v_y")
        out = {k: F[k] for k in keep}
        out["V_a"] = F["st"]["Va"]
        out["V_s"] = F["st"]["Vs"]
        return out

    # initial conditions --------------------------------------------------------

    def solve_algebraic(self, x, y_guess=None):
        """Solve g = 0 for (T_s, T_a, P) at fixed differential state."""
        C_s, C_a, U_s, U_a, *_ = self.unpack(np.asarray(x, float), np.zeros(self.ny))
        Tg = np.full(self.ncell, 1000.0) if y_guess is None else \
            np.asarray(y_guess).reshape(self.ncell, NYC)
        n_a = C_a.sum(-1)
        if np.any(n_a <= 0):
            c = int(np.nonzero(n_a <= 0)[0][0])
            raise InitializationError(f"cell {c} holds no gas: volume closure is infeasible")
        Vs = (C_s @ self.sv) / (1.0 - self.eta)
        if np.any(Vs >= 1.0):
            raise InitializationError("solids overfill a cell: volume closure is infeasible")
        T_a = thermo.temperature_from_energy(
            U_a, 1e5, C_a, self.gas,
            T_guess=Tg if y_guess is None else Tg[:, 1])
        T_s = T_a.copy()
        has = self.solid_cell & (C_s.sum(-1) > 0)
        if np.any(has):
            T_s[has] = thermo.temperature_from_energy(
                U_s[has], 1e5, C_s[has], self.solid,
                T_guess=1000.0 if y_guess is None else Tg[has, 0])
        P = n_a * R * T_a / (1.0 - Vs)
        return np.stack([T_s, T_a, P], axis=-1).ravel()

    def consistent_initialize(self, C_s, C_a, T_s0, T_a0):
        """Index-1 consistent (x, y) from concentrations and temperatures."""
        C_s = np.asarray(C_s, float).reshape(self.ncell, NS)
        C_a = np.asarray(C_a, float).reshape(self.ncell, NG)
        if np.any(C_s < 0) or np.any(C_a < 0):
            raise InitializationError("concentrations must be non-negative")
        if np.any(C_s[~self.solid_cell] != 0):
            raise InitializationError("solids are only allowed in the bed layer")
        T_a = np.broadcast_to(np.asarray(T_a0, float), (self.ncell,)).copy()
        T_s = np.where(self.solid_cell, np.broadcast_to(np.asarray(T_s0, float),
                                                        (self.ncell,)), T_a)
        n_a = C_a.sum(-1)
        if np.any(n_a <= 0):
            c = int(np.nonzero(n_a <= 0)[0][0])
            raise InitializationError(f"cell {c} holds no gas: volume closure is infeasible")
        Vs = (C_s @ self.sv) / (1.0 - self.eta)
        if np.any(Vs >= 1.0):
            raise InitializationError("solids overfill a cell: volume closure is infeasible")
        P = n_a * R * T_a / (1.0 - Vs)
        U_s = thermo.enthalpy(T_s, P, C_s, self.solid)
        U_a = thermo.internal_energy_density(T_a, P, C_a, self.gas)
        x, y = self.pack(C_s, C_a, U_s, U_a, T_s, T_a, P)
        try:
            y_chk = self.solve_algebraic(x, y)
        except thermo.InversionError as exc:
            raise InitializationError(f"temperature inversion failed: {exc}") from exc
        Y, Yc = y.reshape(-1, NYC), y_chk.reshape(-1, NYC)
        if np.max(np.abs(Y[:, :2] - Yc[:, :2])) > 1e-6 or \
                np.max(np.abs(Y[:, 2] - Yc[:, 2]) / Y[:, 2]) > 1e-12:
            raise InitializationError("algebraic round trip failed")
        return x, y

    def initial_concentrations(self):
        """Cell concentrations described by the scenario's initial section."""
        ini = self.scenario.initial
        solid, gas = self.solid, self.gas
        if ini.solid_composition is not None:
            xs = solid.vector(dict(ini.solid_composition))
        else:
            xs = self.clinker_molar / self.clinker_molar.sum()
        C_s = np.zeros((self.ncell, NS))
        C_s[self.solid_cell] = ini.solid_concentration * xs
        xa = gas.vector(dict(ini.gas_composition)) if ini.gas_composition else self.x_air
        Vs = (C_s @ self.sv) / (1.0 - self.eta)
        n_a = ini.pressure_Pa * (1.0 - Vs) / (R * ini.T_gas_K)
        C_a = n_a[:, None] * xa
        return C_s, C_a

    def initial_state(self):
        ini = self.scenario.initial
        C_s, C_a = self.initial_concentrations()
        return self.consistent_initialize(C_s, C_a, ini.T_solid_K, ini.T_gas_K)

    def check_property_ranges(self, x, y):
        """Emit cp-extrapolation warnings for species present in the state."""
        C_s, C_a, _, _, T_s, T_a, _ = self.unpack(np.asarray(x, float), np.asarray(y, float))
        bed = self.solid_cell & (C_s.sum(-1) > 0)
        if np.any(bed):
            tot = C_s[bed].sum(-1, keepdims=True)
            thermo.warn_cp_range(self.solid, T_s[bed], np.any(C_s[bed] > 1e-9 * tot, axis=0))
        tot = C_a.sum(-1, keepdims=True)
        thermo.warn_cp_range(self.gas, T_a, np.any(C_a > 1e-9 * tot, axis=0))

    # reporting -----------------------------------------------------------------

    def segment_profiles(self, x, y) -> dict:
        """Per-segment quantities: bed solids, top-layer gas and pressure."""
        C_s, C_a, U_s, U_a, T_s, T_a, P = self.unpack(np.asarray(x, float),
                                                     np.asarray(y, float))
        bed, top = self.bottom, self.top
        mass_flow = (self.grate[:, None] * np.maximum(C_s[bed], 0) * self.sarea
                     * self.solid.molar_mass)
        T_bed = T_s[bed]
        if self.n_seg >= 2:
            slope = (T_bed[-1] - T_bed[-2]) / self.dz
            T_out = T_bed[-1] + slope * 0.5 * self.dz
        else:
            T_out = T_bed[-1]
        return {
            "z": (np.arange(self.n_seg) + 0.5) * self.dz,
            "T_s": T_bed,
            "T_a": T_a[top],
            "T_a_bed": T_a[bed],
            "P": P[top],
            "P_bed": P[bed],
            "C_s": C_s[bed],
            "mass_flow": mass_flow,
            "T_out_last": float(T_bed[-1]),
            "T_out_extrapolated": float(T_out),
        }
