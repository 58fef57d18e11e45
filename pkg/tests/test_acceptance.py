"""Acceptance suite: the reference cooler run and exact model properties.

Every criterion prints one ``ACCEPTANCE <n> PASS|FAIL`` line and the lines are
repeated in the pytest terminal summary. Criteria 1-8 use the bundled scenario
(10 segments, 2 simulated hours); 9-15 are scenario-independent identities.
"""
import math

import numpy as np
import pytest

from clinkercooler import thermo
from clinkercooler.kinetics import DEFAULT_KINETICS, element_matrix
from clinkercooler.model import CoolerModel
from clinkercooler.scenario import Geometry, Scenario
from clinkercooler.solver import IntegratorConfig, integrate
from clinkercooler.thermo import GASES, P0, SOLIDS

KELVIN = 273.15
KILN_PA = 101150.0
AMBIENT_PA = 101325.0
# pressure level on the fan side of the grate in the reference cooler
FAN_SUPPLY_PA = 106000.0

RESULTS = {}


def report(n, name, ok, detail):
    line = f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def steady(reference_steady):
    m, x, y, _ = reference_steady
    return m.segment_profiles(x, y)


def within(value, target, tol):
    return abs(value - target) <= tol


# reference run ---------------------------------------------------------------------

def test_01_segment1_air_temperature(steady):
    T = steady["T_a"][0] - KELVIN
    report(1, "segment-1 air temperature", within(T, 1088.7, 75.0),
           f"{T:.1f} degC, target 1088.7 +- 75")


def test_02_segment2_air_temperature(steady):
    T = steady["T_a"][1] - KELVIN
    report(2, "segment-2 air temperature", within(T, 899.1, 75.0),
           f"{T:.1f} degC, target 899.1 +- 75")


def test_03_solid_temperatures(steady):
    T1, T2 = steady["T_s"][:2] - KELVIN
    ok = within(T1, 784.8, 75.0) and within(T2, 580.3, 75.0)
    report(3, "segment-1/2 solid temperatures", ok,
           f"{T1:.1f} / {T2:.1f} degC, targets 784.8 / 580.3 +- 75")


def test_04_outlet_clinker_temperature(steady):
    T = steady["T_out_extrapolated"] - KELVIN
    ok = 100.0 <= T <= 150.0 and within(T, 125.3, 30.0)
    report(4, "extrapolated outlet clinker temperature", ok,
           f"{T:.1f} degC, window [100, 150], target 125.3 +- 30")


def test_05_pressure_profile(steady, reference_run):
    P = steady["P"]
    smap = reference_run.scenario.pressures.segment_map
    amb = np.array([s == "ambient" for s in smap])
    tail = P[amb]
    ok = (KILN_PA < P[0] < FAN_SUPPLY_PA
          and np.all(np.diff(tail) <= 0.0)
          and tail[-1] >= AMBIENT_PA and tail[0] > tail[-1])
    report(5, "pressure profile", ok,
           f"P1 = {P[0]:.1f} Pa in ({KILN_PA:.0f}, {FAN_SUPPLY_PA:.0f}); ambient-vented "
           f"segments {tail[0]:.1f} -> {tail[-1]:.1f} Pa, non-increasing towards "
           f"{AMBIENT_PA:.0f}")


def test_06_settling_times(reference_run):
    st = reference_run.meta["settling_s"]
    seg1 = st["segments"][0]
    whole = st["whole"]
    seg1_min = math.inf if seg1 is None else seg1 / 60.0
    whole_min = math.inf if whole is None else whole / 60.0
    ok = within(seg1_min, 20.0, 10.0) and within(whole_min, 55.0, 15.0)
    report(6, "settling at 1 %", ok,
           f"segment 1 {seg1_min:.0f} min (20 +- 10), whole cooler {whole_min:.0f} min "
           f"(55 +- 15)")


def test_07_alite_overshoot(reference_run, reference_steady):
    m, xs, ys, _ = reference_steady
    i = SOLIDS.index("C3S")
    bed = m.bottom
    C_ss = m.unpack(xs, ys)[0][bed, i]
    C_t = np.array([m.unpack(x, y)[0][bed, i] for x, y in
                    zip(reference_run.trajectory.x, reference_run.trajectory.y)])
    over = C_t - C_ss
    peak = float(over.max())
    seg = int(np.unravel_index(np.argmax(over), over.shape)[1]) + 1
    ok = 0.5 <= peak <= 4.0
    report(7, "C3S transient overshoot", ok,
           f"largest excess over steady value {peak:.3g} mol/m3 (segment {seg}), "
           f"required in [0.5, 4]")


def test_08_decomposition_products_leave_cooler(steady):
    mdot = steady["mass_flow"][-1]
    c2s, cao = mdot[SOLIDS.index("C2S")], mdot[SOLIDS.index("CaO")]
    report(8, "C2S and CaO outflow", c2s > 0 and cao > 0,
           f"C2S {c2s:.3g} kg/s, CaO {cao:.3g} kg/s with zero inflow")


# exact properties --------------------------------------------------------------------

def _random_state(model, rng):
    x0, y0 = model.initial_state()
    C_s, C_a, *_ = model.unpack(x0, y0)
    C_s = C_s * rng.uniform(0.0, 300.0, C_s.shape) \
        + model.solid_cell[:, None] * rng.uniform(0.0, 50.0, C_s.shape)
    C_a = C_a * rng.uniform(0.2, 3.0, C_a.shape) + rng.uniform(0.0, 2.0, C_a.shape)
    T_s = rng.uniform(400.0, 1700.0, model.ncell)
    T_a = rng.uniform(300.0, 1500.0, model.ncell)
    P = AMBIENT_PA + rng.uniform(-400.0, 400.0, model.ncell)
    U_s = thermo.enthalpy(T_s, P, C_s, model.solid)
    U_a = thermo.internal_energy_density(T_a, P, C_a, model.gas)
    return model.pack(C_s, C_a, U_s, U_a, T_s, T_a, P)


@pytest.fixture(scope="module")
def two_layer_model():
    return CoolerModel(Scenario(geometry=Geometry(n_layers=2)))


def test_09_species_and_element_conservation(two_layer_model):
    m = two_layer_model
    E = element_matrix().astype(float)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        x, y = _random_state(m, rng)
        dC_s, dC_a, *_ = m.unpack(m.assemble_f(x, y), y)
        F = m._fluxes(x, y)
        bf = m.boundary_fluxes(x, y)
        src = np.concatenate([m.V @ F["R_s"], m.V @ F["R_a"]])
        change = np.concatenate([m.V @ dC_s, m.V @ dC_a])
        transport = np.concatenate([bf.net_solid(), bf.net_gas()])
        flow = np.concatenate([bf.clinker_in + bf.solid_out,
                               np.abs(bf.fan_in).sum(0) + np.abs(bf.vent_out).sum(0)])
        species = np.max(np.abs(change - transport - src)) / (flow + np.abs(src)).max()
        elements = np.max(np.abs(E @ (change - transport))) / (E @ flow).max()
        worst = max(worst, species, elements)
    report(9, "species and element conservation", worst <= 1e-10,
           f"largest relative imbalance {worst:.2e} over 100 random states (limit 1e-10)")


def test_10_exchange_antisymmetry(two_layer_model, monkeypatch):
    """Doubling the exchange terms moves solid and gas energy by exactly opposite amounts."""
    m = two_layer_model
    base = m._fluxes

    def doubled(x, y):
        F = dict(base(x, y))
        for k in ("Q_cv", "Q_rad", "J"):
            F[k] = 2.0 * F[k]
        return F

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        x, y = _random_state(m, rng)
        F = base(x, y)
        exchange = F["Q_cv"] + F["Q_rad"] + F["J"]
        d1 = m.unpack(m.f(x, y), y)
        monkeypatch.setattr(m, "_fluxes", doubled)
        d2 = m.unpack(m.f(x, y), y)
        monkeypatch.setattr(m, "_fluxes", base)
        ds, da = d2[2] - d1[2], d2[3] - d1[3]
        scale = np.abs(exchange) + np.abs(d1[2]) + np.abs(d1[3])
        worst = max(worst, float(np.max(np.abs(ds + da) / scale)),
                    float(np.max(np.abs(da - exchange) / scale)))
    report(10, "energy exchange antisymmetry", worst <= 1e-12,
           f"solid loss minus gas gain {worst:.2e} relative to exchange (limit 1e-12)")


def test_11_temperature_round_trip():
    T = np.linspace(200.0, 2500.0, 461)
    worst = 0.0
    for phase in (thermo.DEFAULT_TABLE.solid, thermo.DEFAULT_TABLE.gas):
        C = np.broadcast_to(np.linspace(1.0, 10.0, phase.n), T.shape + (phase.n,))
        U = thermo.internal_energy_density(T, P0, C, phase)
        worst = max(worst, float(np.max(np.abs(thermo.temperature_from_energy(U, P0, C, phase)
                                                - T))))
    report(11, "temperature_from_energy round trip", worst <= 1e-6,
           f"max error {worst:.2e} K on 200-2500 K (limit 1e-6)")


def test_12_viscosity_calibration_and_mixing():
    gas = thermo.DEFAULT_TABLE.gas
    worst = 0.0
    for s, pts in zip(gas.species, gas.mu_points):
        for T, mu in pts:
            worst = max(worst, abs(thermo.sutherland_viscosity(s, T) / mu - 1.0))
    mix = 0.0
    T = np.array([300.0, 800.0, 1500.0])
    for s in GASES:
        x = np.broadcast_to(gas.vector({s: 1.0}), (3, gas.n))
        mix = max(mix, float(np.max(np.abs(thermo.mixture_viscosity(x, T)
                                           / thermo.sutherland_viscosity(s, T) - 1.0))))
    ok = worst <= 1e-10 and mix <= 1e-12
    report(12, "Sutherland calibration and Wilke reduction", ok,
           f"table points {worst:.1e} relative (limit 1e-10), pure-gas mixture {mix:.1e}")


class _ScalarDAE:
    nx = ny = 1

    def f(self, x, y):
        return -x

    def g(self, x, y):
        return y - x


def test_13_implicit_euler_order():
    errs = []
    for dt in (0.1, 0.05):
        cfg = IntegratorConfig(dt=dt, t_end=1.0, adaptive=False, dt_min=1e-6)
        tr = integrate(np.array([1.0]), np.array([1.0]), _ScalarDAE(), cfg)
        errs.append(abs(tr.x[-1, 0] - math.exp(-1.0)))
    ratio = errs[0] / errs[1]
    report(13, "implicit Euler order", within(ratio, 2.0, 0.2),
           f"error ratio under step halving {ratio:.3f} (2.0 +- 0.2)")


def test_14_stoichiometry_balances_elements():
    bal = element_matrix() @ DEFAULT_KINETICS.nu.T
    ok = bal.dtype.kind == "i" and not bal.any()
    report(14, "stoichiometric element balance", ok,
           f"integer element balance of all 6 reactions, max |residual| {np.abs(bal).max()}")


def test_15_wsgg_emissivity():
    rng = np.random.default_rng(15)
    S = np.linspace(0.0, 10.0, 20)
    ok = True
    for _ in range(200):
        x_w, x_c = rng.uniform(0.0, 0.3, 2)
        eps = thermo.gas_emissivity(x_w, x_c, rng.uniform(300, 2500), rng.uniform(5e4, 3e5), S)
        ok &= bool(np.all((eps >= 0) & (eps < 1)) and eps[0] == 0.0
                   and np.all(np.diff(eps) >= 0))
    report(15, "WSGG emissivity bounds", ok,
           "in [0, 1), zero at S_m = 0, monotone on a 20-point grid (200 random gases)")
