from dataclasses import replace

import numpy as np
import pytest

from clinkercooler import thermo
from clinkercooler.kinetics import element_matrix
from clinkercooler.model import (IA, IS, IUA, IUS, NG, NS, NXC, NYC, AssemblyError,
                                 ConfigurationError, CoolerModel, InitializationError)
from clinkercooler.scenario import (ClinkerInflow, FanInflow, Geometry, PressureBoundary,
                                    Scenario, reference_scenario)
from clinkercooler.thermo import R


@pytest.fixture(scope="module", params=[1, 2], ids=["one_layer", "two_layers"])
def model(request):
    sc = Scenario(geometry=Geometry(n_layers=request.param))
    return CoolerModel(sc)


def random_state(model, rng):
    """A physical but arbitrary state: consistent energies, random T, P, composition."""
    x0, y0 = model.initial_state()
    C_s, C_a, *_ = model.unpack(x0, y0)
    C_s = C_s * rng.uniform(0.0, 300.0, size=C_s.shape)
    C_s[:, :] += model.solid_cell[:, None] * rng.uniform(0.0, 50.0, size=C_s.shape)
    C_a = C_a * rng.uniform(0.2, 3.0, size=C_a.shape) + rng.uniform(0, 2.0, size=C_a.shape)
    T_s = rng.uniform(400.0, 1700.0, model.ncell)
    T_a = rng.uniform(300.0, 1500.0, model.ncell)
    P = 101325.0 + rng.uniform(-400.0, 400.0, model.ncell)
    U_s = thermo.enthalpy(T_s, P, C_s, model.solid)
    U_a = thermo.internal_energy_density(T_a, P, C_a, model.gas)
    return model.pack(C_s, C_a, U_s, U_a, T_s, T_a, P)


def _totals(model, x, y):
    dx = model.assemble_f(x, y)
    dC_s, dC_a, dU_s, dU_a, *_ = model.unpack(dx, y)
    V = model.V
    return (V @ dC_s, V @ dC_a, V @ (dU_s + dU_a), model._fluxes(x, y))


def test_species_conservation_on_random_states(model):
    rng = np.random.default_rng(11)
    for _ in range(100):
        x, y = random_state(model, rng)
        S_s, S_a, _, F = _totals(model, x, y)
        bf = model.boundary_fluxes(x, y)
        src_s = model.V @ F["R_s"]
        src_a = model.V @ F["R_a"]
        exp_s = bf.net_solid() + src_s
        exp_a = bf.net_gas() + src_a
        scale_s = np.abs(bf.clinker_in) + np.abs(bf.solid_out) + np.abs(src_s) + 1e-300
        scale_a = (np.abs(bf.fan_in).sum(0) + np.abs(bf.vent_out).sum(0) + np.abs(src_a)
                   + 1e-300)
        assert np.all(np.abs(S_s - exp_s) <= 1e-10 * scale_s.max())
        assert np.all(np.abs(S_a - exp_a) <= 1e-10 * scale_a.max())


def test_element_conservation_on_random_states(model):
    E = element_matrix().astype(float)
    rng = np.random.default_rng(12)
    for _ in range(100):
        x, y = random_state(model, rng)
        S_s, S_a, _, _ = _totals(model, x, y)
        bf = model.boundary_fluxes(x, y)
        change = E @ np.concatenate([S_s, S_a])
        transport = E @ np.concatenate([bf.net_solid(), bf.net_gas()])
        scale = E @ np.concatenate([bf.clinker_in + bf.solid_out,
                                    np.abs(bf.fan_in).sum(0) + np.abs(bf.vent_out).sum(0)])
        assert np.all(np.abs(change - transport) <= 1e-10 * scale.max())


def test_energy_conservation_on_random_states(model):
    rng = np.random.default_rng(13)
    for _ in range(100):
        x, y = random_state(model, rng)
        _, _, S_U, _ = _totals(model, x, y)
        bf = model.boundary_fluxes(x, y)
        scale = (abs(bf.clinker_in_H) + abs(bf.solid_out_H) + np.abs(bf.fan_in_H).sum()
                 + np.abs(bf.vent_out_H).sum())
        assert abs(S_U - bf.net_enthalpy()) <= 1e-10 * scale


def test_exchange_terms_cancel(model, monkeypatch):
    """Interphase heat and calcination enthalpy leave the solid exactly as they enter the gas."""
    rng = np.random.default_rng(14)
    base = model._fluxes

    def doubled(x, y):
        F = dict(base(x, y))
        for k in ("Q_cv", "Q_rad", "J"):
            F[k] = 2.0 * F[k]
        return F

    for _ in range(20):
        x, y = random_state(model, rng)
        F = base(x, y)
        exchange = F["Q_cv"] + F["Q_rad"] + F["J"]
        assert np.any(exchange != 0)
        d1 = model.unpack(model.f(x, y), y)
        monkeypatch.setattr(model, "_fluxes", doubled)
        d2 = model.unpack(model.f(x, y), y)
        monkeypatch.setattr(model, "_fluxes", base)
        ds, da = d2[2] - d1[2], d2[3] - d1[3]
        scale = np.abs(exchange) + np.abs(d1[2]) + np.abs(d1[3])
        assert np.all(np.abs(ds + exchange) <= 1e-12 * scale)
        assert np.all(np.abs(da - exchange) <= 1e-12 * scale)
        assert abs(model.V @ (ds + da)) <= 1e-12 * (model.V @ scale)


def test_interior_fluxes_are_single_valued(model):
    """Each interior face leaves one cell and enters one other: V-weighted columns telescope."""
    for D in (model.Dg, model.Ds):
        D = np.asarray(D)
        assert np.all(np.count_nonzero(D, axis=0) == 2)
        assert np.allclose(model.V @ D, 0.0, atol=1e-12)


def test_index_one_at_initial_state(model):
    x, y = model.initial_state()
    G0 = model.assemble_g(x, y)
    n = model.ny
    J = np.empty((n, n))
    for j in range(n):
        h = 1e-6 * max(abs(y[j]), 1.0)
        yp = y.copy()
        yp[j] += h
        J[:, j] = (model.assemble_g(x, yp) - G0) / h
    assert np.linalg.matrix_rank(J) == n
    assert np.linalg.cond(J) < 1e10


def test_consistent_initialize_round_trip(model):
    x, y = model.initial_state()
    assert np.max(np.abs(model.assemble_g(x, y))) < 1e-12
    back = model.solve_algebraic(x, y)
    Y, B = y.reshape(-1, NYC), back.reshape(-1, NYC)
    assert np.max(np.abs(Y[:, :2] - B[:, :2])) < 1e-6
    assert np.allclose(Y[:, 2], B[:, 2], rtol=1e-12)


def test_bundled_initial_state_builds():
    m = CoolerModel(reference_scenario())
    x, y = m.initial_state()
    _, _, _, _, T_s, T_a, P = m.unpack(x, y)
    assert np.allclose(T_s[m.solid_cell], 973.15)
    assert np.allclose(T_a, 1073.15)
    assert np.all(np.isfinite(m.assemble_f(x, y)))


def test_zero_gas_cell_cannot_be_initialized(model):
    C_s, C_a = model.initial_concentrations()
    C_a[0] = 0.0
    with pytest.raises(InitializationError):
        model.consistent_initialize(C_s, C_a, 900.0, 900.0)


def test_g_responds_to_solid_temperature(model):
    x, y = model.initial_state()
    C_s = model.unpack(x, y)[0]
    Y = y.reshape(-1, NYC).copy()
    Y[:, 0] += 1.0
    g = model.assemble_g(x, Y.ravel(), scaled=False).reshape(-1, NYC)
    T = 973.15 + 0.5
    oracle = -np.sum(C_s * thermo.cp_species(T, model.solid), -1)
    bed = model.solid_cell
    assert np.allclose(g[bed, 0], oracle[bed], rtol=1e-6)


def test_g_volume_closure_scales_with_pressure(model):
    x, y = model.initial_state()
    C_s, C_a, _, _, T_s, T_a, P = model.unpack(x, y)
    Va = C_a.sum(-1) * R * T_a / P
    Y = y.reshape(-1, NYC).copy()
    Y[:, 2] *= 2.0
    g3 = model.assemble_g(x, Y.ravel()).reshape(-1, NYC)[:, 2]
    Vs = (C_s @ model.sv) / (1 - model.eta)
    assert np.allclose(g3, Va / 2 + Vs - 1.0, rtol=1e-12, atol=1e-15)


def test_non_finite_state_names_the_cell(model):
    x, y = model.initial_state()
    Y = y.reshape(-1, NYC).copy()
    c = model.ncell - 1
    Y[c, 1] = np.nan
    with pytest.raises(AssemblyError, match=f"cell {c}"):
        model.assemble_g(x, Y.ravel())


def test_unknown_pressure_id():
    sc = Scenario(pressures=PressureBoundary(segment_map=("kiln", "furnace") + ("ambient",) * 8))
    with pytest.raises(ConfigurationError, match="furnace"):
        CoolerModel(sc)


# boundary examples -------------------------------------------------------------------

def test_fan_flow_to_molar_flux():
    m = CoolerModel(Scenario())
    gas = m.gas
    x = m.x_air
    M_mix = float(x @ gas.molar_mass)
    assert np.allclose(m.fan_molar[2], 16.24 / M_mix * x, rtol=1e-14)
    assert m.fan_molar[2] @ gas.molar_mass == pytest.approx(16.24, rel=1e-14)


def test_clinker_inflow_per_species():
    m = CoolerModel(Scenario())
    mdot = 191e3 / 3600.0
    solid = m.solid
    for s, w in (("C3S", 0.7996), ("C3A", 0.0976), ("C4AF", 0.1028)):
        i = solid.index(s)
        assert m.clinker_molar[i] == pytest.approx(mdot * w / solid.molar_mass[i], rel=1e-14)
    assert m.clinker_molar @ solid.molar_mass == pytest.approx(mdot, rel=1e-12)


def _quiet_scenario(n_layers, **kw):
    P = 101325.0
    return Scenario(
        geometry=Geometry(n_layers=n_layers, **kw.pop("geometry", {})),
        clinker=ClinkerInflow(rate_t_per_h=kw.pop("clinker_t_h", 0.0)),
        fans=FanInflow(mass_flow_kg_s=(0.0,) * 10, temperature_K=900.0),
        pressures=PressureBoundary(external_Pa=(("kiln", P), ("third_air", P), ("ambient", P)),
                                   backflow_temperature_K=900.0),
        **kw)


@pytest.mark.parametrize("n_layers", [1, 2])
def test_equilibrium_without_boundaries_is_stationary(n_layers):
    m = CoolerModel(_quiet_scenario(n_layers))
    C_s = np.zeros((m.ncell, NS))
    C_a = np.tile(m.x_air * 101325.0 / (R * 900.0), (m.ncell, 1))
    x, y = m.consistent_initialize(C_s, C_a, 900.0, 900.0)
    # pressures from the volume closure differ from the vents' by roundoff only
    assert np.all(np.abs(m.assemble_f(x, y)) <= 1e-9 * (np.abs(x) + 1.0))
    bf = m.boundary_fluxes(x, y)
    assert np.all(np.abs(bf.vent_velocity) < 1e-9)


def test_single_cell_clinker_inflow():
    sc = _quiet_scenario(1, clinker_t_h=191.0,
                         geometry=dict(n_segments=1, length=3.6),
                         grate_speed_m_s=(0.0,))
    sc = replace(sc, fans=replace(sc.fans, mass_flow_kg_s=(0.0,)),
                 pressures=replace(sc.pressures, segment_map=("ambient",)))
    m = CoolerModel(sc)
    C_s = np.zeros((1, NS))
    C_a = (m.x_air * 101325.0 / (R * 900.0))[None, :]
    x, y = m.consistent_initialize(C_s, C_a, 900.0, 900.0)
    dC_s = m.assemble_f(x, y).reshape(1, NXC)[0, IS]
    assert np.allclose(dC_s, m.clinker_molar / m.V[0], rtol=1e-14)


def test_equal_pressures_give_no_vent_flow(model):
    x, y = model.initial_state()
    C_s, C_a, U_s, U_a, T_s, T_a, P = model.unpack(x, y)
    P_eq = model.P_ext[model.seg]
    x2, y2 = model.pack(C_s, C_a, U_s, U_a, T_s, T_a, P_eq)
    assert np.all(model.boundary_fluxes(x2, y2).vent_velocity == 0.0)


def test_profiles_shape_and_extrapolation():
    m = CoolerModel(Scenario())
    x, y = m.initial_state()
    pr = m.segment_profiles(x, y)
    assert pr["T_s"].shape == (10,) and pr["mass_flow"].shape == (10, NS)
    T = pr["T_s"]
    assert pr["T_out_extrapolated"] == pytest.approx(T[-1] + 0.5 * (T[-1] - T[-2]))
