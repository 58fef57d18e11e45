import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clinkercooler import kinetics, thermo
from clinkercooler.kinetics import (ALL_SPECIES, DEFAULT_KINETICS, DEFAULT_REACTIONS, ELEMENTS,
                                    Reaction, element_matrix)
from clinkercooler.thermo import GASES, R, SOLIDS, T0

NS = len(SOLIDS)
conc = st.lists(st.floats(0, 5e4), min_size=NS, max_size=NS)


def test_every_reaction_balances_elements_exactly():
    E = element_matrix()
    nu = DEFAULT_KINETICS.nu
    assert E.dtype.kind == "i" and nu.dtype.kind == "i"
    assert np.array_equal(E @ nu.T, np.zeros((len(ELEMENTS), len(DEFAULT_REACTIONS)), int))


def test_stoichiometry_columns_match_reaction_maps():
    for j, rx in enumerate(DEFAULT_REACTIONS):
        for s, v in rx.stoichiometry.items():
            assert DEFAULT_KINETICS.nu[j, ALL_SPECIES.index(s)] == v
        assert np.count_nonzero(DEFAULT_KINETICS.nu[j]) == len(rx.stoichiometry)


def test_reaction_parameters_positive():
    for rx in DEFAULT_REACTIONS:
        assert rx.k_r > 0 and rx.E_A > 0
        assert all(a >= 0 for a in rx.orders.values())
    with pytest.raises(ValueError):
        Reaction(7, {"CaO": -1}, -1.0, 1e5, {"CaO": 1}, None)
    with pytest.raises(ValueError):
        Reaction(7, {"CaO": -1}, 1.0, 1e5, {"CaO": -1}, None)


def test_zero_reactant_gives_zero_rate():
    C = np.full(NS, 100.0)
    for rx in DEFAULT_REACTIONS:
        for s in rx.orders:
            Cz = C.copy()
            Cz[SOLIDS.index(s)] = 0.0
            assert kinetics.reaction_rate(rx, 1500.0, Cz) == 0.0


def test_alite_decomposition_rate():
    C = np.zeros(NS)
    C[SOLIDS.index("C3S")] = 1000.0
    expected = 1000.0 * 0.09 * math.exp(-96580.0 / (R * 1200.0))
    assert kinetics.reaction_rate(6, 1200.0, C) == pytest.approx(expected, rel=1e-12)


def test_calcination_rate_with_mass_basis():
    C = np.zeros(NS)
    C[SOLIDS.index("CaCO3")] = 2000.0
    M_co2 = thermo.DEFAULT_TABLE.gas.molar_mass[GASES.index("CO2")]
    # tabulated law: kg/(m3 s) from mol/L, turned into mol/(m3 s) by the CO2 molar mass
    expected = 1e8 * math.exp(-175.7e3 / (R * 1100.0)) * 2.0 / M_co2
    assert kinetics.reaction_rate(1, 1100.0, C) == pytest.approx(expected, rel=1e-12)


def test_rate_vanishes_when_cold():
    C = np.full(NS, 100.0)
    assert kinetics.reaction_rate(1, 1.0, C) == 0.0


def test_basis_override():
    tbl = DEFAULT_KINETICS.with_overrides({"1": {"basis": "CaO"}})
    C = np.zeros(NS)
    C[SOLIDS.index("CaCO3")] = 2000.0
    solid = thermo.DEFAULT_TABLE.solid
    gas = thermo.DEFAULT_TABLE.gas
    ratio = gas.molar_mass[GASES.index("CO2")] / solid.molar_mass[SOLIDS.index("CaO")]
    assert kinetics.reaction_rate(1, 1100.0, C, tbl) == \
        pytest.approx(kinetics.reaction_rate(1, 1100.0, C) * ratio, rel=1e-12)


def test_cold_solid_produces_nothing():
    R_s, R_a = DEFAULT_KINETICS.production(np.zeros(6))
    assert not R_s.any() and not R_a.any()


def test_unit_calcination_production():
    R_s, R_a = DEFAULT_KINETICS.production(np.eye(6)[0])
    exp_s = np.zeros(NS)
    exp_s[SOLIDS.index("CaCO3")] = -1
    exp_s[SOLIDS.index("CaO")] = 1
    exp_a = np.zeros(len(GASES))
    exp_a[GASES.index("CO2")] = 1
    assert np.array_equal(R_s, exp_s) and np.array_equal(R_a, exp_a)


def test_unit_alite_decomposition_production():
    R_s, R_a = DEFAULT_KINETICS.production(np.eye(6)[5])
    exp_s = np.zeros(NS)
    exp_s[SOLIDS.index("C3S")] = -1
    exp_s[SOLIDS.index("C2S")] = 1
    exp_s[SOLIDS.index("CaO")] = 1
    assert np.array_equal(R_s, exp_s) and not R_a.any()


def test_phase_transition_enthalpy():
    gas = thermo.DEFAULT_TABLE.gas
    assert kinetics.phase_transition_enthalpy(1100.0, 1e5, 0.0) == 0.0
    dhf = gas.dhf[GASES.index("CO2")]
    assert kinetics.phase_transition_enthalpy(T0, 1e5, 1.0) == pytest.approx(dhf, rel=1e-14)
    n = gas.vector({"CO2": 1.0})
    assert kinetics.phase_transition_enthalpy(1100.0, 1e5, 1.0) == \
        pytest.approx(thermo.enthalpy(1100.0, 1e5, n, gas), rel=1e-14)


@settings(max_examples=80, deadline=None)
@given(C=conc, T=st.floats(300, 2500), zero=st.sets(st.integers(0, NS - 1)))
def test_absent_species_are_not_consumed(C, T, zero):
    C = np.array(C)
    C[list(zero)] = 0.0
    R_s, _ = kinetics.production_rates(T, C)
    assert np.all(R_s[C == 0.0] >= 0.0)


@settings(max_examples=60, deadline=None)
@given(C=st.lists(st.floats(1.0, 5e4), min_size=NS, max_size=NS),
       T=st.floats(300, 2400), dT=st.floats(1.0, 100.0))
def test_rates_increase_with_temperature(C, T, dT):
    r1 = DEFAULT_KINETICS.rates(T, np.array(C))
    r2 = DEFAULT_KINETICS.rates(T + dT, np.array(C))
    pos = r1 > 0
    assert np.all(r2[pos] > r1[pos])


@settings(max_examples=60, deadline=None)
@given(r1=st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6),
       r2=st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6),
       a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_production_is_linear(r1, r2, a, b):
    r1, r2 = np.array(r1), np.array(r2)
    lhs = DEFAULT_KINETICS.production(a * r1 + b * r2)
    p1, p2 = DEFAULT_KINETICS.production(r1), DEFAULT_KINETICS.production(r2)
    for L, A, B in zip(lhs, p1, p2):
        assert np.allclose(L, a * A + b * B, rtol=1e-12, atol=1e-9)


def test_reaction_production_conserves_elements_and_mass():
    M = np.concatenate([thermo.DEFAULT_TABLE.solid.molar_mass,
                        thermo.DEFAULT_TABLE.gas.molar_mass])
    mass = DEFAULT_KINETICS.nu @ M
    # tabulated molar masses carry four to five significant digits
    assert np.allclose(mass, 0.0, atol=5e-5)
