"""Clinker reactions: Arrhenius rate laws and the stoichiometric matrix.

Reactions, written with cement chemist notation (C=CaO, S=SiO2, A=Al2O3,
F=Fe2O3)::

    1: CaCO3          -> CO2 + CaO
    2: 2 CaO + SiO2   -> C2S
    3: CaO + C2S      -> C3S
    4: 3 CaO + Al2O3  -> C3A
    5: 4 CaO + Al2O3 + Fe2O3 -> C4AF
    6: C3S            -> C2S + CaO

The tabulated prefactors of reactions 1-5 produce a mass rate in kg/(m3 s)
from concentrations in mol/L. The mass rate is turned into a molar reaction
rate by dividing by the molar mass of ``basis`` (overridable). Reaction 6 is
first order with a prefactor in 1/s acting directly on mol/m3.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .thermo import DEFAULT_TABLE, GASES, R, SOLIDS, SpeciesTable, enthalpy

ELEMENTS = ("Ca", "Si", "Al", "Fe", "C", "O", "N", "Ar", "H")

FORMULAS = {
    "CaCO3": {"Ca": 1, "C": 1, "O": 3},
    "CaO": {"Ca": 1, "O": 1},
    "SiO2": {"Si": 1, "O": 2},
    "Al2O3": {"Al": 2, "O": 3},
    "Fe2O3": {"Fe": 2, "O": 3},
    "C2S": {"Ca": 2, "Si": 1, "O": 4},
    "C3S": {"Ca": 3, "Si": 1, "O": 5},
    "C3A": {"Ca": 3, "Al": 2, "O": 6},
    "C4AF": {"Ca": 4, "Al": 2, "Fe": 2, "O": 10},
    "CO2": {"C": 1, "O": 2},
    "N2": {"N": 2},
    "O2": {"O": 2},
    "Ar": {"Ar": 1},
    "CO": {"C": 1, "O": 1},
    "H2O": {"H": 2, "O": 1},
    "H2": {"H": 2},
}

ALL_SPECIES = SOLIDS + GASES


def element_matrix() -> np.ndarray:
    """Integer matrix (n_elements, n_species) over solids then gases."""
    E = np.zeros((len(ELEMENTS), len(ALL_SPECIES)), dtype=np.int64)
    for j, s in enumerate(ALL_SPECIES):
        for el, count in FORMULAS[s].items():
            E[ELEMENTS.index(el), j] = count
    return E


@dataclass(frozen=True)
class Reaction:
    id: int
    stoichiometry: dict[str, int]
    k_r: float
    E_A: float
    orders: dict[str, float]
    basis: str | None          # None: rate already in mol/(m3 s) per mol/m3

    def __post_init__(self):
        if self.k_r <= 0 or self.E_A <= 0:
            raise ValueError(f"reaction {self.id}: k_r and E_A must be positive")
        if any(a < 0 for a in self.orders.values()):
            raise ValueError(f"reaction {self.id}: negative order")


DEFAULT_REACTIONS = (
    Reaction(1, {"CaCO3": -1, "CO2": 1, "CaO": 1}, 1e8, 175.7e3, {"CaCO3": 1}, "CO2"),
    Reaction(2, {"CaO": -2, "SiO2": -1, "C2S": 1}, 1e7, 240e3,
             {"CaO": 2, "SiO2": 1}, "C2S"),
    Reaction(3, {"CaO": -1, "C2S": -1, "C3S": 1}, 1e9, 420e3,
             {"CaO": 1, "C2S": 1}, "C3S"),
    Reaction(4, {"CaO": -3, "Al2O3": -1, "C3A": 1}, 1e8, 310e3,
             {"CaO": 3, "Al2O3": 1}, "C3A"),
    Reaction(5, {"CaO": -4, "Al2O3": -1, "Fe2O3": -1, "C4AF": 1}, 1e8, 330e3,
             {"CaO": 4, "Al2O3": 1, "Fe2O3": 1}, "C4AF"),
    Reaction(6, {"C3S": -1, "C2S": 1, "CaO": 1}, 0.09, 96.58e3, {"C3S": 1}, None),
)


class KineticsTable:
    """Six reactions with precomputed index arrays for vectorised rates."""

    def __init__(self, reactions=DEFAULT_REACTIONS, table: SpeciesTable = DEFAULT_TABLE):
        self.reactions = tuple(reactions)
        self.table = table
        n_s = len(SOLIDS)
        self.nu = np.zeros((len(self.reactions), len(ALL_SPECIES)), dtype=np.int64)
        for j, rx in enumerate(self.reactions):
            for s, v in rx.stoichiometry.items():
                self.nu[j, ALL_SPECIES.index(s)] = v
        self.nu_s = self.nu[:, :n_s].astype(float)
        self.nu_a = self.nu[:, n_s:].astype(float)
        self.k_r = np.array([rx.k_r for rx in self.reactions])
        self.E_A = np.array([rx.E_A for rx in self.reactions])
        # reactant orders over solid species (all reactants are solids)
        self.orders = np.zeros((len(self.reactions), n_s))
        for j, rx in enumerate(self.reactions):
            for s, a in rx.orders.items():
                self.orders[j, SOLIDS.index(s)] = a
        M = np.concatenate([table.solid.molar_mass, table.gas.molar_mass])
        # molar rate = tabulated rate * conv; concentrations scaled by c_unit
        self.conv = np.array([1.0 / M[ALL_SPECIES.index(rx.basis)] if rx.basis else 1.0
                              for rx in self.reactions])
        self.c_unit = np.array([1e-3 if rx.basis else 1.0 for rx in self.reactions])

    def with_overrides(self, overrides: dict) -> "KineticsTable":
        """Patch reactions by id: ``{"6": {"k_r": ..., "E_A": ..., "basis": ...}}``."""
        rxs = []
        for rx in self.reactions:
            patch = overrides.get(str(rx.id)) or overrides.get(rx.id) or {}
            rxs.append(replace(rx, **patch))
        return KineticsTable(rxs, self.table)

    def rates(self, T, C_s):
        """Molar rate of every reaction, shape ``T.shape + (6,)``, mol/(m3 s)."""
        T = np.asarray(T, dtype=float)[..., None]
        C = np.maximum(np.asarray(C_s, dtype=float), 0.0)
        k = self.k_r * np.exp(-self.E_A / (R * T))
        Cu = C[..., None, :] * self.c_unit[:, None]
        prod = np.prod(np.where(self.orders > 0, Cu ** self.orders, 1.0), axis=-1)
        return k * prod * self.conv

    def production(self, r):
        """R = nu^T r split into solid and gas parts."""
        return r @ self.nu_s, r @ self.nu_a


DEFAULT_KINETICS = KineticsTable()


def reaction_rate(rx: Reaction | int, T, C_s, kinetics: KineticsTable = DEFAULT_KINETICS):
    """Rate of a single reaction, mol/(m3 s)."""
    j = rx - 1 if isinstance(rx, int) else kinetics.reactions.index(rx)
    return kinetics.rates(T, C_s)[..., j]


def production_rates(T_s, C_s, C_a=None, kinetics: KineticsTable = DEFAULT_KINETICS):
    """Production-rate vectors (R_s, R_a) at the solid temperature."""
    return kinetics.production(kinetics.rates(T_s, C_s))


def phase_transition_enthalpy(T_s, P, r1, table: SpeciesTable = DEFAULT_TABLE):
    """Enthalpy carried into the gas by the CO2 released in calcination, W/m3."""
    r1 = np.asarray(r1, dtype=float)
    n = np.zeros(r1.shape + (table.gas.n,))
    n[..., table.gas.index("CO2")] = r1
    return enthalpy(T_s, P, n, table.gas)
