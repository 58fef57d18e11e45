"""Species database and thermophysical property functions.

Amounts are per-phase vectors ordered like ``PhaseData.species``. All
property functions broadcast over leading axes: a temperature array of shape
``(m,)`` pairs with an amount array of shape ``(m, n_species)``. Enthalpy
and volume are homogeneous of order one in the amount vector, so the same
functions serve moles (mol), concentrations (mol/m3) and fluxes (mol/(m2 s)).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

T0 = 298.15
P0 = 101325.0
R = 8.314462618
SIGMA = 5.670374419e-8
ATM = 101325.0

POROSITY_MIN = 1.0 - math.pi / (3.0 * math.sqrt(2.0))

SOLIDS = ("CaCO3", "CaO", "SiO2", "Al2O3", "Fe2O3", "C2S", "C3S", "C3A", "C4AF")
GASES = ("CO2", "N2", "O2", "Ar", "CO", "H2O", "H2")

T_MIN_INVERSION = 200.0
T_MAX_INVERSION = 2500.0


class ThermoError(ValueError):
    """Invalid thermodynamic input (bad porosity, unknown species...)."""


class InversionError(ThermoError):
    """Temperature could not be recovered from an energy density."""


class CpRangeWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PhaseData:
    """Per-species property arrays for one phase."""

    name: str
    species: tuple[str, ...]
    molar_mass: np.ndarray
    density: np.ndarray | None
    cp_coeffs: np.ndarray          # (n, 3): c0, c1, c2
    cp_range: np.ndarray           # (n, 2), nan where no range is tabulated
    cp_freeze: np.ndarray          # (n,), inf unless cp is held constant above it
    dhf: np.ndarray
    k_points: tuple[np.ndarray, ...]
    mu_points: tuple[np.ndarray, ...] | None = None
    sutherland_S: np.ndarray | None = None
    _h_freeze: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Tf = np.where(np.isfinite(self.cp_freeze), self.cp_freeze, T0)
        object.__setattr__(self, "_h_freeze", _poly_integral(self.cp_coeffs, Tf))

    @property
    def n(self) -> int:
        return len(self.species)

    def index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise ThermoError(f"unknown {self.name} species {name!r}") from None

    def vector(self, amounts: dict[str, float]) -> np.ndarray:
        """Build an amount vector from a ``{species: value}`` mapping."""
        out = np.zeros(self.n)
        for name, value in amounts.items():
            out[self.index(name)] = value
        return out

    @property
    def specific_volume(self) -> np.ndarray:
        """Molar volume of the dense solid, M/rho (m3/mol)."""
        if self.density is None:
            raise ThermoError("specific volume is defined for the solid phase only")
        return self.molar_mass / self.density


@dataclass(frozen=True, eq=False)
class SpeciesTable:
    solid: PhaseData
    gas: PhaseData

    def phase_of(self, name: str) -> PhaseData:
        if name in self.solid.species:
            return self.solid
        if name in self.gas.species:
            return self.gas
        raise ThermoError(f"unknown species {name!r}")

    def as_dict(self) -> dict:
        """Inverse of :func:`table_from_dict` (JSON-ready)."""
        out = {}
        for ph in (self.solid, self.gas):
            for i, s in enumerate(ph.species):
                c = ph.cp_coeffs[i]
                rng = ph.cp_range[i]
                entry = {
                    "phase": ph.name,
                    "molar_mass": float(ph.molar_mass[i]),
                    "cp": {"c0": float(c[0]), "c1": float(c[1]), "c2": float(c[2]),
                           "range": None if np.isnan(rng[0]) else [float(rng[0]), float(rng[1])]},
                    "dhf": float(ph.dhf[i]),
                    "k_points": ph.k_points[i].tolist(),
                }
                if np.isfinite(ph.cp_freeze[i]):
                    entry["cp"]["freeze_above"] = float(ph.cp_freeze[i])
                if ph.density is not None:
                    entry["density"] = float(ph.density[i])
                if ph.mu_points is not None:
                    entry["mu_points"] = ph.mu_points[i].tolist()
                out[s] = entry
        return out


def _poly_integral(coeffs, T):
    """Antiderivative of c0 + c1 T + c2 T^2 between T0 and T, per species."""
    T = np.asarray(T, dtype=float)
    c0, c1, c2 = coeffs[..., 0], coeffs[..., 1], coeffs[..., 2]

    def F(t):
        return c0 * t + c1 * t * t / 2.0 + c2 * t ** 3 / 3.0

    return F(T) - F(T0)


def sutherland_constant(T_lo, mu_lo, T_hi, mu_hi):
    """Solve mu_hi = mu_lo (T_hi/T_lo)^1.5 (T_lo+S)/(T_hi+S) for S."""
    q = (mu_hi / mu_lo) / (T_hi / T_lo) ** 1.5
    return (q * T_hi - T_lo) / (1.0 - q)


def table_from_dict(species: dict) -> SpeciesTable:
    """Build a :class:`SpeciesTable` from the JSON species mapping."""
    unknown = set(species) - set(SOLIDS) - set(GASES)
    if unknown:
        raise ThermoError(f"unknown species {sorted(unknown)}")
    phases = {}
    for phase_name, names in (("solid", SOLIDS), ("gas", GASES)):
        missing = [s for s in names if s not in species]
        if missing:
            raise ThermoError(f"species database lacks {missing}")
        rows = [species[s] for s in names]
        for s, r in zip(names, rows):
            if r["phase"] != phase_name:
                raise ThermoError(f"{s} is listed as {r['phase']}, expected {phase_name}")
            if r["molar_mass"] <= 0:
                raise ThermoError(f"{s}: molar_mass must be positive")
        cp = np.array([[r["cp"]["c0"], r["cp"]["c1"], r["cp"]["c2"]] for r in rows])
        rng = np.array([r["cp"]["range"] if r["cp"].get("range") else [np.nan, np.nan]
                        for r in rows], dtype=float)
        freeze = np.array([r["cp"].get("freeze_above", np.inf) for r in rows], dtype=float)
        kw = dict(
            name=phase_name,
            species=names,
            molar_mass=np.array([r["molar_mass"] for r in rows]),
            density=None,
            cp_coeffs=cp,
            cp_range=rng,
            cp_freeze=freeze,
            dhf=np.array([r["dhf"] for r in rows]),
            k_points=tuple(np.asarray(r["k_points"], dtype=float) for r in rows),
        )
        if phase_name == "solid":
            dens = np.array([r["density"] for r in rows])
            if np.any(dens <= 0):
                raise ThermoError("solid densities must be positive")
            kw["density"] = dens
        else:
            mu = tuple(np.asarray(r["mu_points"], dtype=float) for r in rows)
            for s, m in zip(names, mu):
                if m.shape[0] < 2:
                    raise ThermoError(f"{s}: need two viscosity points for calibration")
            kw["mu_points"] = mu
            kw["sutherland_S"] = np.array(
                [sutherland_constant(m[0, 0], m[0, 1], m[1, 0], m[1, 1]) for m in mu])
        phases[phase_name] = PhaseData(**kw)
    return SpeciesTable(**phases)


def _read_json(name):
    return json.loads(resources.files("clinkercooler.data").joinpath(name).read_text())


def load_species_table(overrides: dict | None = None) -> SpeciesTable:
    """Bundled species database, optionally patched per species."""
    data = _read_json("species.json")["species"]
    if overrides:
        data = {k: dict(v) for k, v in data.items()}
        for name, patch in overrides.items():
            if name not in data:
                raise ThermoError(f"unknown species {name!r} in override")
            data[name].update(patch)
    return table_from_dict(data)


DEFAULT_TABLE = load_species_table()


# Heat capacity and enthalpy ---------------------------------------------------

_warned_ranges: set[str] = set()


def reset_range_warnings():
    _warned_ranges.clear()


def warn_cp_range(phase: PhaseData, T, present=None):
    """Warn once per species (until :func:`reset_range_warnings`) when ``T``
    leaves the tabulated cp range. ``present`` masks species to check."""
    T = np.asarray(T)
    if T.size == 0:
        return
    lo, hi = float(np.min(T)), float(np.max(T))
    for i, s in enumerate(phase.species):
        a, b = phase.cp_range[i]
        if s in _warned_ranges or np.isnan(a) or (present is not None and not present[i]):
            continue
        if lo < a or hi > b:
            _warned_ranges.add(s)
            warnings.warn(f"cp polynomial of {s} extrapolated outside {a:g}-{b:g} K",
                          CpRangeWarning, stacklevel=3)


def cp_species(T, phase: PhaseData):
    """Molar heat capacities, shape ``T.shape + (n,)`` in J/(mol K)."""
    T = np.asarray(T, dtype=float)[..., None]
    Te = np.minimum(T, phase.cp_freeze)
    c = phase.cp_coeffs
    return c[:, 0] + c[:, 1] * Te + c[:, 2] * Te * Te


def cp_molar(species: str, T, table: SpeciesTable = DEFAULT_TABLE):
    """Heat capacity of one species, c0 + c1 T + c2 T^2."""
    phase = table.phase_of(species)
    return cp_species(T, phase)[..., phase.index(species)]


def molar_enthalpy(T, phase: PhaseData):
    """Per-species molar enthalpy incl. formation enthalpy, J/mol."""
    T = np.asarray(T, dtype=float)[..., None]
    Te = np.minimum(T, phase.cp_freeze)
    h = phase.dhf + _poly_integral(phase.cp_coeffs, Te)
    above = T > phase.cp_freeze
    if np.any(above):
        Tf = np.where(np.isfinite(phase.cp_freeze), phase.cp_freeze, T0)
        c = phase.cp_coeffs
        cp_f = c[:, 0] + c[:, 1] * Tf + c[:, 2] * Tf * Tf
        h = np.where(above, phase.dhf + phase._h_freeze + cp_f * (T - Tf), h)
    return h


def enthalpy(T, P, n, phase: PhaseData):
    """H(T, P, n) = sum_i n_i (dHf_i + int_T0^T cp_i). Pressure-independent."""
    return np.sum(np.asarray(n, dtype=float) * molar_enthalpy(T, phase), axis=-1)


def heat_capacity(T, n, phase: PhaseData):
    """dH/dT = sum_i n_i cp_i(T)."""
    return np.sum(np.asarray(n, dtype=float) * cp_species(T, phase), axis=-1)


def volume(T, P, n, phase: PhaseData, porosity: float = 0.4):
    """Bulk solid volume (including voids) or ideal-gas volume, m3."""
    n = np.asarray(n, dtype=float)
    if phase.name == "solid":
        if porosity >= 1.0:
            raise ThermoError("porosity of 1 leaves no solid: bulk volume is singular")
        return np.sum(n * phase.specific_volume, axis=-1) / (1.0 - porosity)
    return np.sum(n, axis=-1) * R * np.asarray(T, dtype=float) / np.asarray(P, dtype=float)


def internal_energy_density(T, P, C, phase: PhaseData, porosity: float = 0.4):
    """U = H - P V for gas; U = H for the solid phase."""
    H = enthalpy(T, P, C, phase)
    if phase.name == "solid":
        return H
    return H - np.asarray(P, dtype=float) * volume(T, P, C, phase)


def temperature_from_energy(U, P, C, phase: PhaseData, T_guess=1000.0,
                            porosity: float = 0.4, tol=1e-6, max_iter=50):
    """Invert :func:`internal_energy_density` for temperature.

    Newton with the analytic derivative, safeguarded by a bisection bracket on
    [200, 2500] K. Broadcasts over leading axes.
    """
    U = np.asarray(U, dtype=float)
    C = np.asarray(C, dtype=float)
    P = np.broadcast_to(np.asarray(P, dtype=float), U.shape)
    if np.any(np.sum(C, axis=-1) <= 0):
        raise InversionError("temperature inversion needs a positive amount")
    gas = phase.name == "gas"
    ntot = np.sum(C, axis=-1)

    def resid(T):
        return internal_energy_density(T, P, C, phase) - U

    lo = np.full(U.shape, T_MIN_INVERSION)
    hi = np.full(U.shape, T_MAX_INVERSION)
    r_lo, r_hi = resid(lo), resid(hi)
    if np.any(r_lo > 0) or np.any(r_hi < 0):
        raise InversionError(
            f"energy density outside the range attainable on "
            f"[{T_MIN_INVERSION:g}, {T_MAX_INVERSION:g}] K")
    T = np.clip(np.broadcast_to(np.asarray(T_guess, dtype=float), U.shape).copy(),
                lo, hi)
    scale = np.abs(U) + 1.0
    r = resid(T)
    step = np.inf
    for _ in range(max_iter):
        if np.all(np.abs(r) <= tol * scale) and step < 1e-9:
            return T
        lo = np.where(r < 0, T, lo)
        hi = np.where(r > 0, T, hi)
        dU = heat_capacity(T, C, phase) - (ntot * R if gas else 0.0)
        T_new = T - r / dU
        bad = (T_new < lo) | (T_new > hi) | ~np.isfinite(T_new)
        T_new = np.where(bad, 0.5 * (lo + hi), T_new)
        step = float(np.max(np.abs(T_new - T)))
        T = T_new
        r = resid(T)
    if np.all(np.abs(r) <= tol * scale):
        return T
    raise InversionError(
        f"temperature inversion did not converge, max residual {np.max(np.abs(r)):.3e}")


# Transport properties ---------------------------------------------------------

def sutherland_viscosity(species: str, T, table: SpeciesTable = DEFAULT_TABLE):
    """Pure-gas viscosity (Pa s) calibrated on the two tabulated points."""
    gas = table.gas
    return gas_viscosities(T, gas)[..., gas.index(species)]


def gas_viscosities(T, gas: PhaseData):
    """Sutherland viscosities of all gas species, shape ``T.shape + (n,)``.

    A fitted constant S < 0 puts a pole at T = -S; for those species the
    temperature is floored at the lower calibration point.
    """
    T = np.asarray(T, dtype=float)[..., None]
    T_lo = np.array([m[0, 0] for m in gas.mu_points])
    mu_lo = np.array([m[0, 1] for m in gas.mu_points])
    S = gas.sutherland_S
    T = np.where(S < 0, np.maximum(T, T_lo), T)
    return mu_lo * (T / T_lo) ** 1.5 * (T_lo + S) / (T + S)


def gas_conductivities(T, gas: PhaseData):
    """Linear interpolation between the two table points, constant outside."""
    T = np.asarray(T, dtype=float)
    out = np.empty(T.shape + (gas.n,))
    for i, pts in enumerate(gas.k_points):
        out[..., i] = np.interp(T, pts[:, 0], pts[:, 1])
    return out


def solid_conductivities(solid: PhaseData):
    return np.array([pts[0, 1] for pts in solid.k_points])


def wilke_phi(mu, M):
    """Wilke interaction matrix phi_ij, shape ``mu.shape + (n,)``."""
    mu_i = mu[..., :, None]
    mu_j = mu[..., None, :]
    Mi = M[:, None]
    Mj = M[None, :]
    return ((1.0 + np.sqrt(mu_i / mu_j) * (Mj / Mi) ** 0.25) ** 2
            / (2.0 * math.sqrt(2.0) * np.sqrt(1.0 + Mi / Mj)))


def _mix(x, prop, phi):
    x = np.asarray(x, dtype=float)
    denom = np.einsum("...ij,...j->...i", phi, x)
    terms = np.where(x > 0, x * prop / np.where(denom > 0, denom, 1.0), 0.0)
    return np.sum(terms, axis=-1)


def mixture_viscosity(x, T, table: SpeciesTable = DEFAULT_TABLE):
    """Wilke's rule for the gas-mixture viscosity (Pa s)."""
    gas = table.gas
    mu = gas_viscosities(T, gas)
    return _mix(x, mu, wilke_phi(mu, gas.molar_mass))


def mixture_conductivity(x, T, table: SpeciesTable = DEFAULT_TABLE):
    """Mason-Saxena form of Wassiljewa's equation (W/(m K))."""
    gas = table.gas
    mu = gas_viscosities(T, gas)
    k = gas_conductivities(T, gas)
    return _mix(x, k, wilke_phi(mu, gas.molar_mass))


def mixture_transport(x, T, gas: PhaseData):
    """Viscosity and conductivity together, sharing the phi matrix."""
    mu = gas_viscosities(T, gas)
    phi = wilke_phi(mu, gas.molar_mass)
    return _mix(x, mu, phi), _mix(x, gas_conductivities(T, gas), phi)


def solid_conductivity(C_s, porosity, k_air, table: SpeciesTable = DEFAULT_TABLE):
    """Series (layered) conductivity of the porous clinker bed.

    1/k_s = eta/k_a + (1 - eta) sum_i (V_i/V_s)/k_i with volume fractions from
    M/rho. Without any solid the sum is dropped.
    """
    solid = table.solid
    C_s = np.asarray(C_s, dtype=float)
    v = C_s * solid.specific_volume
    vtot = np.sum(v, axis=-1)
    safe = np.where(vtot > 0, vtot, 1.0)
    series = np.sum(v / solid_conductivities(solid), axis=-1) / safe
    series = np.where(vtot > 0, series, 0.0)
    inv = porosity / np.asarray(k_air, dtype=float) + (1.0 - porosity) * series
    return 1.0 / inv


def check_porosity(eta: float):
    if not (POROSITY_MIN <= eta < 1.0):
        raise ThermoError(f"porosity {eta} outside [{POROSITY_MIN:.4f}, 1)")


# Radiation --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WSGGCoefficients:
    K1: np.ndarray
    K2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray
    T_ref: float = 1200.0
    ratio_bounds: tuple[float, float] = (0.125, 2.0)

    @classmethod
    def from_dict(cls, d: dict) -> "WSGGCoefficients":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("K1", "K2", "C1", "C2", "C3")),
                   T_ref=float(d.get("T_ref", 1200.0)),
                   ratio_bounds=tuple(d.get("ratio_bounds", (0.125, 2.0))))

    def as_dict(self) -> dict:
        return {"K1": self.K1.tolist(), "K2": self.K2.tolist(), "C1": self.C1.tolist(),
                "C2": self.C2.tolist(), "C3": self.C3.tolist(), "T_ref": self.T_ref,
                "ratio_bounds": list(self.ratio_bounds)}


DEFAULT_WSGG = WSGGCoefficients.from_dict(_read_json("wsgg.json"))


def gas_emissivity(x_h2o, x_co2, T, P, path_length, coeffs: WSGGCoefficients = DEFAULT_WSGG):
    """Weighted-sum-of-grey-gases emissivity of an H2O/CO2-bearing gas.

    The molar ratio x_H2O/x_CO2 is clamped to ``coeffs.ratio_bounds``, which
    also covers x_CO2 = 0. Pressure enters in atm. Result clipped to [0, 1).
    """
    x_h2o = np.asarray(x_h2o, dtype=float)
    x_co2 = np.asarray(x_co2, dtype=float)
    lo, hi = coeffs.ratio_bounds
    with np.errstate(over="ignore", divide="ignore"):
        ratio = np.where(x_co2 > 0, x_h2o / np.where(x_co2 > 0, x_co2, 1.0), hi)
    ratio = np.clip(ratio, lo, hi)[..., None]
    k = np.maximum(coeffs.K1 + coeffs.K2 * ratio, 0.0)
    c = (coeffs.C1 + coeffs.C2 * ratio[..., None] + coeffs.C3 * ratio[..., None] ** 2)
    tau = (np.asarray(T, dtype=float) / coeffs.T_ref)[..., None, None]
    a = np.sum(c * tau ** np.arange(3), axis=-1)
    a = np.maximum(a, 0.0)
    pl = (np.asarray(P, dtype=float) / ATM * np.asarray(path_length, dtype=float)
          * (x_h2o + x_co2))[..., None]
    eps = np.sum(a * (1.0 - np.exp(-k * pl)), axis=-1)
    return np.clip(eps, 0.0, np.nextafter(1.0, 0.0))
