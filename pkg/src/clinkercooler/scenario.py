"""Scenario files: parsing, validation, defaults and serialisation.

A scenario is one JSON document. Units are SI and carried in the key names
where they could be ambiguous (``temperature_K``, ``mass_flow_kg_s``).
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

from .kinetics import DEFAULT_REACTIONS
from .solver import IntegratorConfig
from .thermo import GASES, POROSITY_MIN, SOLIDS

PRESSURE_IDS = ("kiln", "third_air", "ambient")


class ScenarioError(ValueError):
    """Validation failure; ``errors`` lists every violation as (path, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


@dataclass(frozen=True)
class Geometry:
    length: float = 36.0
    height: float = 3.0
    width: float = 4.0
    n_segments: int = 10
    n_layers: int = 2
    bed_layer_height: float = 0.6
    particle_diameter: float = 0.040
    shape_factor: float = 0.25
    porosity: float = 0.4

    @property
    def dz(self) -> float:
        return self.length / self.n_segments

    @property
    def layer_heights(self) -> tuple[float, ...]:
        if self.n_layers == 1:
            return (self.height,)
        rest = (self.height - self.bed_layer_height) / (self.n_layers - 1)
        return (self.bed_layer_height,) + (rest,) * (self.n_layers - 1)


@dataclass(frozen=True)
class ClinkerInflow:
    rate_t_per_h: float = 191.0
    composition: tuple[tuple[str, float], ...] = (("C3S", 0.7996), ("C3A", 0.0976),
                                                  ("C4AF", 0.1028))
    basis: str = "mass"
    temperature_K: float = 1723.15


DRY_AIR = (("N2", 0.7808), ("O2", 0.2095), ("Ar", 0.0093), ("CO2", 0.0004))
HUMID_AIR = tuple((s, round(0.99 * x, 12)) for s, x in DRY_AIR) + (("H2O", 0.01),)


@dataclass(frozen=True)
class FanInflow:
    mass_flow_kg_s: tuple[float, ...] = (40.89, 18.56) + (16.24,) * 8
    composition: tuple[tuple[str, float], ...] = HUMID_AIR
    basis: str = "mole"
    temperature_K: float = 298.15


@dataclass(frozen=True)
class PressureBoundary:
    external_Pa: tuple[tuple[str, float], ...] = (("kiln", 101150.0),
                                                   ("third_air", 101125.0),
                                                   ("ambient", 101325.0))
    segment_map: tuple[str, ...] = ("kiln", "third_air") + ("ambient",) * 8
    backflow_temperature_K: float = 298.15

    def pressure(self, name: str) -> float:
        return dict(self.external_Pa)[name]


@dataclass(frozen=True)
class Calibration:
    friction_scale: float = 100.0
    solid_emissivity: float = 0.9
    path_length_m: float | None = None        # None: half the cooler height
    prandtl_heat_capacity: str = "solid"      # "solid" or "gas"
    wsgg: dict | None = None                  # None: bundled coefficient table
    darcy_smoothing_Pa_m: float = 1.0


@dataclass(frozen=True)
class InitialState:
    solid_concentration: float = 10.0
    solid_composition: tuple[tuple[str, float], ...] | None = None   # mole fractions
    T_solid_K: float = 973.15
    T_gas_K: float = 1073.15
    pressure_Pa: float = 101325.0
    gas_composition: tuple[tuple[str, float], ...] | None = None     # mole fractions


@dataclass(frozen=True)
class OutputConfig:
    sample_interval_s: float = 60.0


@dataclass(frozen=True)
class Scenario:
    name: str = "grate cooler"
    geometry: Geometry = field(default_factory=Geometry)
    clinker: ClinkerInflow = field(default_factory=ClinkerInflow)
    fans: FanInflow = field(default_factory=FanInflow)
    pressures: PressureBoundary = field(default_factory=PressureBoundary)
    grate_speed_m_s: tuple[float, ...] = (0.017,) * 10
    calibration: Calibration = field(default_factory=Calibration)
    initial: InitialState = field(default_factory=InitialState)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    kinetics: tuple[tuple[str, tuple[tuple[str, object], ...]], ...] = ()
    species: tuple[tuple[str, tuple[tuple[str, object], ...]], ...] = ()

    def to_dict(self) -> dict:
        return _to_jsonable(self)

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def kinetics_overrides(self) -> dict:
        return {k: _thaw(dict(v)) for k, v in self.kinetics}

    def species_overrides(self) -> dict:
        return {k: _thaw(dict(v)) for k, v in self.species}


def _freeze(value):
    if isinstance(value, dict):
        return tuple((k, _freeze(v)) for k, v in value.items())
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _thaw(value):
    if isinstance(value, dict):
        return {k: _thaw(v) for k, v in value.items()}
    if isinstance(value, tuple):
        if value and all(isinstance(v, tuple) and len(v) == 2 and isinstance(v[0], str)
                         for v in value):
            return {k: _thaw(v) for k, v in value}
        return [_thaw(v) for v in value]
    return value


_PAIR_FIELDS = {"composition", "solid_composition", "gas_composition", "external_Pa"}


def _to_jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        out = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            if f.name in _PAIR_FIELDS and v is not None:
                out[f.name] = {k: x for k, x in v}
            elif f.name in ("kinetics", "species"):
                out[f.name] = {k: _thaw(dict(p)) for k, p in v}
            else:
                out[f.name] = _to_jsonable(v)
        return out
    if isinstance(obj, tuple):
        return [_to_jsonable(v) for v in obj]
    return obj


# loading ---------------------------------------------------------------------

_SECTIONS = {
    "geometry": Geometry,
    "clinker": ClinkerInflow,
    "fans": FanInflow,
    "pressures": PressureBoundary,
    "calibration": Calibration,
    "initial": InitialState,
    "integrator": IntegratorConfig,
    "output": OutputConfig,
}


def _build_section(cls, data, path, errors):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        errors.append((path, "expected an object"))
        return cls()
    names = {f.name for f in fields(cls)}
    for k in data:
        if k not in names:
            errors.append((f"{path}.{k}", "unknown field"))
    kw = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        if f.name in _PAIR_FIELDS and v is not None:
            if not isinstance(v, dict):
                errors.append((f"{path}.{f.name}", "expected a mapping"))
                continue
            v = tuple((k, float(x)) for k, x in v.items())
        elif f.name == "wsgg":
            v = v
        elif isinstance(v, list):
            v = tuple(v)
        kw[f.name] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        errors.append((path, str(exc)))
        return cls()


def scenario_from_dict(data: dict) -> Scenario:
    """Parse and validate a scenario mapping; raises :class:`ScenarioError`."""
    errors: list[tuple[str, str]] = []
    if not isinstance(data, dict):
        raise ScenarioError([("$", "scenario must be a JSON object")])
    known = set(_SECTIONS) | {"name", "grate_speed_m_s", "kinetics", "species"}
    for k in data:
        if k not in known and not k.startswith("_"):
            errors.append((k, "unknown field"))
    kw = {name: _build_section(cls, data.get(name), name, errors)
          for name, cls in _SECTIONS.items()}
    geom = kw["geometry"]
    n = geom.n_segments if isinstance(geom.n_segments, int) else 0
    fans = kw["fans"]
    if "fans" not in data or "mass_flow_kg_s" not in (data.get("fans") or {}):
        if n != 10:
            errors.append(("fans.mass_flow_kg_s", "required when n_segments differs from 10"))
    if isinstance(fans.mass_flow_kg_s, (int, float)):
        kw["fans"] = FanInflow(**{**asdict(fans), "mass_flow_kg_s": (float(fans.mass_flow_kg_s),) * n})
    pr = kw["pressures"]
    grate = data.get("grate_speed_m_s", 0.017)
    if isinstance(grate, (int, float)):
        grate = (float(grate),) * max(n, 1)
    else:
        grate = tuple(float(g) for g in grate)
    kin = data.get("kinetics") or {}
    spc = data.get("species") or {}
    sc = Scenario(name=str(data.get("name", "grate cooler")),
                  grate_speed_m_s=grate,
                  kinetics=tuple((str(k), _freeze(dict(v))) for k, v in kin.items()),
                  species=tuple((str(k), _freeze(dict(v))) for k, v in spc.items()),
                  **kw)
    errors.extend(validate(sc))
    if errors:
        raise ScenarioError(errors)
    return sc


def _check_composition(path, comp, allowed, errors):
    if comp is None:
        return
    total = 0.0
    for s, x in comp:
        if s not in allowed:
            errors.append((f"{path}.{s}", "unknown species for this phase"))
        if x < 0:
            errors.append((f"{path}.{s}", "negative fraction"))
        total += x
    if abs(total - 1.0) > 1e-9:
        errors.append((path, f"fractions sum to {total:.12g}, expected 1"))


def validate(sc: Scenario) -> list[tuple[str, str]]:
    """Return every violation as (field path, message); empty when valid."""
    e: list[tuple[str, str]] = []
    g = sc.geometry
    for name in ("length", "height", "width", "bed_layer_height", "particle_diameter",
                 "shape_factor"):
        if not getattr(g, name) > 0:
            e.append((f"geometry.{name}", "must be positive"))
    if not (isinstance(g.n_segments, int) and g.n_segments >= 1):
        e.append(("geometry.n_segments", "must be an integer >= 1"))
        return e
    if not (isinstance(g.n_layers, int) and g.n_layers >= 1):
        e.append(("geometry.n_layers", "must be an integer >= 1"))
        return e
    if g.n_layers > 1 and not g.bed_layer_height < g.height:
        e.append(("geometry.bed_layer_height", "must be below the cooler height"))
    if not (POROSITY_MIN <= g.porosity < 1.0):
        e.append(("geometry.porosity", f"must lie in [{POROSITY_MIN:.4f}, 1)"))
    if g.particle_diameter >= min(g.layer_heights):
        e.append(("geometry.particle_diameter", "must be smaller than every layer"))
    n = g.n_segments
    c = sc.clinker
    if not c.rate_t_per_h >= 0:
        e.append(("clinker.rate_t_per_h", "must be non-negative"))
    if c.basis not in ("mass", "mole"):
        e.append(("clinker.basis", "must be 'mass' or 'mole'"))
    if not c.temperature_K > 0:
        e.append(("clinker.temperature_K", "must be positive"))
    _check_composition("clinker.composition", c.composition, SOLIDS, e)
    f = sc.fans
    if len(f.mass_flow_kg_s) != n:
        e.append(("fans.mass_flow_kg_s", f"needs {n} entries"))
    if any(not m >= 0 for m in f.mass_flow_kg_s):
        e.append(("fans.mass_flow_kg_s", "flows must be non-negative"))
    if f.basis not in ("mass", "mole"):
        e.append(("fans.basis", "must be 'mass' or 'mole'"))
    if not f.temperature_K > 0:
        e.append(("fans.temperature_K", "must be positive"))
    _check_composition("fans.composition", f.composition, GASES, e)
    p = sc.pressures
    ids = dict(p.external_Pa)
    for k, v in ids.items():
        if not v > 0:
            e.append((f"pressures.external_Pa.{k}", "must be positive"))
    if len(p.segment_map) != n:
        e.append(("pressures.segment_map", f"needs {n} entries"))
    for i, k in enumerate(p.segment_map):
        if k not in ids:
            e.append((f"pressures.segment_map[{i}]", f"unknown pressure id {k!r}"))
    if len(sc.grate_speed_m_s) != n:
        e.append(("grate_speed_m_s", f"needs {n} entries"))
    if any(not v >= 0 for v in sc.grate_speed_m_s):
        e.append(("grate_speed_m_s", "must be non-negative"))
    cal = sc.calibration
    if not cal.friction_scale > 0:
        e.append(("calibration.friction_scale", "must be positive"))
    if not 0 <= cal.solid_emissivity <= 1:
        e.append(("calibration.solid_emissivity", "must lie in [0, 1]"))
    if cal.path_length_m is not None and not cal.path_length_m >= 0:
        e.append(("calibration.path_length_m", "must be non-negative"))
    if cal.prandtl_heat_capacity not in ("solid", "gas"):
        e.append(("calibration.prandtl_heat_capacity", "must be 'solid' or 'gas'"))
    ini = sc.initial
    if not ini.solid_concentration >= 0:
        e.append(("initial.solid_concentration", "must be non-negative"))
    for name in ("T_solid_K", "T_gas_K", "pressure_Pa"):
        if not getattr(ini, name) > 0:
            e.append((f"initial.{name}", "must be positive"))
    _check_composition("initial.solid_composition", ini.solid_composition, SOLIDS, e)
    _check_composition("initial.gas_composition", ini.gas_composition, GASES, e)
    it = sc.integrator
    try:
        it.check()
    except ValueError as exc:
        e.append(("integrator", str(exc)))
    if not sc.output.sample_interval_s > 0:
        e.append(("output.sample_interval_s", "must be positive"))
    ids_rx = {str(rx.id) for rx in DEFAULT_REACTIONS}
    for k, patch in sc.kinetics:
        if k not in ids_rx:
            e.append((f"kinetics.{k}", "unknown reaction id"))
            continue
        for pk, pv in patch:
            if pk not in ("k_r", "E_A", "orders", "basis"):
                e.append((f"kinetics.{k}.{pk}", "unknown field"))
    for k, _ in sc.species:
        if k not in SOLIDS and k not in GASES:
            e.append((f"species.{k}", "unknown species"))
    return e


def load_scenario(path) -> Scenario:
    """Read a scenario JSON file. Parse errors carry line and column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([(f"{path}:{exc.lineno}:{exc.colno}", exc.msg)]) from None
    return scenario_from_dict(data)


def dump_scenario(sc: Scenario, path=None) -> str:
    text = json.dumps(sc.to_dict(), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def bundled_scenario_path() -> Path:
    return Path(str(resources.files("clinkercooler.data").joinpath("reference_scenario.json")))


def reference_scenario(**changes) -> Scenario:
    """The bundled reference scenario, optionally with section overrides."""
    data = json.loads(bundled_scenario_path().read_text())
    data = copy.deepcopy(data)
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    return scenario_from_dict(data)
