"""Dynamic simulation of a grate belt clinker cooler as an index-1 DAE."""
from .model import CoolerModel, FluxField
from .scenario import Scenario, load_scenario, reference_scenario, validate
from .solver import IntegratorConfig, Trajectory, find_steady_state, integrate

__all__ = ["CoolerModel", "FluxField", "Scenario", "load_scenario", "reference_scenario",
           "validate", "IntegratorConfig", "Trajectory", "find_steady_state", "integrate"]
__version__ = "0.1.0"
