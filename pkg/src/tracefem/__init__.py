"""Trace finite element solver for surface Cahn-Hilliard and
Navier-Stokes-Cahn-Hilliard flows on implicitly defined surfaces."""
from .ch import CHState, CHSystem, PotentialParams, TimeStepController, ch_step
from .config import ConfigError, SimulationConfig, load_config, make_config, parse_config
from .fespace import TraceSpaces, build_spaces
from .levelset import asymmetric_torus, unit_sphere
from .nsch import MixtureParams, NSCHState, NSCHSystem
from .simulation import Simulation, run

__all__ = [
    "CHState", "CHSystem", "PotentialParams", "TimeStepController", "ch_step",
    "ConfigError", "SimulationConfig", "load_config", "make_config", "parse_config",
    "TraceSpaces", "build_spaces", "asymmetric_torus", "unit_sphere",
    "MixtureParams", "NSCHState", "NSCHSystem", "Simulation", "run",
]
__version__ = "0.1.0"
