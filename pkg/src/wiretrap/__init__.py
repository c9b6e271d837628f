"""Simulator for micro-fabricated wire traps that levitate diamagnetic nanospheres above a superconducting screen."""

from .core import CONST, ParticleSpec, diamond, mass_of
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    EscapeError,
    NoCrossingError,
    NumericalError,
    SingularityError,
    WireTrapError,
)
from .fieldsolver import BiasField, FieldModel, total_field
from .geometry import ChipLayout, RibbonSegment, SuperconductorSpec, make_u_trap, make_z_trap, preset_layout
from .potentials import PotentialModel, PotentialOptions

__version__ = "0.1.0"

__all__ = [
    "CONST", "ParticleSpec", "diamond", "mass_of",
    "ConfigError", "ConvergenceError", "DomainError", "EscapeError", "NoCrossingError", "NumericalError",
    "SingularityError", "WireTrapError",
    "BiasField", "FieldModel", "total_field",
    "ChipLayout", "RibbonSegment", "SuperconductorSpec", "make_u_trap", "make_z_trap", "preset_layout",
    "PotentialModel", "PotentialOptions",
]
