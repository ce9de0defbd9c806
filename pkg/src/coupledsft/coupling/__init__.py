"""Two-well coupled subshifts, their counter automata and induced operators."""

from .family import CoupledFamily, SequenceRule, six_symbol_family, toy_family
from .automaton import AutomatonSFT, build_sigma_m
from .induced import (
    InducedOperator,
    induced_operator,
    induced_spectral,
    return_split,
    pressure_by_induction,
    global_cylinder_mass,
)
from .limits import (
    ComponentData,
    component_data,
    lambda_factors,
    limit_constants,
    weakstar_distance,
)

__all__ = [
    "CoupledFamily",
    "SequenceRule",
    "six_symbol_family",
    "toy_family",
    "AutomatonSFT",
    "build_sigma_m",
    "InducedOperator",
    "induced_operator",
    "induced_spectral",
    "return_split",
    "pressure_by_induction",
    "global_cylinder_mass",
    "ComponentData",
    "component_data",
    "lambda_factors",
    "limit_constants",
    "weakstar_distance",
]
