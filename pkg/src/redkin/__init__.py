"""Perturbative master equations for open quantum systems in the kinetic regime.

The package builds the second- and fourth-order generators of reduced
dynamics from system coupling operators and bath correlation functions,
propagates the resulting master equations, and checks them against exact
reference solutions.
"""
from .correlations import CorrelationMatrix, ExpSum, lorentzian_correlation, wick_moment
from .dynamics import propagate, slipped_initial_state, steady_state
from .engine import PerturbationEngine, assemble_generator
from .expoly import DivergenceError
from .generators import (
    fourth_order_fast,
    gkls_generator,
    redfield_fast,
    redfield_generator,
    secular_gkls,
    total_generator,
)
from .kernels import BACKEND
from .model import OpenSystem, damped_qubit_model, pure_dephasing_model, spin_boson_model
from .operators import ValidationError

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CorrelationMatrix",
    "DivergenceError",
    "ExpSum",
    "OpenSystem",
    "PerturbationEngine",
    "ValidationError",
    "assemble_generator",
    "damped_qubit_model",
    "fourth_order_fast",
    "gkls_generator",
    "lorentzian_correlation",
    "propagate",
    "pure_dephasing_model",
    "redfield_fast",
    "redfield_generator",
    "secular_gkls",
    "slipped_initial_state",
    "spin_boson_model",
    "steady_state",
    "total_generator",
    "wick_moment",
]
