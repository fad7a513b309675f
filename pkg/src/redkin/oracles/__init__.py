"""Independent reference solutions used to validate the perturbative generators."""
from .dephasing import dephasing_exact, dephasing_exponent, dephasing_rate
from .finite_bath import FiniteBathResult, FiniteBathSpec, discretize_bath, finite_bath_evolve
from .memory import damped_qubit_closed_form, damped_qubit_exact_rates, damped_qubit_memory, memory_poles

__all__ = [
    "dephasing_exact",
    "dephasing_exponent",
    "dephasing_rate",
    "FiniteBathSpec",
    "FiniteBathResult",
    "discretize_bath",
    "finite_bath_evolve",
    "damped_qubit_closed_form",
    "damped_qubit_exact_rates",
    "damped_qubit_memory",
    "memory_poles",
]
