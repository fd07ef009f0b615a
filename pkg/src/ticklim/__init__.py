"""Numerical tools for the sharpness limits of finite-dimensional tick generators."""

from .bound_pipeline import BoundReport, verify_chain, qubits_needed, explicit_bound_rhs
from .clock_zoo import FAMILIES, ladder_clock, poisson_clock, quasi_ideal_clock
from .generator import (
    GeneratorModel,
    QuantumInstrument,
    SharpnessStats,
    TickPdf,
    sharpness,
    singletonize,
    waiting_pdf,
)
from .infotheory import holevo_information, max_entropy_bound, von_neumann_entropy

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "FAMILIES",
    "GeneratorModel",
    "QuantumInstrument",
    "SharpnessStats",
    "TickPdf",
    "explicit_bound_rhs",
    "holevo_information",
    "ladder_clock",
    "max_entropy_bound",
    "poisson_clock",
    "qubits_needed",
    "quasi_ideal_clock",
    "sharpness",
    "singletonize",
    "verify_chain",
    "von_neumann_entropy",
    "waiting_pdf",
]
