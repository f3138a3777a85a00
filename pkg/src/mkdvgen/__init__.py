"""Exact generator and checker for the mKdV hierarchy of A_r^(1)."""

from .diffpoly import DiffPoly, NotExact, antiderivative, total_derivative, variational_derivative
from .loopalg import AlgebraCtx, LoopElement, bracket, generator_p, pairing
from .hierarchy import FlowSpec, compute_V, compute_dressing, equivalence_check, flow, prolong
from .conserved import hamiltonian_density, kdv_rewrite, miura, second_density

__version__ = "0.1.0"

__all__ = [
    "AlgebraCtx",
    "DiffPoly",
    "FlowSpec",
    "LoopElement",
    "NotExact",
    "antiderivative",
    "bracket",
    "compute_V",
    "compute_dressing",
    "equivalence_check",
    "flow",
    "generator_p",
    "hamiltonian_density",
    "kdv_rewrite",
    "miura",
    "pairing",
    "prolong",
    "second_density",
    "total_derivative",
    "variational_derivative",
]
