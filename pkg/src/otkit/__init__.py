"""Discrete optimal transport: exact plans, potentials, Wasserstein distances,
geodesics, minimal flows and 1D Monge-Ampere checks."""

__version__ = "0.1.0"

from .costs import CostSpec, c_transform, cost_matrix
from .errors import ValidationError
from .measures import DiscreteMeasure, dirac, new_discrete
from .solver import TransportPlan, extract_duals, solve_bottleneck, solve_primal, verify_optimality
from .wasserstein import wasserstein, wasserstein_inf, wasserstein_p

__all__ = [
    "CostSpec",
    "DiscreteMeasure",
    "TransportPlan",
    "ValidationError",
    "c_transform",
    "cost_matrix",
    "dirac",
    "extract_duals",
    "new_discrete",
    "solve_bottleneck",
    "solve_primal",
    "verify_optimality",
    "wasserstein",
    "wasserstein_inf",
    "wasserstein_p",
]
