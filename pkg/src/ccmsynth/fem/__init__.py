"""Large-deformation finite elements on polygonal cells."""

from .material import MaterialParams, cauchy_stress, first_piola, strain_energy
from .model import FEModel
from .mvc import mvc_batch, mvc_shape
from .quadrature import QuadratureRule, triangle_rule
from .solver import PointLoad, SolveState, Solver, SolverSettings

__all__ = [
    "FEModel",
    "MaterialParams",
    "PointLoad",
    "QuadratureRule",
    "SolveState",
    "Solver",
    "SolverSettings",
    "cauchy_stress",
    "first_piola",
    "mvc_batch",
    "mvc_shape",
    "strain_energy",
    "triangle_rule",
]
