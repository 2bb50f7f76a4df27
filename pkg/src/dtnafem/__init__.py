"""Adaptive DtN finite elements for acoustic-elastic scattering by periodic gratings.

The main entry points are :class:`PhysicalParams` and :class:`GeometrySpec`
for the problem definition, :func:`run_adaptive` / :func:`run_uniform` for
the refinement loops, and :func:`exact_flat` for the flat-interface
reference solution.
"""
from .adapt import AdaptConfig, ConvergenceRecord, mark, run_adaptive, run_uniform
from .assembly import Solution, apply_dtn_truncated, assemble, build_dof_map
from .estimator import ErrorIndicators, indicators
from .geometry import GeometrySpec, example4_profile, flat_profile, sawtooth_profile
from .linsolve import solve
from .mesh import Mesh, build_initial_mesh, refine, refine_uniform
from .oracle import ExactFlatSolution, coupled_h1_error, exact_flat
from .params import (ModeTable, PhysicalParams, derive_modes, select_truncation,
                     theta_bound)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "ConvergenceRecord", "ErrorIndicators", "ExactFlatSolution", "GeometrySpec",
    "Mesh", "ModeTable", "PhysicalParams", "Solution", "apply_dtn_truncated", "assemble",
    "build_dof_map", "build_initial_mesh", "coupled_h1_error", "derive_modes", "exact_flat",
    "example4_profile", "flat_profile", "indicators", "mark", "refine", "refine_uniform",
    "run_adaptive", "run_uniform", "sawtooth_profile", "select_truncation", "solve",
    "theta_bound",
]
