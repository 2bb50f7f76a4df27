"""Solve-estimate-mark-refine loop and its uniform-refinement baseline."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import Solution, assemble, build_dof_map, dof_count
from .errors import ValidationError
from .estimator import ErrorIndicators, indicators
from .geometry import GeometrySpec
from .linsolve import solve
from .mesh import Mesh, build_initial_mesh, refine, refine_uniform
from .oracle import ExactFlatSolution, coupled_h1_error
from .params import PhysicalParams, derive_modes, incident_trace_norms, select_truncation

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
UNIFORM_ROUNDS = 2  # bisection sweeps per uniform step (about 4x triangles)


@dataclass(frozen=True)
class AdaptConfig:
    tolerance: float = 1e-3
    tau: float = 0.5
    max_iterations: int = 40
    max_dof: int = 40_000
    dtn_tol: float = 1e-8
    initial_h: float = 0.5

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ValidationError(f"tau must lie in (0, 1), got {self.tau}")
        for name in ("tolerance", "dtn_tol", "initial_h"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("max_iterations", "max_dof"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    dof: int
    N: int
    eps_h: float
    eps_N: float
    e_h: Optional[float]
    wall_time: float
    triangles: int
    residual: float


@dataclass
class ConvergenceRecord:
    mode: str
    N: int
    iterations: list = field(default_factory=list)
    status: str = BUDGET_EXHAUSTED

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.iterations], dtype=float)

    def __len__(self):
        return len(self.iterations)


def mark(ind: ErrorIndicators | np.ndarray, tau: float) -> np.ndarray:
    """Sorted ids of triangles with eta > tau * max eta (strict)."""
    eta = np.asarray(getattr(ind, "eta_per_triangle", ind), dtype=float)
    if eta.size == 0:
        return np.zeros(0, dtype=np.int64)
    top = eta.max()
    if top <= 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(eta > tau * top)


def choose_truncation(geometry: GeometrySpec, params: PhysicalParams, mesh: Mesh,
                      dtn_tol: float, incident_amplitude: complex = 1.0):
    """Truncation order from the incident trace norms on the initial interface."""
    norm = abs(incident_amplitude) * incident_trace_norms(params, mesh.interface_polyline())
    if norm == 0:
        return 0, 0.0
    return select_truncation(params, geometry.gap, norm, dtn_tol), norm


def _loop(geometry, params, config, mode, exact, on_iteration, incident_amplitude):
    mesh = build_initial_mesh(geometry, config.initial_h)
    N, inc_norm = choose_truncation(geometry, params, mesh, config.dtn_tol, incident_amplitude)
    modes = derive_modes(params, N)
    record = ConvergenceRecord(mode, N)
    it = 0
    while True:
        t0 = time.perf_counter()
        dofs = build_dof_map(mesh, params)
        system = assemble(mesh, params, modes, dofs, incident_amplitude=incident_amplitude)
        x, report = solve(system)
        sol = Solution.from_vector(dofs, x, N)
        ind = indicators(mesh, sol, modes, params, inc_norm, incident_amplitude)
        e_h = coupled_h1_error(sol, exact, params) if exact is not None else None
        if mode == "adaptive":
            marked = mark(ind, config.tau)
        else:
            marked = np.arange(mesh.n_triangles)
        record.iterations.append(IterationRecord(
            it, dofs.total_unknowns, N, ind.eps_h, ind.eps_N, e_h,
            time.perf_counter() - t0, mesh.n_triangles, report.residual_norm))
        if on_iteration is not None:
            on_iteration(it, mesh, sol, ind, marked)
        if ind.eps_h <= config.tolerance or len(marked) == 0:
            record.status = CONVERGED
            break
        if it + 1 >= config.max_iterations:
            break
        new = refine(mesh, marked) if mode == "adaptive" else refine_uniform(mesh, UNIFORM_ROUNDS)
        if dof_count(new) > config.max_dof:
            break
        mesh = new
        it += 1
    return sol, record


def run_adaptive(geometry: GeometrySpec, params: PhysicalParams, config: AdaptConfig,
                 exact: ExactFlatSolution | None = None,
                 on_iteration: Callable | None = None,
                 incident_amplitude: complex = 1.0):
    """Adaptive loop with maximum marking; returns (final Solution, ConvergenceRecord).

    The loop stops once eps_h <= tolerance, or when the iteration budget is
    used up, or before solving on a mesh exceeding ``max_dof``.
    ``on_iteration(it, mesh, solution, indicators, marked)`` is called after
    every estimate.
    """
    return _loop(geometry, params, config, "adaptive", exact, on_iteration, incident_amplitude)


def run_uniform(geometry: GeometrySpec, params: PhysicalParams, config: AdaptConfig,
                exact: ExactFlatSolution | None = None,
                on_iteration: Callable | None = None,
                incident_amplitude: complex = 1.0):
    """Same pipeline with every triangle refined (two bisection sweeps) per step."""
    return _loop(geometry, params, config, "uniform", exact, on_iteration, incident_amplitude)


def loglog_slope(dof, values) -> float:
    """Least-squares slope of log(values) against log(dof)."""
    return float(np.polyfit(np.log(np.asarray(dof, float)), np.log(np.asarray(values, float)), 1)[0])


