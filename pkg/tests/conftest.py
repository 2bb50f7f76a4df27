import math

import pytest

from dtnafem.assembly import Solution, assemble, build_dof_map
from dtnafem.geometry import GeometrySpec, flat_profile, sawtooth_profile
from dtnafem.linsolve import solve
from dtnafem.mesh import build_initial_mesh, refine_uniform
from dtnafem.params import PhysicalParams, derive_modes


def example1_params(kappa=1.0):
    return PhysicalParams(omega=1.0, kappa=kappa, theta=math.pi / 6, rho_f=1.0, lam=1.0,
                          mu=1.0, rho=1.0, period=4.0)


def example2_params(kappa=1.0):
    return PhysicalParams(omega=1.0, kappa=kappa, theta=math.pi / 4, rho_f=1.0, lam=1.0,
                          mu=1.0, rho=1.0, period=4.0)


@pytest.fixture(scope="session")
def ex1_params():
    return example1_params()


@pytest.fixture(scope="session")
def ex1_geometry():
    return GeometrySpec.from_profile(flat_profile(4.0))


@pytest.fixture(scope="session")
def ex2_geometry():
    return GeometrySpec.from_profile(sawtooth_profile(4.0, 1, 0.5))


def solve_on(mesh, params, N=10, amplitude=1.0):
    modes = derive_modes(params, N)
    dofs = build_dof_map(mesh, params)
    system = assemble(mesh, params, modes, dofs, incident_amplitude=amplitude)
    x, report = solve(system)
    return Solution.from_vector(dofs, x, N), system, modes, report


@pytest.fixture(scope="session")
def ex1_solved(ex1_params, ex1_geometry):
    mesh = refine_uniform(build_initial_mesh(ex1_geometry, 0.5), 2)
    sol, system, modes, report = solve_on(mesh, ex1_params)
    return mesh, sol, system, modes, report


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
