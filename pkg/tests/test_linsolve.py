import numpy as np
import pytest
import scipy.sparse as sp
from numpy.testing import assert_allclose

from dtnafem.assembly import LinearSystem
from dtnafem.errors import SingularMatrix
from dtnafem.linsolve import RESIDUAL_TOL, relative_residual, solve
from dtnafem.mesh import build_initial_mesh, refine_uniform

from conftest import solve_on


def dense_system(A, b):
    return LinearSystem(None, sp.csr_matrix(np.asarray(A, dtype=complex)), (),
                        np.asarray(b, dtype=complex), 0)


def test_hermitian_two_by_two():
    x, report = solve(dense_system([[2, 1j], [-1j, 2]], [1, 0]))
    assert_allclose(x, [2 / 3, 1j / 3], rtol=1e-14)
    assert report.residual_norm <= RESIDUAL_TOL
    assert report.warning is None
    assert report.factor_nonzeros > 0


def test_singular_matrix():
    with pytest.raises(SingularMatrix):
        solve(dense_system([[1, 1], [1, 1]], [1, 0]))


def test_relative_residual_zero_rhs():
    s = dense_system([[1, 0], [0, 1]], [0, 0])
    assert relative_residual(s, np.zeros(2)) == 0.0


def test_random_sparse_complex():
    rng = np.random.default_rng(3)
    n = 200
    A = sp.random(n, n, density=0.03, random_state=4, dtype=float) * (1 + 0.5j) + 10 * sp.eye(n)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    x, report = solve(LinearSystem(None, A.tocsr(), (), b, 0))
    assert_allclose(A @ x, b, atol=1e-12)
    assert report.residual_norm <= RESIDUAL_TOL


def test_system_with_dtn_matches_explicit(ex1_solved):
    _, sol, system, _, _ = ex1_solved
    A = system.matrix()
    assert_allclose(A @ sol.x, system.matvec(sol.x), rtol=1e-12, atol=1e-13)


def test_identity():
    x, report = solve(dense_system(np.eye(3), [1, 0, 0]))
    assert_allclose(x, [1, 0, 0])
    assert report.residual_norm == 0


def test_round_trip_and_determinism(ex1_solved):
    _, _, system, _, _ = ex1_solved
    y = np.array([1, 1j]) @ np.random.default_rng(11).normal(size=(2, system.dimension))
    probe = LinearSystem(system.dofs, system.local, system.lowrank, system.matvec(y),
                         system.n_modes)
    x1, _ = solve(probe)
    x2, _ = solve(probe)
    assert np.linalg.norm(x1 - y) <= 1e-9 * np.linalg.norm(y)
    assert np.array_equal(x1, x2)


def test_example1_fine_mesh_residual(ex1_params, ex1_geometry):
    mesh = refine_uniform(build_initial_mesh(ex1_geometry, 0.5), 4)
    assert mesh.diameters.max() <= 0.11
    _, _, _, report = solve_on(mesh, ex1_params, N=12)
    assert report.residual_norm <= RESIDUAL_TOL
