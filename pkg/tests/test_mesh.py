import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dtnafem.errors import InvalidGeometry, ProfileTooSteep
from dtnafem.geometry import (FlatProfile, GeometrySpec, PiecewiseLinearProfile, TrigProfile,
                              example4_profile, flat_profile, sawtooth_profile)
from dtnafem.mesh import (BOTTOM, FLUID, INTERFACE, PERIODIC_LEFT, PERIODIC_RIGHT, TOP, Mesh,
                          build_initial_mesh, check_mesh, classify_edges, read_mesh, refine,
                          refine_uniform, write_mesh)


def unit_square_mesh():
    """Two fluid triangles on [0,1] x [-0.5, 0.5] sharing the diagonal as refinement edge."""
    geom = GeometrySpec(1.0, 0.5, -0.4, FlatProfile(1.0, -0.45))
    verts = np.array([[0.0, -0.5], [1.0, -0.5], [1.0, 0.5], [0.0, 0.5]])
    tris = np.array([[1, 2, 0], [3, 0, 2]])
    return classify_edges(Mesh(geom, verts, tris, np.array([FLUID, FLUID]), np.zeros(2, int)))


def euler_ok(mesh):
    return mesh.n_vertices - len(mesh.edges) + mesh.n_triangles == 1


class TestGeometry:
    def test_degenerate_b(self):
        with pytest.raises(InvalidGeometry):
            GeometrySpec(4.0, 0.5, 0.5, sawtooth_profile(4.0, 1, 0.5))

    def test_b_prime_below_max(self):
        with pytest.raises(InvalidGeometry):
            GeometrySpec(4.0, 1.0, 0.2, sawtooth_profile(4.0, 1, 0.5))

    def test_empty_solid(self):
        with pytest.raises(InvalidGeometry):
            GeometrySpec(4.0, 1.0, 0.0, FlatProfile(4.0, -1.0))

    def test_from_profile_margin(self):
        g = GeometrySpec.from_profile(example4_profile())
        assert_allclose(g.gap, 0.5)
        assert_allclose(g.b_prime, example4_profile().max_value(), rtol=1e-12)

    def test_polyline_periodicity_required(self):
        with pytest.raises(InvalidGeometry):
            PiecewiseLinearProfile(((0.0, 0.0), (1.0, 0.3), (2.0, 0.1)))

    def test_trig_values(self):
        f = example4_profile()
        x = np.linspace(0, 2 * math.pi, 11)
        assert_allclose(f(x), 0.1 + 0.15 * np.sin(x) + 0.35 * np.cos(5 * x))
        assert isinstance(f, TrigProfile)

    def test_sawtooth_corners(self):
        f = sawtooth_profile(5.0, 3, 0.5)
        assert_allclose(f.corners, [0.0, 5 / 6, 5 / 3, 2.5, 10 / 3, 25 / 6])


class TestInitialMesh:
    def test_flat_pairing(self):
        g = GeometrySpec(4.0, 1.0, 0.0, flat_profile(4.0))
        m = build_initial_mesh(g, 1.0)
        check_mesh(m)
        left = np.flatnonzero(m.vertices[:, 0] == 0.0)
        right = np.flatnonzero(m.vertices[:, 0] == 4.0)
        assert len(m.periodic_pairs) == len(left) == len(right)
        assert_array_equal(np.sort(m.periodic_pairs[:, 0]), np.sort(left))
        assert_array_equal(m.vertices[m.periodic_pairs[:, 0], 1], m.vertices[m.periodic_pairs[:, 1], 1])
        assert m.side_lengths.max() <= 1.0

    def test_example4_interface_on_profile(self):
        g = GeometrySpec.from_profile(example4_profile())
        m = build_initial_mesh(g, 0.5)
        x = m.vertices[m.interface_vertices]
        ref = 0.1 + 0.15 * np.sin(x[:, 0]) + 0.35 * np.cos(5 * x[:, 0])
        assert np.max(np.abs(x[:, 1] - ref)) <= 1e-12
        check_mesh(m)

    def test_interface_is_union_of_edges(self, ex2_geometry):
        m = build_initial_mesh(ex2_geometry, 0.5)
        itf = m.edges.of_kind(INTERFACE)
        length = np.sum(np.linalg.norm(np.diff(m.vertices[m.edges.vertices[itf]], axis=1)[:, 0], axis=1))
        assert_allclose(length, 2 * math.hypot(2.0, 0.5), rtol=1e-12)

    def test_too_steep(self):
        g = GeometrySpec.from_profile(sawtooth_profile(1.0, 1, 5.0))
        with pytest.raises(ProfileTooSteep):
            build_initial_mesh(g, 0.5)

    def test_bad_h(self, ex1_geometry):
        with pytest.raises(InvalidGeometry):
            build_initial_mesh(ex1_geometry, 0.0)

    @pytest.mark.parametrize("h", [1.0, 0.5, 0.3])
    def test_max_edge(self, ex2_geometry, h):
        assert build_initial_mesh(ex2_geometry, h).side_lengths.max() <= h * (1 + 1e-12)


class TestClassify:
    def test_kinds(self, ex1_geometry):
        m = build_initial_mesh(ex1_geometry, 0.5)
        E = m.edges
        p = m.vertices[E.vertices]
        assert np.all(p[E.kind == TOP][:, :, 1] == ex1_geometry.b)
        assert np.all(p[E.kind == BOTTOM][:, :, 1] == -ex1_geometry.b)
        itf = E.kind == INTERFACE
        assert np.all(np.sort(m.region[E.triangles[itf]], axis=1) == [0, 1])
        left = E.of_kind(PERIODIC_LEFT)
        assert np.all(E.kind[E.partner[left]] == PERIODIC_RIGHT)
        assert_array_equal(E.partner[E.partner[left]], left)

    def test_idempotent(self, ex2_geometry):
        m = build_initial_mesh(ex2_geometry, 0.5)
        m2 = classify_edges(m)
        assert_array_equal(m.edges.vertices, m2.edges.vertices)
        assert_array_equal(m.edges.kind, m2.edges.kind)
        assert_array_equal(m.edges.partner, m2.edges.partner)


class TestRefine:
    def test_two_triangle_square(self):
        m = refine(unit_square_mesh(), [0])
        assert m.n_triangles == 4
        assert euler_ok(m)

    def test_periodic_co_refinement(self, ex1_geometry):
        m = build_initial_mesh(ex1_geometry, 0.5)
        E = m.edges
        left_edge = E.of_kind(PERIODIC_LEFT)[0]
        t = E.triangles[left_edge, 0]
        # force the periodic edge to be split by marking until it is bisected
        before = len(m.periodic_pairs)
        m2 = m
        while len(m2.periodic_pairs) == before:
            touching = np.flatnonzero(np.any(m2.vertices[m2.triangles][:, :, 0] == 0.0, axis=1))
            m2 = refine(m2, touching[:1])
        pairs = m2.periodic_pairs
        assert len(pairs) > before
        assert len(np.unique(pairs[:, 0])) == len(pairs) == len(np.unique(pairs[:, 1]))
        assert np.all(m2.vertices[pairs[:, 0], 0] == 0.0)
        assert np.all(m2.vertices[pairs[:, 1], 0] == 4.0)
        assert_array_equal(m2.vertices[pairs[:, 0], 1], m2.vertices[pairs[:, 1], 1])
        check_mesh(m2)
        assert t >= 0

    def test_uniform_min_angle_stable(self, ex1_geometry):
        m = build_initial_mesh(ex1_geometry, 0.5)
        a0 = m.angles().min()
        for _ in range(5):
            nv = m.n_vertices
            nt = m.n_triangles
            m = refine(m, range(m.n_triangles))
            assert m.n_vertices > nv and m.n_triangles >= 2 * nt
            assert m.angles().min() >= a0 - 1e-12
            check_mesh(m)

    @pytest.mark.parametrize("profile", [sawtooth_profile(4.0, 1, 0.5), sawtooth_profile(5.0, 3, 0.5)])
    def test_uniform_min_angle_bisection_bound(self, profile):
        # sheared column cells: descendants stay within a factor 2 of the initial
        # min angle and settle into finitely many similarity classes
        m = build_initial_mesh(GeometrySpec.from_profile(profile), 0.5)
        a0 = m.angles().min()
        history = []
        for _ in range(5):
            m = refine(m, range(m.n_triangles))
            history.append(m.angles().min())
            check_mesh(m)
        assert min(history) >= 0.5 * a0
        assert_allclose(history[1:], history[0], rtol=1e-12)

    def test_existing_vertices_fixed(self):
        g = GeometrySpec.from_profile(example4_profile())
        m = build_initial_mesh(g, 0.6)
        rng = np.random.default_rng(3)
        for _ in range(3):
            marked = rng.choice(m.n_triangles, size=m.n_triangles // 5, replace=False)
            m2 = refine(m, marked)
            assert_array_equal(m2.vertices[: m.n_vertices], m.vertices)
            check_mesh(m2)
            assert euler_ok(m2)
            m = m2

    def test_area_partition_after_random_refinement(self, ex2_geometry):
        m = build_initial_mesh(ex2_geometry, 0.5)
        rng = np.random.default_rng(0)
        for _ in range(4):
            m = refine(m, rng.choice(m.n_triangles, size=7, replace=False))
        assert_allclose(m.areas.sum(), 2 * ex2_geometry.b * 4.0, rtol=1e-10)
        boundary = np.isin(m.edges.kind, (TOP, BOTTOM, PERIODIC_LEFT, PERIODIC_RIGHT))
        assert np.all((m.edges.triangles[:, 1] < 0) == boundary)

    def test_empty_marking(self, ex1_geometry):
        with pytest.raises(ValueError):
            refine(build_initial_mesh(ex1_geometry, 0.5), [])


def test_mesh_io_roundtrip(tmp_path, ex2_geometry):
    m = refine(build_initial_mesh(ex2_geometry, 0.5), [0, 5, 9])
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    assert path.read_text().splitlines()[0] == f"vertices {m.n_vertices} / triangles {m.n_triangles}"
    back = read_mesh(path, ex2_geometry)
    assert_array_equal(back.vertices, m.vertices)
    assert_array_equal(back.triangles, m.triangles)
    assert_array_equal(back.region, m.region)
    assert_array_equal(back.edges.kind, m.edges.kind)


def test_uniform_growth(ex1_geometry):
    m = build_initial_mesh(ex1_geometry, 0.5)
    m2 = refine_uniform(m, 2)
    assert 3 <= m2.n_triangles / m.n_triangles <= 4.5
