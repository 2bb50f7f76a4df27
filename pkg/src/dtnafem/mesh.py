"""Conforming triangulations of the periodic cell and their refinement.

Triangles are stored as ``(v0, v1, v2)`` in counter-clockwise order with
``v0`` the newest vertex; the refinement edge is ``(v1, v2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidGeometry, ProfileTooSteep, UnclassifiableEdge
from .geometry import GeometrySpec

FLUID = 0
SOLID = 1
REGION_NAMES = ("fluid", "solid")

INTERIOR_FLUID = 0
INTERIOR_SOLID = 1
INTERFACE = 2
TOP = 3
BOTTOM = 4
PERIODIC_LEFT = 5
PERIODIC_RIGHT = 6
EDGE_KINDS = ("interior_fluid", "interior_solid", "interface", "top", "bottom",
              "periodic_left", "periodic_right")

AREA_GUARD = 1e-14
COORD_TOL = 1e-12
MIN_ANGLE_DEG = 3.0
SAG_FRACTION = 0.25
MAX_INITIAL_VERTICES = 100_000


@dataclass(frozen=True, eq=False)
class EdgeTable:
    """Edge connectivity; ``tri_edges[t, i]`` is the edge opposite local vertex i."""

    vertices: np.ndarray   # (E, 2), sorted vertex pairs
    kind: np.ndarray       # (E,)
    triangles: np.ndarray  # (E, 2), -1 where absent
    partner: np.ndarray    # (E,), periodic partner edge or -1
    tri_edges: np.ndarray  # (T, 3)

    def __len__(self):
        return len(self.kind)

    def of_kind(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.kind == kind)


@dataclass(frozen=True, eq=False)
class Mesh:
    geometry: GeometrySpec
    vertices: np.ndarray    # (V, 2)
    triangles: np.ndarray   # (T, 3)
    region: np.ndarray      # (T,) FLUID / SOLID
    generation: np.ndarray  # (T,)
    edges: EdgeTable | None = None
    periodic_pairs: np.ndarray | None = None  # (P, 2) left/right vertex ids

    def __post_init__(self):
        for name in ("vertices", "triangles", "region", "generation"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def side_lengths(self) -> np.ndarray:
        """(T, 3) length of the side opposite each local vertex."""
        p = self.vertices[self.triangles]
        return np.stack([np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                         np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
                         np.linalg.norm(p[:, 1] - p[:, 0], axis=1)], axis=1)

    @property
    def diameters(self) -> np.ndarray:
        return self.side_lengths.max(axis=1)

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def angles(self) -> np.ndarray:
        """(T, 3) interior angles in radians."""
        L = self.side_lengths
        out = np.empty_like(L)
        for i in range(3):
            a, b, c = L[:, i], L[:, (i + 1) % 3], L[:, (i + 2) % 3]
            cos = np.clip((b**2 + c**2 - a**2) / (2 * b * c), -1.0, 1.0)
            out[:, i] = np.arccos(cos)
        return out

    def region_vertices(self, region: int) -> np.ndarray:
        return np.unique(self.triangles[self.region == region])

    @cached_property
    def interface_vertices(self) -> np.ndarray:
        """Vertices shared by both regions, ordered by x1."""
        shared = np.intersect1d(self.region_vertices(FLUID), self.region_vertices(SOLID))
        return shared[np.argsort(self.vertices[shared, 0], kind="stable")]

    def interface_polyline(self) -> np.ndarray:
        return np.array(self.vertices[self.interface_vertices])

    def boundary_vertices(self, boundary: str) -> np.ndarray:
        """Vertices on the top (x2 = b) or bottom (x2 = -b) line, ordered by x1."""
        y = self.geometry.b if boundary == "top" else -self.geometry.b
        if boundary not in ("top", "bottom"):
            raise ValueError(f"unknown boundary {boundary!r}")
        ids = np.flatnonzero(np.abs(self.vertices[:, 1] - y) <= COORD_TOL * max(1.0, abs(y)))
        return ids[np.argsort(self.vertices[ids, 0], kind="stable")]


def _orient_longest_first(verts, tris):
    """Rotate each triangle so its longest side is the refinement edge."""
    p = verts[tris]
    L = np.stack([np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                  np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
                  np.linalg.norm(p[:, 1] - p[:, 0], axis=1)], axis=1)
    k = np.argmax(L, axis=1)
    idx = (k[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(tris, idx, axis=1)


def _column_abscissae(period, kinks, spacing, curvature=0.0):
    if curvature > 0:
        # keep the sag of bisected interface edges well below the layer height
        spacing = min(spacing, math.sqrt(SAG_FRACTION * spacing / curvature))
    nx = max(1, math.ceil(period / spacing - 1e-12))
    dx = period / nx
    xs = list(np.linspace(0.0, period, nx + 1))
    for xk in kinks:
        if 0.0 < xk < period and not any(abs(x - xk) <= 1e-12 * period for x in xs):
            xs = [x for x in xs if x in (0.0, period) or abs(x - xk) > 0.3 * dx]
            xs.append(float(xk))
    xs = np.array(sorted(set(xs)))
    xs[0], xs[-1] = 0.0, period
    return xs


def _structured(geometry: GeometrySpec, spacing: float):
    prof = geometry.profile
    b = geometry.b
    xs = _column_abscissae(geometry.period, prof.kinks, spacing, prof.curvature_bound())
    f = np.asarray(prof(xs), dtype=float)
    f[-1] = f[0]
    m_s = max(1, math.ceil(float(np.max(f + b)) / spacing - 1e-12))
    m_a = max(1, math.ceil(float(np.max(b - f)) / spacing - 1e-12))
    m = m_s + m_a
    nc = len(xs)
    verts = np.empty((nc, m + 1, 2))
    verts[:, :, 0] = xs[:, None]
    ks = np.arange(m_s + 1) / m_s
    verts[:, : m_s + 1, 1] = -b + (f[:, None] + b) * ks[None, :]
    ka = np.arange(1, m_a + 1) / m_a
    verts[:, m_s + 1:, 1] = f[:, None] + (b - f[:, None]) * ka[None, :]
    verts[:, 0, 1] = -b
    verts[:, m_s, 1] = f
    verts[:, m, 1] = b
    verts = verts.reshape(-1, 2)

    def vid(j, k):
        return j * (m + 1) + k

    tris = []
    region = []
    for j in range(nc - 1):
        for k in range(m):
            v00, v10, v11, v01 = vid(j, k), vid(j + 1, k), vid(j + 1, k + 1), vid(j, k + 1)
            d1 = np.linalg.norm(verts[v11] - verts[v00])
            d2 = np.linalg.norm(verts[v01] - verts[v10])
            if d1 <= d2 * (1 + 1e-12):
                tris += [(v00, v10, v11), (v00, v11, v01)]
            else:
                tris += [(v00, v10, v01), (v10, v11, v01)]
            region += [SOLID if k < m_s else FLUID] * 2
    tris = _orient_longest_first(verts, np.array(tris, dtype=np.int64))
    return verts, tris, np.array(region, dtype=np.int8)


def build_initial_mesh(geometry: GeometrySpec, target_h: float) -> Mesh:
    """Structured conforming mesh of the cell with the interface resolved by edges."""
    if not target_h > 0:
        raise InvalidGeometry("target_h must be positive")
    slope = geometry.profile.lipschitz()
    # interface edges of a column mesh are about sqrt(1 + slope^2) times the spacing
    spacing = target_h / max(math.sqrt(2.0), math.hypot(1.0, slope))
    projected = (geometry.period / spacing + 1) * (2 * geometry.b / spacing + 1)
    if projected > MAX_INITIAL_VERTICES:
        raise ProfileTooSteep(f"profile slope {slope:.3g} needs about {projected:.3g} vertices "
                              f"at target_h={target_h}")
    min_area = AREA_GUARD * geometry.period**2
    for _ in range(200):
        verts, tris, region = _structured(geometry, spacing)
        mesh = Mesh(geometry, verts, tris, region, np.zeros(len(tris), np.int32))
        if mesh.side_lengths.max() <= target_h * (1 + 1e-12):
            if np.any(mesh.signed_areas <= min_area) or \
                    np.degrees(mesh.angles().min()) < MIN_ANGLE_DEG:
                raise ProfileTooSteep(f"profile slope {slope:.3g} too steep for target_h={target_h}")
            return classify_edges(mesh)
        spacing *= 0.9
    raise InvalidGeometry("could not meet target_h")  # pragma: no cover


def _pair_by_height(verts, left, right, what):
    left = left[np.argsort(verts[left, 1], kind="stable")]
    right = right[np.argsort(verts[right, 1], kind="stable")]
    if len(left) != len(right) or np.any(
            np.abs(verts[left, 1] - verts[right, 1]) > COORD_TOL):
        raise UnclassifiableEdge(f"periodic {what} on x1=0 and x1=period do not match")
    return left, right


def classify_edges(mesh: Mesh) -> Mesh:
    """Return ``mesh`` with its edge table and periodic vertex pairing rebuilt."""
    tris = mesh.triangles
    T = len(tris)
    local = np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]])
    local = np.sort(local, axis=1)
    ev, inv = np.unique(local, axis=0, return_inverse=True)
    inv = inv.ravel()
    tri_edges = inv.reshape(3, T).T.copy()
    counts = np.bincount(inv, minlength=len(ev))
    if np.any(counts > 2):
        raise UnclassifiableEdge("an edge is shared by more than two triangles")
    owner = np.tile(np.arange(T), 3)
    order = np.argsort(inv, kind="stable")
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    etri = np.full((len(ev), 2), -1, dtype=np.int64)
    etri[:, 0] = owner[order[start]]
    two = counts == 2
    etri[two, 1] = owner[order[start[two] + 1]]

    g = mesh.geometry
    verts = mesh.vertices
    p = verts[ev]
    kind = np.full(len(ev), -1, dtype=np.int8)
    reg = mesh.region
    r0 = reg[etri[:, 0]]
    r1 = np.where(two, reg[np.maximum(etri[:, 1], 0)], -1)
    kind[two & (r0 == r1) & (r0 == FLUID)] = INTERIOR_FLUID
    kind[two & (r0 == r1) & (r0 == SOLID)] = INTERIOR_SOLID
    kind[two & (r0 != r1)] = INTERFACE
    tol = COORD_TOL * max(1.0, g.b, g.period)
    one = counts == 1
    on = lambda c, v: np.all(np.abs(p[:, :, c] - v) <= tol, axis=1)  # noqa: E731
    kind[one & on(1, g.b)] = TOP
    kind[one & on(1, -g.b)] = BOTTOM
    kind[one & on(0, 0.0)] = PERIODIC_LEFT
    kind[one & on(0, g.period)] = PERIODIC_RIGHT
    if np.any(kind < 0):
        bad = ev[np.flatnonzero(kind < 0)[0]]
        raise UnclassifiableEdge(f"edge {tuple(bad)} lies on no boundary and has one triangle")

    left_e = np.flatnonzero(kind == PERIODIC_LEFT)
    right_e = np.flatnonzero(kind == PERIODIC_RIGHT)
    mid_y = p[:, :, 1].mean(axis=1)
    left_e = left_e[np.argsort(mid_y[left_e], kind="stable")]
    right_e = right_e[np.argsort(mid_y[right_e], kind="stable")]
    if len(left_e) != len(right_e) or np.any(np.abs(mid_y[left_e] - mid_y[right_e]) > tol):
        raise UnclassifiableEdge("periodic boundary edges do not match")
    partner = np.full(len(ev), -1, dtype=np.int64)
    partner[left_e] = right_e
    partner[right_e] = left_e

    lv = np.flatnonzero(np.abs(verts[:, 0]) <= tol)
    rv = np.flatnonzero(np.abs(verts[:, 0] - g.period) <= tol)
    lv, rv = _pair_by_height(verts, lv, rv, "vertices")
    pairs = np.column_stack([lv, rv])

    for arr in (ev, kind, etri, partner, tri_edges, pairs):
        arr.setflags(write=False)
    table = EdgeTable(ev, kind, etri, partner, tri_edges)
    return replace(mesh, edges=table, periodic_pairs=pairs)


def refine(mesh: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of ``marked`` triangles with conformity closure.

    Periodic boundary edges are co-refined with their partners and new
    interface vertices are snapped onto the profile.
    """
    if mesh.edges is None:
        mesh = classify_edges(mesh)
    marked = sorted({int(t) for t in marked})
    if not marked:
        raise ValueError("no triangles marked for refinement")
    if marked[0] < 0 or marked[-1] >= mesh.n_triangles:
        raise IndexError("marked triangle id out of range")
    E = mesh.edges
    ref_edge = E.tri_edges[:, 0]
    etri = E.triangles
    partner = E.partner
    flagged = np.zeros(len(E), dtype=bool)
    stack = [int(ref_edge[t]) for t in marked]
    while stack:
        e = stack.pop()
        if flagged[e]:
            continue
        flagged[e] = True
        if partner[e] >= 0 and not flagged[partner[e]]:
            stack.append(int(partner[e]))
        for t in etri[e]:
            if t >= 0 and not flagged[ref_edge[t]]:
                stack.append(int(ref_edge[t]))

    verts = mesh.vertices
    flagged_ids = np.flatnonzero(flagged)
    ends = E.vertices[flagged_ids]
    mids = 0.5 * (verts[ends[:, 0]] + verts[ends[:, 1]])
    on_interface = E.kind[flagged_ids] == INTERFACE
    if np.any(on_interface):
        mids[on_interface, 1] = mesh.geometry.profile(mids[on_interface, 0])
    new_ids = mesh.n_vertices + np.arange(len(flagged_ids))
    midpoint = {(int(a), int(b)): int(v) for (a, b), v in zip(ends, new_ids)}

    current = [(int(a), int(b), int(c), int(r), int(g)) for (a, b, c), r, g in
               zip(mesh.triangles, mesh.region, mesh.generation)]
    while True:
        nxt = []
        changed = False
        for v0, v1, v2, r, g in current:
            m = midpoint.get((v1, v2) if v1 < v2 else (v2, v1))
            if m is None:
                nxt.append((v0, v1, v2, r, g))
            else:
                nxt.append((m, v0, v1, r, g + 1))
                nxt.append((m, v2, v0, r, g + 1))
                changed = True
        current = nxt
        if not changed:
            break
    arr = np.array(current, dtype=np.int64)
    new = Mesh(mesh.geometry, np.vstack([verts, mids]), arr[:, :3],
               arr[:, 3].astype(np.int8), arr[:, 4].astype(np.int32))
    return classify_edges(new)


def refine_uniform(mesh: Mesh, rounds: int = 1) -> Mesh:
    for _ in range(rounds):
        mesh = refine(mesh, range(mesh.n_triangles))
    return mesh


def check_mesh(mesh: Mesh) -> None:
    """Raise AssertionError if any structural invariant is violated."""
    g = mesh.geometry
    assert mesh.edges is not None, "mesh is not classified"
    assert np.all(mesh.signed_areas > AREA_GUARD * g.period**2), "degenerate or inverted triangle"
    E = mesh.edges
    interior = np.isin(E.kind, (INTERIOR_FLUID, INTERIOR_SOLID))
    assert np.all(E.triangles[interior] >= 0)
    reg = mesh.region
    assert np.all(reg[E.triangles[interior, 0]] == reg[E.triangles[interior, 1]])
    itf = E.kind == INTERFACE
    assert np.all(np.sort(reg[E.triangles[itf]], axis=1) == [FLUID, SOLID])
    pairs = mesh.periodic_pairs
    assert np.all(np.abs(mesh.vertices[pairs[:, 0], 1] - mesh.vertices[pairs[:, 1], 1]) <= 1e-12)
    iv = mesh.interface_vertices
    x = mesh.vertices[iv]
    assert np.all(np.abs(x[:, 1] - g.profile(x[:, 0])) <= 1e-12), "interface vertex off profile"
    total = mesh.areas.sum()
    assert abs(total - 2 * g.b * g.period) <= 1e-10 * 2 * g.b * g.period, "areas do not tile the cell"


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text mesh: header, vertex coordinates, then triangles with region."""
    lines = [f"vertices {mesh.n_vertices} / triangles {mesh.n_triangles}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"{a} {b} {c} {REGION_NAMES[r]}"
              for (a, b, c), r in zip(mesh.triangles.tolist(), mesh.region.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path, geometry: GeometrySpec) -> Mesh:
    text = Path(path).read_text(encoding="utf-8").split("\n")
    head = text[0].split()
    if len(head) != 5 or head[0] != "vertices" or head[2] != "/" or head[3] != "triangles":
        raise ValueError(f"bad mesh header: {text[0]!r}")
    nv, nt = int(head[1]), int(head[4])
    verts = np.array([[float(s) for s in line.split()] for line in text[1:1 + nv]])
    tris = []
    region = []
    for line in text[1 + nv:1 + nv + nt]:
        a, b, c, r = line.split()
        tris.append((int(a), int(b), int(c)))
        region.append(REGION_NAMES.index(r))
    mesh = Mesh(geometry, verts.reshape(nv, 2), np.array(tris, dtype=np.int64).reshape(nt, 3),
                np.array(region, dtype=np.int8), np.zeros(nt, dtype=np.int32))
    return classify_edges(mesh)
