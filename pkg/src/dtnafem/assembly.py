"""Quasi-periodic P1 discretisation of the coupled fluid-solid problem.

Unknowns live on a "full" nodal layout of length 3V (p, u1, u2 at every
vertex) and are reduced to master unknowns by a sparse prolongation P that
carries the quasi-periodic phase on x1 = period. Reduced operators are
P^H K P.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InconsistentMesh
from .mesh import FLUID, INTERFACE, SOLID, Mesh
from .params import ModeTable, PhysicalParams
from .quadrature import gauss_legendre

INTERFACE_QUAD = 8
_SERIES_CUTOFF = 0.25
_SERIES_TERMS = 24


@dataclass(frozen=True, eq=False)
class DofMap:
    """Map between mesh vertices and reduced (master) unknowns.

    ``fluid_index[v]`` / ``solid_index[v]`` give the reduced index of the
    master owning vertex v (-1 when v carries no such field); solid unknowns
    occupy ``solid_index[v]`` (u1) and ``solid_index[v] + 1`` (u2).
    ``phase[v]`` multiplies the master value to obtain the value at v.
    """

    mesh: Mesh
    fluid_index: np.ndarray
    solid_index: np.ndarray
    phase: np.ndarray
    periodic_masters: np.ndarray  # (P, 2) master (x1=0), slave (x1=period)
    multiplier: complex
    n_fluid: int
    n_solid: int

    @property
    def total_unknowns(self) -> int:
        return self.n_fluid + 2 * self.n_solid

    def fluid_dof(self, v: int) -> int:
        return int(self.fluid_index[v])

    def solid_dof(self, v: int) -> tuple[int, int]:
        i = int(self.solid_index[v])
        return (i, i + 1) if i >= 0 else (-1, -1)

    @cached_property
    def prolongation(self) -> sp.csr_matrix:
        """Sparse (3V, n) map from reduced unknowns to full nodal values."""
        V = self.mesh.n_vertices
        rows, cols, vals = [], [], []
        f = np.flatnonzero(self.fluid_index >= 0)
        rows.append(f)
        cols.append(self.fluid_index[f])
        vals.append(self.phase[f])
        s = np.flatnonzero(self.solid_index >= 0)
        for c in (0, 1):
            rows.append((1 + c) * V + s)
            cols.append(self.solid_index[s] + c)
            vals.append(self.phase[s])
        P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(3 * V, self.total_unknowns))
        return P.tocsr()

    def expand(self, x: np.ndarray):
        """Nodal fields (p, u) from a reduced vector; slaves are phase * master."""
        V = self.mesh.n_vertices
        p = np.zeros(V, dtype=complex)
        u = np.zeros((V, 2), dtype=complex)
        f = self.fluid_index >= 0
        p[f] = self.phase[f] * x[self.fluid_index[f]]
        s = self.solid_index >= 0
        for c in (0, 1):
            u[s, c] = self.phase[s] * x[self.solid_index[s] + c]
        return p, u


def build_dof_map(mesh: Mesh, params: PhysicalParams) -> DofMap:
    V = mesh.n_vertices
    xy = mesh.vertices
    pairs = mesh.periodic_pairs
    master_of = np.arange(V)
    master_of[pairs[:, 1]] = pairs[:, 0]
    mult = params.phase
    phase = np.ones(V, dtype=complex)
    phase[pairs[:, 1]] = mult
    is_slave = np.zeros(V, dtype=bool)
    is_slave[pairs[:, 1]] = True

    order = np.lexsort((xy[:, 1], xy[:, 0]))
    fluid_v = np.zeros(V, dtype=bool)
    fluid_v[mesh.region_vertices(FLUID)] = True
    solid_v = np.zeros(V, dtype=bool)
    solid_v[mesh.region_vertices(SOLID)] = True

    fluid_index = np.full(V, -1, dtype=np.int64)
    fm = order[fluid_v[order] & ~is_slave[order]]
    fluid_index[fm] = np.arange(len(fm))
    n_fluid = len(fm)
    solid_index = np.full(V, -1, dtype=np.int64)
    sm = order[solid_v[order] & ~is_slave[order]]
    solid_index[sm] = n_fluid + 2 * np.arange(len(sm))

    slaves = pairs[:, 1]
    fluid_index[slaves] = np.where(fluid_v[slaves], fluid_index[master_of[slaves]], -1)
    solid_index[slaves] = np.where(solid_v[slaves], solid_index[master_of[slaves]], -1)
    phase[~(fluid_v | solid_v)] = 0
    for arr in (fluid_index, solid_index, phase):
        arr.setflags(write=False)
    return DofMap(mesh, fluid_index, solid_index, phase, pairs, mult, n_fluid, len(sm))


def _edge_moments(s):
    """E1 = int_0^1 e^{s t} dt and E2 = int_0^1 t e^{s t} dt, stable near s = 0."""
    s = np.asarray(s, dtype=complex)
    small = np.abs(s) < _SERIES_CUTOFF
    E1 = np.empty_like(s)
    E2 = np.empty_like(s)
    big = ~small
    sb = s[big]
    es = np.exp(sb)
    E1[big] = (es - 1.0) / sb
    E2[big] = (es * (sb - 1.0) + 1.0) / sb**2
    ss = s[small]
    term = np.ones_like(ss)  # s^k / k!
    acc1 = np.zeros_like(ss)
    acc2 = np.zeros_like(ss)
    for k in range(_SERIES_TERMS):
        acc1 += term / (k + 1)
        acc2 += term / (k + 2)
        term = term * ss / (k + 1)
    E1[small] = acc1
    E2[small] = acc2
    return E1, E2


def fourier_rows(x: np.ndarray, alphas: np.ndarray, period: float) -> np.ndarray:
    """Rows c_n with c_n . v = (1/period) int v e^{-i alpha_n x1} dx1 for P1 traces.

    ``x`` holds the ordered boundary node abscissae from 0 to period; the
    integral over each edge is evaluated in closed form.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(alphas, dtype=float)[:, None]
    h = np.diff(x)[None, :]
    E1, E2 = _edge_moments(-1j * a * h)
    base = np.exp(-1j * a * x[None, :-1]) * h
    right = base * E2
    left = base * (E1 - E2)
    rows = np.zeros((a.shape[0], len(x)), dtype=complex)
    rows[:, :-1] += left
    rows[:, 1:] += right
    return rows / period


def boundary_fourier_row(mesh: Mesh, boundary: str, n: int, alpha_n: float) -> np.ndarray:
    """Fourier row over ``mesh.boundary_vertices(boundary)`` (ordered by x1)."""
    ids = mesh.boundary_vertices(boundary)
    return fourier_rows(mesh.vertices[ids, 0], np.array([alpha_n]), mesh.geometry.period)[0]


def synthesize(coeffs: np.ndarray, alphas: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate sum_n coeffs[n] e^{i alpha_n x} (coeffs may carry trailing axes)."""
    phases = np.exp(1j * np.multiply.outer(np.asarray(x), alphas))
    return np.tensordot(phases, coeffs, axes=([-1], [0]))


def apply_dtn_truncated(x: np.ndarray, trace: np.ndarray, modes: ModeTable,
                        period: float) -> np.ndarray:
    """Nodal samples of the truncated acoustic DtN map applied to a P1 trace."""
    coeffs = fourier_rows(x, modes.alpha, period) @ np.asarray(trace, dtype=complex)
    return synthesize(1j * modes.beta * coeffs, modes.alpha, x)


@dataclass(frozen=True, eq=False)
class LowRankBlock:
    """Dense update conj(R)^T W R acting on the reduced columns ``cols``."""

    cols: np.ndarray
    R: np.ndarray
    W: np.ndarray

    def dense(self) -> np.ndarray:
        return self.R.conj().T @ self.W @ self.R

    @property
    def rank(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True, eq=False)
class LinearSystem:
    dofs: DofMap
    local: sp.csr_matrix
    lowrank: tuple
    rhs: np.ndarray
    n_modes: int

    @property
    def dimension(self) -> int:
        return self.local.shape[0]

    def matrix(self) -> sp.csc_matrix:
        """Explicit sparse matrix with the DtN blocks expanded on boundary rows."""
        n = self.dimension
        parts = [self.local.tocoo()]
        for blk in self.lowrank:
            D = blk.dense()
            r, c = np.meshgrid(blk.cols, blk.cols, indexing="ij")
            parts.append(sp.coo_matrix((D.ravel(), (r.ravel(), c.ravel())), shape=(n, n)))
        rows = np.concatenate([p.row for p in parts])
        cols = np.concatenate([p.col for p in parts])
        vals = np.concatenate([p.data for p in parts])
        return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.local @ x
        for blk in self.lowrank:
            y[blk.cols] += blk.R.conj().T @ (blk.W @ (blk.R @ x[blk.cols]))
        return y


@dataclass(frozen=True, eq=False)
class Solution:
    mesh: Mesh
    dofs: DofMap
    p: np.ndarray  # (V,) scattered pressure, zero off the fluid
    u: np.ndarray  # (V, 2) displacement, zero off the solid
    N: int
    x: np.ndarray  # reduced vector

    @classmethod
    def from_vector(cls, dofs: DofMap, x: np.ndarray, N: int) -> "Solution":
        p, u = dofs.expand(x)
        return cls(dofs.mesh, dofs, p, u, N, np.asarray(x))


def p1_gradients(mesh: Mesh):
    """Per-triangle P1 basis gradients (T, 3, 2) and areas (T,)."""
    pts = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas
    G = np.empty((mesh.n_triangles, 3, 2))
    for i in range(3):
        e = pts[:, (i + 2) % 3] - pts[:, (i + 1) % 3]
        G[:, i, 0] = -e[:, 1]
        G[:, i, 1] = e[:, 0]
    G /= (2 * area)[:, None, None]
    return G, area


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def interface_geometry(mesh: Mesh):
    """Interface edges with their endpoints, lengths and unit normals into the fluid."""
    E = mesh.edges
    ids = E.of_kind(INTERFACE)
    ends = E.vertices[ids]
    tri = E.triangles[ids]
    fluid_tri = np.where(mesh.region[tri[:, 0]] == FLUID, tri[:, 0], tri[:, 1])
    solid_tri = np.where(mesh.region[tri[:, 0]] == FLUID, tri[:, 1], tri[:, 0])
    xa = mesh.vertices[ends[:, 0]]
    xb = mesh.vertices[ends[:, 1]]
    t = xb - xa
    L = np.hypot(t[:, 0], t[:, 1])
    n = np.column_stack([-t[:, 1], t[:, 0]]) / L[:, None]
    towards = mesh.centroids[fluid_tri] - 0.5 * (xa + xb)
    flip = np.sum(n * towards, axis=1) < 0
    n[flip] *= -1
    return ids, ends, L, n, fluid_tri, solid_tri


def incident_field(params: PhysicalParams, x: np.ndarray, amplitude: complex = 1.0):
    """Incident plane wave and its gradient at points x (..., 2)."""
    a, b = params.alpha, params.beta
    val = amplitude * np.exp(1j * (a * x[..., 0] - b * x[..., 1]))
    grad = np.stack([1j * a * val, -1j * b * val], axis=-1)
    return val, grad


def _volume_blocks(mesh: Mesh, params: PhysicalParams):
    V = mesh.n_vertices
    G, area = p1_gradients(mesh)
    tris = mesh.triangles
    rows, cols, vals = [], [], []

    fl = np.flatnonzero(mesh.region == FLUID)
    if len(fl):
        Gf = G[fl]
        Ke = area[fl, None, None] * (np.einsum("tik,tjk->tij", Gf, Gf)
                                     - params.kappa**2 * _MASS_REF[None])
        t = tris[fl]
        rows.append(np.repeat(t[:, :, None], 3, axis=2).ravel())
        cols.append(np.repeat(t[:, None, :], 3, axis=1).ravel())
        vals.append(Ke.ravel().astype(complex))

    so = np.flatnonzero(mesh.region == SOLID)
    if len(so):
        Gs = G[so]
        A = area[so]
        lam, mu = params.lam, params.mu
        w2 = params.rho * params.omega**2
        gg = np.einsum("tik,tjk->tij", Gs, Gs)  # g_b . g_a with b = row
        t = tris[so]
        for d in (0, 1):
            for c in (0, 1):
                # row: test (vertex i, comp d); col: trial (vertex j, comp c)
                K = (lam * Gs[:, :, d][:, :, None] * Gs[:, :, c][:, None, :]
                     + mu * Gs[:, :, c][:, :, None] * Gs[:, :, d][:, None, :])
                if c == d:
                    K = K + mu * gg - w2 * _MASS_REF[None]
                K = A[:, None, None] * K
                rows.append(((1 + d) * V + np.repeat(t[:, :, None], 3, axis=2)).ravel())
                cols.append(((1 + c) * V + np.repeat(t[:, None, :], 3, axis=1)).ravel())
                vals.append(K.ravel().astype(complex))
    return rows, cols, vals


def _interface_blocks(mesh: Mesh, params: PhysicalParams):
    V = mesh.n_vertices
    _, ends, L, n, _, _ = interface_geometry(mesh)
    rows, cols, vals = [], [], []
    edge_mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    coup = params.rho_f * params.omega**2
    for i in (0, 1):
        for j in (0, 1):
            m = L * edge_mass[i, j]
            vi, vj = ends[:, i], ends[:, j]
            for c in (0, 1):
                # a3: test q at vi, trial u_c at vj
                rows.append(vi)
                cols.append((1 + c) * V + vj)
                vals.append((coup * n[:, c] * m).astype(complex))
                # a4: test v_c at vi, trial p at vj
                rows.append((1 + c) * V + vi)
                cols.append(vj)
                vals.append((n[:, c] * m).astype(complex))
    return rows, cols, vals


def assemble_load(mesh: Mesh, params: PhysicalParams, amplitude: complex = 1.0,
                  order: int = INTERFACE_QUAD) -> np.ndarray:
    """Full-layout load vector from the incident field on the interface."""
    V = mesh.n_vertices
    _, ends, L, n, _, _ = interface_geometry(mesh)
    t, w = gauss_legendre(order)
    xa = mesh.vertices[ends[:, 0]]
    xb = mesh.vertices[ends[:, 1]]
    x = xa[:, None, :] + t[None, :, None] * (xb - xa)[:, None, :]
    pinc, grad = incident_field(params, x, amplitude)
    dn = np.einsum("eqk,ek->eq", grad, n)
    shape = np.stack([1.0 - t, t])  # (2, q)
    rhs = np.zeros(3 * V, dtype=complex)
    for i in (0, 1):
        v = ends[:, i]
        np.add.at(rhs, v, L * (dn * shape[i] * w).sum(axis=1))
        for c in (0, 1):
            np.add.at(rhs, (1 + c) * V + v, -L * n[:, c] * (pinc * shape[i] * w).sum(axis=1))
    return rhs


def _reduced_rows(C, vertex_ids, index, phase, offset=0):
    """Push Fourier rows on boundary vertices to reduced columns (with phases)."""
    red = index[vertex_ids] + offset
    cols, inv = np.unique(red, return_inverse=True)
    R = np.zeros((C.shape[0], len(cols)), dtype=complex)
    np.add.at(R.T, inv, (C * phase[vertex_ids][None, :]).T)
    return cols, R


def dtn_blocks(mesh: Mesh, params: PhysicalParams, modes: ModeTable, dofs: DofMap):
    period = mesh.geometry.period
    top = mesh.boundary_vertices("top")
    Ct = fourier_rows(mesh.vertices[top, 0], modes.alpha, period)
    cols_t, Rt = _reduced_rows(Ct, top, dofs.fluid_index, dofs.phase)
    Wt = np.diag(-1j * period * modes.beta)
    top_block = LowRankBlock(cols_t, Rt, Wt)

    bot = mesh.boundary_vertices("bottom")
    Cb = fourier_rows(mesh.vertices[bot, 0], modes.alpha, period)
    cols0, R0 = _reduced_rows(Cb, bot, dofs.solid_index, dofs.phase, 0)
    cols1, R1 = _reduced_rows(Cb, bot, dofs.solid_index, dofs.phase, 1)
    cols_b = np.concatenate([cols0, cols1])
    order = np.argsort(cols_b, kind="stable")
    k = len(modes)
    Rb = np.zeros((2 * k, len(cols_b)), dtype=complex)
    Rb[0::2, : len(cols0)] = R0
    Rb[1::2, len(cols0):] = R1
    Rb = Rb[:, order]
    cols_b = cols_b[order]
    Wb = np.zeros((2 * k, 2 * k), dtype=complex)
    for i in range(k):
        Wb[2 * i:2 * i + 2, 2 * i:2 * i + 2] = -period * modes.M[i]
    return top_block, LowRankBlock(cols_b, Rb, Wb)


def assemble(mesh: Mesh, params: PhysicalParams, modes: ModeTable, dofs: DofMap,
             incident_amplitude: complex = 1.0, quad_order: int = INTERFACE_QUAD) -> LinearSystem:
    if dofs.mesh is not mesh:
        raise InconsistentMesh("dof map was built for a different mesh")
    V = mesh.n_vertices
    r1, c1, v1 = _volume_blocks(mesh, params)
    r2, c2, v2 = _interface_blocks(mesh, params)
    K = sp.coo_matrix((np.concatenate(v1 + v2), (np.concatenate(r1 + r2), np.concatenate(c1 + c2))),
                      shape=(3 * V, 3 * V)).tocsr()
    P = dofs.prolongation
    local = (P.conj().T @ K @ P).tocsr()
    local.sum_duplicates()
    rhs = P.conj().T @ assemble_load(mesh, params, incident_amplitude, quad_order)
    blocks = dtn_blocks(mesh, params, modes, dofs)
    return LinearSystem(dofs, local, blocks, np.asarray(rhs), modes.n_max)


def full_matrix(mesh: Mesh, params: PhysicalParams) -> sp.csr_matrix:
    """Unreduced local forms (volume + interface coupling) on the 3V layout."""
    V = mesh.n_vertices
    r1, c1, v1 = _volume_blocks(mesh, params)
    r2, c2, v2 = _interface_blocks(mesh, params)
    return sp.coo_matrix((np.concatenate(v1 + v2), (np.concatenate(r1 + r2), np.concatenate(c1 + c2))),
                         shape=(3 * V, 3 * V)).tocsr()


def dof_count(mesh: Mesh) -> int:
    """Number of reduced unknowns without building the full map."""
    V = mesh.n_vertices
    slave = np.zeros(V, dtype=bool)
    slave[mesh.periodic_pairs[:, 1]] = True
    nf = np.count_nonzero(~slave[mesh.region_vertices(FLUID)])
    ns = np.count_nonzero(~slave[mesh.region_vertices(SOLID)])
    return int(nf + 2 * ns)


__all__ = [
    "DofMap", "LinearSystem", "LowRankBlock", "Solution", "apply_dtn_truncated", "assemble",
    "assemble_load", "boundary_fourier_row", "build_dof_map", "dof_count", "dtn_blocks",
    "fourier_rows", "full_matrix", "incident_field", "interface_geometry", "p1_gradients",
    "synthesize",
]

