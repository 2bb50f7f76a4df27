"""Residual-type a posteriori indicators for the coupled problem."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import (Solution, fourier_rows, incident_field, interface_geometry,
                       p1_gradients, synthesize)
from .mesh import BOTTOM, FLUID, INTERIOR_FLUID, INTERIOR_SOLID, PERIODIC_LEFT, TOP, Mesh
from .params import ModeTable, PhysicalParams, theta_bound
from .quadrature import gauss_legendre

EDGE_QUAD = 8


@dataclass(frozen=True)
class ErrorIndicators:
    eta_per_triangle: np.ndarray
    eps_h: float
    eps_N: float
    dof: int


@dataclass(frozen=True)
class EdgeJumps:
    """Squared L2 norms of the jump residuals on every edge.

    ``fluid`` holds ||J_{e,a}||^2 and ``solid`` holds ||J_{e,s}||^2; entries
    are zero where the edge carries no such jump.
    """

    fluid: np.ndarray
    solid: np.ndarray


def _fluid_gradients(mesh: Mesh, p: np.ndarray, G: np.ndarray) -> np.ndarray:
    return np.einsum("tk,tkd->td", p[mesh.triangles], G)


def _solid_stress(mesh: Mesh, u: np.ndarray, G: np.ndarray, params: PhysicalParams) -> np.ndarray:
    grad = np.einsum("tkc,tkd->tcd", u[mesh.triangles], G)
    div = grad[:, 0, 0] + grad[:, 1, 1]
    return (params.lam * div[:, None, None] * np.eye(2)
            + params.mu * (grad + np.swapaxes(grad, 1, 2)))


def _outward_normals(mesh: Mesh, edge_ids: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Unit normals of the given edges pointing out of the triangles ``tri``."""
    ends = mesh.edges.vertices[edge_ids]
    xa = mesh.vertices[ends[:, 0]]
    xb = mesh.vertices[ends[:, 1]]
    t = xb - xa
    nu = np.column_stack([t[:, 1], -t[:, 0]]) / np.hypot(t[:, 0], t[:, 1])[:, None]
    away = 0.5 * (xa + xb) - mesh.centroids[tri]
    nu[np.sum(nu * away, axis=1) < 0] *= -1
    return nu


def element_residual(mesh: Mesh, solution: Solution, params: PhysicalParams,
                     triangles=None) -> np.ndarray:
    """h_K times the L2 norm of the interior residual (exact P1 mass integration)."""
    tris = np.arange(mesh.n_triangles) if triangles is None else np.atleast_1d(triangles)
    conn = mesh.triangles[tris]
    area = mesh.areas[tris]
    mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    out = np.zeros(len(tris))
    fl = mesh.region[tris] == FLUID
    pv = solution.p[conn[fl]]
    sq = np.einsum("ti,ij,tj->t", pv.conj(), mass, pv).real * area[fl]
    out[fl] = params.kappa**2 * np.sqrt(np.maximum(sq, 0.0))
    so = ~fl
    uv = solution.u[conn[so]]
    sq = np.einsum("tic,ij,tjc->t", uv.conj(), mass, uv).real * area[so]
    out[so] = params.rho * params.omega**2 * np.sqrt(np.maximum(sq, 0.0))
    return mesh.diameters[tris] * out


def _edge_points(mesh: Mesh, edge_ids: np.ndarray, order: int):
    t, w = gauss_legendre(order)
    ends = mesh.edges.vertices[edge_ids]
    xa = mesh.vertices[ends[:, 0]]
    xb = mesh.vertices[ends[:, 1]]
    x = xa[:, None, :] + t[None, :, None] * (xb - xa)[:, None, :]
    L = np.hypot(*(xb - xa).T)
    return x, t, w, L, ends


def _l2sq(values, w, L):
    """Edge-wise squared L2 norm; ``values`` is (E, q) or (E, q, 2)."""
    a = np.abs(values) ** 2
    if a.ndim == 3:
        a = a.sum(axis=2)
    return L * (a @ w)


def jump_residuals(mesh: Mesh, solution: Solution, modes: ModeTable, params: PhysicalParams,
                   incident_amplitude: complex = 1.0, order: int = EDGE_QUAD) -> EdgeJumps:
    E = mesh.edges
    nE = len(E)
    G, _ = p1_gradients(mesh)
    gp = _fluid_gradients(mesh, solution.p, G)
    sig = _solid_stress(mesh, solution.u, G, params)
    Lall = np.hypot(*(mesh.vertices[E.vertices[:, 1]] - mesh.vertices[E.vertices[:, 0]]).T)
    fluid = np.zeros(nE)
    solid = np.zeros(nE)

    ids = E.of_kind(INTERIOR_FLUID)
    if len(ids):
        k1, k2 = E.triangles[ids, 0], E.triangles[ids, 1]
        nu = _outward_normals(mesh, ids, k1)
        J = -np.sum((gp[k1] - gp[k2]) * nu, axis=1)
        fluid[ids] = np.abs(J) ** 2 * Lall[ids]

    ids = E.of_kind(INTERIOR_SOLID)
    if len(ids):
        k1, k2 = E.triangles[ids, 0], E.triangles[ids, 1]
        nu = _outward_normals(mesh, ids, k1)
        J = -np.einsum("ecd,ed->ec", sig[k1] - sig[k2], nu)
        solid[ids] = np.sum(np.abs(J) ** 2, axis=1) * Lall[ids]

    left = E.of_kind(PERIODIC_LEFT)
    if len(left):
        right = E.partner[left]
        k1, k2 = E.triangles[left, 0], E.triangles[right, 0]
        nu1 = np.array([-1.0, 0.0])
        nu2 = np.array([1.0, 0.0])
        back = np.exp(-1j * params.alpha * params.period)
        fl = mesh.region[k1] == FLUID
        Je = -(gp[k1] @ nu1 + back * (gp[k2] @ nu2))
        fluid[left[fl]] = (np.abs(Je) ** 2 * Lall[left])[fl]
        fluid[right[fl]] = (np.abs(Je) ** 2 * Lall[right])[fl]  # |e^{i alpha L}| = 1
        Js = -(sig[k1] @ nu1 + back * (sig[k2] @ nu2))
        sq = np.sum(np.abs(Js) ** 2, axis=1)
        solid[left[~fl]] = (sq * Lall[left])[~fl]
        solid[right[~fl]] = (sq * Lall[right])[~fl]

    ids, _, _, n, ftri, stri = interface_geometry(mesh)
    if len(ids):
        x, t, w, L, ends = _edge_points(mesh, ids, order)
        pinc, ginc = incident_field(params, x, incident_amplitude)
        shape = np.stack([1.0 - t, t], axis=1)  # (q, 2)
        ph = solution.p[ends] @ shape.T  # (E, q)
        uh = np.einsum("qk,ekc->eqc", shape, solution.u[ends])
        dn = np.einsum("eqd,ed->eq", ginc, n) + np.sum(gp[ftri] * n, axis=1)[:, None]
        Ja = 2.0 * (dn - params.rho_f * params.omega**2 * np.einsum("eqc,ec->eq", uh, n))
        fluid[ids] = _l2sq(Ja, w, L)
        trac = np.einsum("ecd,ed->ec", sig[stri], n)
        Js = -2.0 * ((pinc + ph)[:, :, None] * n[:, None, :] + trac[:, None, :])
        solid[ids] = _l2sq(Js, w, L)

    period = mesh.geometry.period
    top_ids = E.of_kind(TOP)
    if len(top_ids):
        verts = mesh.boundary_vertices("top")
        coeffs = fourier_rows(mesh.vertices[verts, 0], modes.alpha, period) @ solution.p[verts]
        x, t, w, L, ends = _edge_points(mesh, top_ids, order)
        dtn = synthesize(1j * modes.beta * coeffs, modes.alpha, x[..., 0])
        tri = E.triangles[top_ids, 0]
        J = 2.0 * (dtn - gp[tri, 1][:, None])
        fluid[top_ids] = _l2sq(J, w, L)

    bot_ids = E.of_kind(BOTTOM)
    if len(bot_ids):
        verts = mesh.boundary_vertices("bottom")
        coeffs = fourier_rows(mesh.vertices[verts, 0], modes.alpha, period) @ solution.u[verts]
        mult = np.einsum("ncd,nd->nc", modes.M, coeffs)
        x, t, w, L, ends = _edge_points(mesh, bot_ids, order)
        dtn = synthesize(mult, modes.alpha, x[..., 0])  # (E, q, 2)
        tri = E.triangles[bot_ids, 0]
        trac = -sig[tri][:, :, 1]  # sigma (0, -1)
        J = 2.0 * (dtn - trac[:, None, :])
        solid[bot_ids] = _l2sq(J, w, L)

    return EdgeJumps(fluid, solid)


def indicators(mesh: Mesh, solution: Solution, modes: ModeTable, params: PhysicalParams,
               incident_norm: float, incident_amplitude: complex = 1.0,
               order: int = EDGE_QUAD) -> ErrorIndicators:
    """Per-triangle indicators, eps_h = sqrt(sum eta^2) and eps_N = Theta * incident_norm."""
    jumps = jump_residuals(mesh, solution, modes, params, incident_amplitude, order)
    E = mesh.edges
    L = np.hypot(*(mesh.vertices[E.vertices[:, 1]] - mesh.vertices[E.vertices[:, 0]]).T)
    edge_sum = np.zeros(mesh.n_triangles)
    fluid_tri = mesh.region == FLUID
    for side in (0, 1):
        tri = E.triangles[:, side]
        has = tri >= 0
        tri_c = np.where(has, tri, 0)
        val = np.where(fluid_tri[tri_c], jumps.fluid, jumps.solid) * L
        np.add.at(edge_sum, tri_c[has], val[has])
    eta = element_residual(mesh, solution, params) + np.sqrt(0.5 * edge_sum)
    eps_h = math.sqrt(float(np.sum(eta**2)))
    eps_N = 0.0
    if incident_norm > 0:
        eps_N = theta_bound(params, mesh.geometry.gap, modes.n_max) * incident_norm
    return ErrorIndicators(eta, eps_h, eps_N, int(solution.dofs.total_unknowns))


__all__ = ["EDGE_QUAD", "EdgeJumps", "ErrorIndicators", "element_residual", "indicators",
           "jump_residuals"]
