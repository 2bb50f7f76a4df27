"""Closed-form solution for a flat interface and the coupled energy error."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import Solution, p1_gradients
from .errors import SingularSystem
from .mesh import FLUID, SOLID
from .params import PhysicalParams, vertical_wavenumber
from .quadrature import triangle_rule

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ExactFlatSolution:
    """Reflected pressure and transmitted P/S waves for the interface x2 = 0.

    p^s = a1 exp(i(alpha x1 + beta x2)) above, and below
    u = a2 [alpha, -beta1] exp(i(alpha x1 - beta1 x2))
      + a3 [beta2, alpha] exp(i(alpha x1 - beta2 x2)).
    """

    params: PhysicalParams
    a1: complex
    a2: complex
    a3: complex
    beta: complex
    beta1: complex
    beta2: complex

    def _waves(self, x):
        x = np.asarray(x, dtype=float)
        al = self.params.alpha
        e0 = np.exp(1j * (al * x[..., 0] + self.beta * x[..., 1]))
        e1 = np.exp(1j * (al * x[..., 0] - self.beta1 * x[..., 1]))
        e2 = np.exp(1j * (al * x[..., 0] - self.beta2 * x[..., 1]))
        return e0, e1, e2

    def pressure(self, x):
        """Scattered pressure p^s at points (..., 2)."""
        return self.a1 * self._waves(x)[0]

    def pressure_gradient(self, x):
        e0 = self._waves(x)[0]
        g = np.stack([1j * self.params.alpha * e0, 1j * self.beta * e0], axis=-1)
        return self.a1 * g

    def displacement(self, x):
        _, e1, e2 = self._waves(x)
        al = self.params.alpha
        u1 = self.a2 * al * e1 + self.a3 * self.beta2 * e2
        u2 = -self.a2 * self.beta1 * e1 + self.a3 * al * e2
        return np.stack([u1, u2], axis=-1)

    def displacement_gradient(self, x):
        """(..., 2, 2) array with [..., i, j] = d u_i / d x_j."""
        _, e1, e2 = self._waves(x)
        al = self.params.alpha
        d1 = np.array([al, -self.beta1])
        k1 = 1j * np.array([al, -self.beta1])
        d2 = np.array([self.beta2, al])
        k2 = 1j * np.array([al, -self.beta2])
        return (self.a2 * e1[..., None, None] * np.outer(d1, k1)
                + self.a3 * e2[..., None, None] * np.outer(d2, k2))

    def stress(self, x):
        G = self.displacement_gradient(x)
        lam, mu = self.params.lam, self.params.mu
        div = G[..., 0, 0] + G[..., 1, 1]
        return lam * div[..., None, None] * np.eye(2) + mu * (G + np.swapaxes(G, -1, -2))


def exact_flat(params: PhysicalParams) -> ExactFlatSolution:
    """Solve the 3x3 transmission system for the flat interface."""
    al = params.alpha
    b0 = complex(vertical_wavenumber(params.kappa, al))
    b1 = complex(vertical_wavenumber(params.kappa1, al))
    b2 = complex(vertical_wavenumber(params.kappa2, al))
    mu, lam = params.mu, params.lam
    c = params.rho_f * params.omega**2
    # rows: d_y(p^i + p^s) = c u2; sigma_12 = 0; sigma_22 = -(p^i + p^s); at x2 = 0
    A = np.array([
        [1j * b0, c * b1, -c * al],
        [0.0, -2j * mu * al * b1, 1j * mu * (al**2 - b2**2)],
        [1.0, 2j * mu * b1**2 + 1j * lam * params.kappa1**2, -2j * mu * al * b2],
    ], dtype=complex)
    rhs = np.array([1j * b0, 0.0, -1.0], dtype=complex)
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > COND_LIMIT:
        raise SingularSystem("flat-interface coefficient system is singular")
    a = np.linalg.solve(A, rhs)
    return ExactFlatSolution(params, complex(a[0]), complex(a[1]), complex(a[2]), b0, b1, b2)


def coupled_norm_density(params: PhysicalParams, xi, grad_xi, zeta, grad_zeta):
    """Pointwise integrands of the coupled norm on fluid and solid."""
    out = []
    if xi is not None:
        out.append(np.sum(np.abs(grad_xi) ** 2, axis=-1) + np.abs(xi) ** 2)
    if zeta is not None:
        div = grad_zeta[..., 0, 0] + grad_zeta[..., 1, 1]
        sym = grad_zeta + np.swapaxes(grad_zeta, -1, -2)
        out.append(params.lam * np.abs(div) ** 2 + 0.5 * params.mu * np.sum(np.abs(sym) ** 2, axis=(-1, -2))
                   + np.sum(np.abs(zeta) ** 2, axis=-1))
    return out


def coupled_h1_error(solution: Solution, exact: ExactFlatSolution, params: PhysicalParams,
                     order: int = 4) -> float:
    """Coupled energy-type norm of (exact - discrete) over the whole cell."""
    mesh = solution.mesh
    bary, w = triangle_rule(order)
    G, area = p1_gradients(mesh)
    pts = np.einsum("qk,tkd->tqd", bary, mesh.vertices[mesh.triangles])
    total = 0.0
    fl = mesh.region == FLUID
    if np.any(fl):
        t = mesh.triangles[fl]
        ph = np.einsum("qk,tk->tq", bary, solution.p[t])
        gph = np.einsum("tk,tkd->td", solution.p[t], G[fl])[:, None, :]
        x = pts[fl]
        (dens,) = coupled_norm_density(params, exact.pressure(x) - ph,
                                       exact.pressure_gradient(x) - gph, None, None)
        total += float(np.sum(area[fl] * (dens @ w)))
    so = mesh.region == SOLID
    if np.any(so):
        t = mesh.triangles[so]
        uh = np.einsum("qk,tkc->tqc", bary, solution.u[t])
        guh = np.einsum("tkc,tkd->tcd", solution.u[t], G[so])[:, None, :, :]
        x = pts[so]
        (dens,) = coupled_norm_density(params, None, None, exact.displacement(x) - uh,
                                       exact.displacement_gradient(x) - guh)
        total += float(np.sum(area[so] * (dens @ w)))
    return math.sqrt(max(total, 0.0))
