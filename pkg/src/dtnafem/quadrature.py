"""Quadrature rules on the unit interval and the reference triangle."""
from functools import lru_cache

import numpy as np

from .errors import QuadratureOverflow

MAX_ORDER = 64


@lru_cache(maxsize=None)
def _gauss(n):
    if not 1 <= n <= MAX_ORDER:
        raise QuadratureOverflow(f"unsupported Gauss order {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def gauss_legendre(n: int):
    """n-point Gauss rule on [0, 1] as (points, weights); weights sum to 1."""
    return _gauss(int(n))


@lru_cache(maxsize=None)
def _triangle(n):
    t, w = _gauss(n)
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    # collapsed (Duffy) map of the unit square onto the reference triangle
    lam1 = u.ravel()
    lam2 = (v * (1.0 - u)).ravel()
    weights = (wu * wv * (1.0 - u)).ravel()
    bary = np.column_stack([1.0 - lam1 - lam2, lam1, lam2])
    weights = weights / weights.sum()
    bary.setflags(write=False)
    weights.setflags(write=False)
    return bary, weights


def triangle_rule(n: int):
    """Collapsed-Gauss rule with n*n points on a triangle.

    Returns barycentric coordinates (q, 3) and weights (q,) normalised to sum
    to 1, so that integral = area * sum(w * f). Exact for degree 2n - 2.
    """
    return _triangle(int(n))
