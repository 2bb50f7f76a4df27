"""Physical parameters, Rayleigh mode tables and DtN truncation control."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEdge, InvalidParams, NotEvanescentWarning, WoodAnomaly
from .quadrature import gauss_legendre

WOOD_RTOL = 1e-12
# consecutive strictly decreasing indices required before the sup scan stops
THETA_SCAN_GUARD = 5
MAX_TRUNCATION = 100_000


@dataclass(frozen=True)
class PhysicalParams:
    """Wave and material constants for one grating problem.

    ``lam`` and ``mu`` are the Lame constants of the solid, ``rho`` its
    density; ``rho_f`` is the fluid density. ``kappa`` is treated as an
    independent input (no sound speed is stored).
    """

    omega: float
    kappa: float
    theta: float
    rho_f: float
    lam: float
    mu: float
    rho: float
    period: float

    def __post_init__(self):
        for name in ("omega", "kappa", "theta", "rho_f", "lam", "mu", "rho", "period"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidParams(f"{name} must be a finite real number, got {value!r}")
        if self.mu <= 0:
            raise InvalidParams("mu must be positive")
        if self.lam + self.mu <= 0:
            raise InvalidParams("lambda + mu must be positive")
        for name in ("rho", "rho_f", "omega", "period"):
            if getattr(self, name) <= 0:
                raise InvalidParams(f"{name} must be positive")
        if self.kappa < 0:
            raise InvalidParams("kappa must be nonnegative")
        if not -math.pi / 2 < self.theta < math.pi / 2:
            raise InvalidParams("theta must lie strictly inside (-pi/2, pi/2)")
        if not self.kappa1 < self.kappa2:
            raise InvalidParams("compressional wavenumber must be below the shear wavenumber")

    @property
    def kappa1(self) -> float:
        return self.omega * math.sqrt(self.rho / (self.lam + 2 * self.mu))

    @property
    def kappa2(self) -> float:
        return self.omega * math.sqrt(self.rho / self.mu)

    @property
    def alpha(self) -> float:
        return self.kappa * math.sin(self.theta)

    @property
    def beta(self) -> float:
        return self.kappa * math.cos(self.theta)

    @property
    def phase(self) -> complex:
        """Quasi-periodic multiplier exp(i alpha Lambda)."""
        return complex(np.exp(1j * self.alpha * self.period))

    def alpha_n(self, n):
        return self.alpha + np.asarray(n) * (2 * math.pi / self.period)


def vertical_wavenumber(k: float, a):
    """sqrt(k^2 - a^2) on the branch with nonnegative real and imaginary parts.

    Real and positive for |a| < k, purely imaginary with positive imaginary
    part for |a| > k.
    """
    a = np.abs(np.asarray(a, dtype=float))
    d = (k - a) * (k + a)
    root = np.sqrt(np.abs(d))
    return np.where(d > 0, root + 0j, 1j * root)


@dataclass(frozen=True)
class ModeTable:
    """Per-mode quantities for |n| <= n_max, stored in order n = -N..N."""

    n_max: int
    n: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    chi: np.ndarray
    M: np.ndarray  # (2N+1, 2, 2)

    def index(self, n: int) -> int:
        if abs(n) > self.n_max:
            raise KeyError(n)
        return n + self.n_max

    def __len__(self):
        return 2 * self.n_max + 1


def _check_wood(params: PhysicalParams, alpha):
    a = np.abs(alpha)
    for name, k in (("kappa", params.kappa), ("kappa1", params.kappa1), ("kappa2", params.kappa2)):
        hit = np.abs(a - k) <= WOOD_RTOL * max(k, 1e-300)
        if np.any(hit):
            n = int(np.round((alpha[hit][0] - params.alpha) * params.period / (2 * math.pi)))
            raise WoodAnomaly(f"|alpha_{n}| = {a[hit][0]!r} coincides with {name} = {k!r}")


def elastic_dtn_matrix(params: PhysicalParams, alpha, beta1, beta2):
    """The 2x2 elastic DtN multipliers for arrays of modes.

    Uses rho*omega^2 (= mu*kappa2^2); for unit density this is the
    textbook expression with omega^2.
    """
    alpha = np.asarray(alpha, dtype=float)
    chi = alpha**2 + beta1 * beta2
    w2 = params.rho * params.omega**2
    off = 2 * params.mu * alpha * chi - w2 * alpha
    M = np.empty(alpha.shape + (2, 2), dtype=complex)
    M[..., 0, 0] = w2 * beta1
    M[..., 0, 1] = -off
    M[..., 1, 0] = off
    M[..., 1, 1] = w2 * beta2
    M *= (1j / chi)[..., None, None]
    return chi, M


def derive_modes(params: PhysicalParams, N: int) -> ModeTable:
    if int(N) != N or N < 0:
        raise InvalidParams(f"truncation order must be a nonnegative integer, got {N!r}")
    N = int(N)
    n = np.arange(-N, N + 1)
    alpha = params.alpha_n(n)
    _check_wood(params, alpha)
    beta = vertical_wavenumber(params.kappa, alpha)
    beta1 = vertical_wavenumber(params.kappa1, alpha)
    beta2 = vertical_wavenumber(params.kappa2, alpha)
    chi, M = elastic_dtn_matrix(params, alpha, beta1, beta2)
    for arr in (n, alpha, beta, beta1, beta2, chi, M):
        arr.setflags(write=False)
    return ModeTable(N, n, alpha, beta, beta1, beta2, chi, M)


def evanescent_beyond(params: PhysicalParams, N: int) -> bool:
    """True when every mode with |n| > N is evanescent for kappa and kappa2."""
    K = 2 * math.pi / params.period
    candidates = [N + 1, -(N + 1)]
    nearest = round(-params.alpha / K)
    for c in (nearest - 1, nearest, nearest + 1):
        if abs(c) > N:
            candidates.append(c)
    a_min = min(abs(params.alpha + c * K) for c in candidates)
    return a_min > max(params.kappa, params.kappa2)


def theta_bound(params: PhysicalParams, geometry_gap: float, N: int) -> float:
    """Truncation factor: sup over |n| > N of the acoustic and elastic decay terms.

    Returns 1.0 (and warns) when propagating modes remain beyond ``N``.
    """
    if not geometry_gap > 0:
        raise InvalidParams("geometry gap b - b' must be positive")
    if not evanescent_beyond(params, N):
        warnings.warn(f"propagating modes beyond N={N}; truncation bound is vacuous",
                      NotEvanescentWarning, stacklevel=2)
        return 1.0
    K = 2 * math.pi / params.period
    best = 0.0
    for sign in (1, -1):
        prev_a = prev_e = math.inf
        streak = 0
        k = N + 1
        while True:
            a_n = params.alpha + sign * k * K
            va = math.exp(-geometry_gap * abs(complex(vertical_wavenumber(params.kappa, a_n))))
            ve = k * math.exp(-geometry_gap * abs(complex(vertical_wavenumber(params.kappa2, a_n))))
            best = max(best, va, ve)
            if (va < prev_a or va == 0.0) and (ve < prev_e or ve == 0.0):
                streak += 1
            else:
                streak = 0
            if streak >= THETA_SCAN_GUARD:
                break
            prev_a, prev_e = va, ve
            k += 1
    return best


def select_truncation(params: PhysicalParams, geometry_gap: float,
                      incident_norm: float, tol: float) -> int:
    """Smallest N >= 0 whose truncation error Theta(N) * incident_norm is <= tol."""
    if not tol > 0:
        raise InvalidParams("tolerance must be positive")
    if incident_norm < 0:
        raise InvalidParams("incident norm must be nonnegative")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotEvanescentWarning)
        for N in range(MAX_TRUNCATION):
            if theta_bound(params, geometry_gap, N) * incident_norm <= tol:
                return N
    raise InvalidParams(f"no truncation order below {MAX_TRUNCATION} reaches tol={tol}")


def incident_trace_norms(params: PhysicalParams, interface, order: int = 8) -> float:
    """||p^i||_{L2(G)} + ||d_n p^i||_{L2(G)} along a polyline interface.

    ``interface`` is an (m, 2) array of points ordered along the curve.
    """
    pts = np.asarray(interface, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise InvalidParams("interface must be an (m, 2) array with m >= 2")
    seg = np.diff(pts, axis=0)
    length = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(length == 0):
        raise DegenerateEdge("interface polyline has a zero-length edge")
    normal = np.column_stack([-seg[:, 1], seg[:, 0]]) / length[:, None]
    t, w = gauss_legendre(order)
    a, b = params.alpha, params.beta
    sq_p = 0.0
    sq_dn = 0.0
    for e in range(len(seg)):
        x = pts[e] + np.outer(t, seg[e])
        pinc = np.exp(1j * (a * x[:, 0] - b * x[:, 1]))
        dn = 1j * (a * normal[e, 0] - b * normal[e, 1]) * pinc
        sq_p += length[e] * np.dot(w, np.abs(pinc) ** 2)
        sq_dn += length[e] * np.dot(w, np.abs(dn) ** 2)
    return math.sqrt(sq_p) + math.sqrt(sq_dn)
