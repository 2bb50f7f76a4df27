"""Grating profiles and the periodic-cell geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidGeometry

PERIODIC_TOL = 1e-12


class Profile:
    """Interface curve x2 = f(x1) over one period."""

    period: float

    def __call__(self, x):
        raise NotImplementedError

    @property
    def kinks(self) -> tuple:
        """Abscissae that must be mesh vertices (slope discontinuities, samples)."""
        return ()

    @property
    def corners(self) -> tuple:
        """Abscissae in [0, period) where the slope jumps."""
        return ()

    def lipschitz(self) -> float:
        raise NotImplementedError

    def curvature_bound(self) -> float:
        """Upper bound on |f''| away from kinks."""
        return 0.0

    def max_value(self) -> float:
        return self._extreme(+1)

    def min_value(self) -> float:
        return -self._extreme(-1)

    def _extreme(self, sign):
        xs = np.linspace(0.0, self.period, 4097)
        ys = sign * self(xs)
        i = int(np.argmax(ys))
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, len(xs) - 1)]
        res = minimize_scalar(lambda x: -sign * float(self(x)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-13})
        return max(float(ys[i]), sign * float(self(res.x)))


@dataclass(frozen=True)
class FlatProfile(Profile):
    period: float
    level: float = 0.0

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.level)

    def lipschitz(self):
        return 0.0

    def max_value(self):
        return self.level

    def min_value(self):
        return self.level


@dataclass(frozen=True)
class PiecewiseLinearProfile(Profile):
    """Polyline through ``points`` spanning [0, period] with f(0) = f(period)."""

    points: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise InvalidGeometry("profile needs at least two (x1, x2) samples")
        if pts[0, 0] != 0.0:
            raise InvalidGeometry("profile samples must start at x1 = 0")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise InvalidGeometry("profile abscissae must be strictly increasing")
        if abs(pts[0, 1] - pts[-1, 1]) > PERIODIC_TOL:
            raise InvalidGeometry("profile must satisfy f(0) = f(period)")
        object.__setattr__(self, "points", tuple(map(tuple, pts.tolist())))

    @property
    def period(self):
        return self.points[-1][0]

    @property
    def _xy(self):
        pts = np.asarray(self.points)
        return pts[:, 0], pts[:, 1]

    def __call__(self, x):
        xs, ys = self._xy
        return np.interp(x, xs, ys)

    @property
    def kinks(self):
        return tuple(p[0] for p in self.points)

    @property
    def corners(self):
        xs, ys = self._xy
        slopes = np.diff(ys) / np.diff(xs)
        out = []
        if abs(slopes[0] - slopes[-1]) > 1e-12:
            out.append(0.0)
        for i in range(1, len(slopes)):
            if abs(slopes[i] - slopes[i - 1]) > 1e-12:
                out.append(float(xs[i]))
        return tuple(out)

    def lipschitz(self):
        xs, ys = self._xy
        return float(np.max(np.abs(np.diff(ys) / np.diff(xs))))

    def max_value(self):
        return float(max(p[1] for p in self.points))

    def min_value(self):
        return float(min(p[1] for p in self.points))


@dataclass(frozen=True)
class TrigProfile(Profile):
    """f(x) = offset + sum of amp * sin/cos(freq * x) terms."""

    period: float
    offset: float
    terms: tuple = field(default=())  # (amplitude, "sin" | "cos", frequency)

    def __post_init__(self):
        for amp, kind, freq in self.terms:
            if kind not in ("sin", "cos"):
                raise InvalidGeometry(f"unknown trig term {kind!r}")
        if abs(float(self(0.0)) - float(self(self.period))) > PERIODIC_TOL:
            raise InvalidGeometry("profile must satisfy f(0) = f(period)")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.full_like(x, self.offset)
        for amp, kind, freq in self.terms:
            y = y + amp * (np.sin(freq * x) if kind == "sin" else np.cos(freq * x))
        return y

    def lipschitz(self):
        return float(sum(abs(a * f) for a, _, f in self.terms))

    def curvature_bound(self):
        return float(sum(abs(a * f * f) for a, _, f in self.terms))


@dataclass(frozen=True)
class GeometrySpec:
    """Periodic cell [0, period] x [-b, b] split by the interface profile."""

    period: float
    b: float
    b_prime: float
    profile: Profile

    def __post_init__(self):
        if not self.period > 0:
            raise InvalidGeometry("period must be positive")
        if abs(self.profile.period - self.period) > PERIODIC_TOL * self.period:
            raise InvalidGeometry("profile period does not match the cell period")
        fmax = self.profile.max_value()
        fmin = self.profile.min_value()
        if not self.b > self.b_prime:
            raise InvalidGeometry(f"need b > b' (b={self.b}, b'={self.b_prime})")
        if self.b_prime < fmax - 1e-12:
            raise InvalidGeometry(f"need b' >= max f = {fmax}")
        if not -self.b < fmin:
            raise InvalidGeometry("solid region is empty (min f <= -b)")
        if not math.isfinite(self.profile.lipschitz()):
            raise InvalidGeometry("profile is not Lipschitz")

    @property
    def gap(self) -> float:
        return self.b - self.b_prime

    @classmethod
    def from_profile(cls, profile: Profile, b: float | None = None,
                     margin: float = 0.5) -> "GeometrySpec":
        """b' = max f and, unless given, b = b' + margin."""
        b_prime = profile.max_value()
        if b is None:
            b = b_prime + margin
        return cls(profile.period, b, b_prime, profile)


def flat_profile(period: float, level: float = 0.0) -> FlatProfile:
    return FlatProfile(period, level)


def sawtooth_profile(period: float, teeth: int = 1, height: float = 0.5) -> PiecewiseLinearProfile:
    """Symmetric triangle wave with ``teeth`` peaks of the given height."""
    pts = []
    for k in range(teeth):
        x0 = period * k / teeth
        pts.append((x0, 0.0))
        pts.append((x0 + period / (2 * teeth), height))
    pts.append((period, 0.0))
    return PiecewiseLinearProfile(tuple(pts))


def example4_profile() -> TrigProfile:
    return TrigProfile(2 * math.pi, 0.1, ((0.15, "sin", 1.0), (0.35, "cos", 5.0)))
