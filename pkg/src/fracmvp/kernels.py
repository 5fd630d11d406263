"""Mean-value density, ball Poisson kernels and the weight ``F_Omega``.

All kernels are evaluated in log space, because ``(|y|^2 - r^2)^s`` underflows
next to the sphere while ``|y|^n`` overflows far from it.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, roots_legendre

from .errors import ConvergenceError, DomainError


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2) / gamma(n / 2)


@dataclass(frozen=True)
class FracParams:
    """Dimension ``n``, order ``s`` and the normalizing constant ``c = c(n, s)``."""

    n: int
    s: float
    c: float

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("dimension must be >= 1")
        if not 0.0 < self.s < 1.0:
            raise DomainError("order s must lie in (0, 1)")
        if not self.c > 0:
            raise DomainError("normalizing constant must be positive")


def _radial_mass(s: float, nodes: int) -> float:
    """``int_1^inf (rho^2 - 1)^{-s} rho^{-1} d rho`` by Gauss-Legendre after smoothing maps.

    With ``u = rho^2 - 1`` the integral is ``(1/2) int_0^inf u^{-s} / (1 + u) du``.
    On ``[0, 1]`` set ``u = w^{1/(1-s)}``; on ``[1, inf)`` set ``u = v^{-1/s}``.
    Both integrands are then bounded; graded panels absorb the fractional powers.
    """
    x, w = roots_legendre(nodes)
    q = 1.0 / (1.0 - s)
    edges = np.array([0.0, 1 / 256, 1 / 64, 1 / 16, 1 / 4, 1.0])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t = 0.5 * (b - a) * x + 0.5 * (b + a)
        wt = 0.5 * (b - a) * w
        total += np.sum(wt * q / (1.0 + t**q))
        total += np.sum(wt / s / (t ** (1.0 / s) + 1.0))
    return 0.5 * total


def calibrate_constant(n: int, s: float, tol: float = 1e-10) -> FracParams:
    """Choose ``c(n, s)`` so that ``mu_1`` has unit mass on the complement of ``B_1``.

    The radial integral is evaluated at two resolutions; if they disagree by
    more than ``tol`` (relative) a :class:`ConvergenceError` is raised.
    """
    n = int(n)
    s = float(s)
    if n < 1 or not 0 < s < 1 or not tol > 0:
        raise DomainError("need n >= 1, 0 < s < 1 and tol > 0")
    fine = _radial_mass(s, 48)
    coarse = _radial_mass(s, 24)
    resid = abs(fine - coarse) / fine
    if resid > tol:
        raise ConvergenceError(f"radial normalization did not converge (rel. change {resid:.2e})", resid)
    return FracParams(n, s, 1.0 / (sphere_area(n) * fine))


@functools.lru_cache(maxsize=None)
def frac_params(n: int, s: float) -> FracParams:
    """Cached :func:`calibrate_constant` at default tolerance."""
    return calibrate_constant(n, s)


def _norm(v):
    return np.linalg.norm(v, axis=-1)


def _gap(y, center, R):
    # |y - c|^2 - R^2 written as a product to keep relative accuracy at the sphere
    d = _norm(np.asarray(y, float) - center)
    return (d - R) * (d + R), d


@dataclass(frozen=True)
class MuMeasure:
    """The mean-value measure ``mu_r`` on the complement of ``B_r``."""

    params: FracParams
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError("radius must be positive")

    def density(self, y):
        return mu_density(self, y)

    def density_from_gap(self, y, gap):
        """Density given ``|y|^2 - r^2`` computed elsewhere (possibly more accurately)."""
        p = self.params
        logv = (math.log(p.c) + 2 * p.s * math.log(self.r) - p.s * np.log(gap)
                - p.n * np.log(_norm(y)))
        return np.exp(logv)


def mu_density(m: MuMeasure, y):
    """``c r^{2s} / ((|y|^2 - r^2)^s |y|^n)`` for ``|y| > r``; vectorized over leading axes."""
    y = np.asarray(y, float)
    gap, d = _gap(y, 0.0, m.r)
    if np.any(d <= m.r):
        raise DomainError("mu_r density is undefined on the closed ball of radius r")
    return m.density_from_gap(y, gap)


def poisson_ball(params: FracParams, center, R, x, y):
    """Fractional Poisson kernel of ``B_R(center)`` at interior ``x`` and exterior ``y``.

    Broadcasts ``x`` against ``y``.
    """
    center = np.asarray(center, float)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    gx, dx = _gap(x, center, R)
    gy, dy = _gap(y, center, R)
    if np.any(dx >= R):
        raise DomainError("x must lie inside the open ball")
    if np.any(dy <= R):
        raise DomainError("y must lie outside the closed ball")
    return poisson_ball_from_gaps(params, -gx, gy, _norm(x - y))


def poisson_ball_from_gaps(params, inner, outer, dist):
    """Kernel value from ``R^2 - |x-c|^2``, ``|y-c|^2 - R^2`` and ``|x - y|``."""
    s, n = params.s, params.n
    return np.exp(math.log(params.c) + s * np.log(inner) - s * np.log(outer) - n * np.log(dist))


def f_omega(params: FracParams, dom, y):
    """Un-normalized weight ``c / (|y|^n d^s (2 + d)^s)`` with ``d = dist(y, boundary)``."""
    y = np.asarray(y, float)
    d = np.asarray(dom.signed_dist(y), float)
    if np.any(d <= 0):
        raise DomainError("f_omega needs y outside the closure of the domain")
    return f_omega_from_dist(params, y, d)


def f_omega_from_dist(params, y, d):
    s, n = params.s, params.n
    return np.exp(math.log(params.c) - n * np.log(_norm(y)) - s * np.log(d) - s * np.log(2.0 + d))
