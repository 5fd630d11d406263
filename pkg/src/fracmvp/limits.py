"""Boundary behaviour of Poisson kernels and the ball-detection criterion.

The profile ``Psi(t)`` follows ``q_t = p + t nu(p)`` out of the domain and
multiplies the kernel ``P(x0, q_t)`` by ``dist(q_t)^s`` (variant "plain") or by
``|q_t - x0|^n dist(q_t)^s`` (variant "normalized"). On balls the kernel is
closed form; otherwise it is the WoS exit density against a mollifier finer
than ``t``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .geometry import Ball, Domain, inradius_from_origin, tangent_balls
from .harmonic import Mollifier
from .kernels import FracParams, MuMeasure, poisson_ball
from .quadrature import (DEFAULT_SCHEME, ExteriorQuadScheme, FOmegaWeight, ball_exterior, complement,
                         excess, integrate_weight, mu_mass)
from .wos import WosConfig, exit_density

VARIANTS = ("normalized", "plain")


@dataclass
class BoundaryLimitProfile:
    p: list
    nu: list
    t_grid: list
    values: list
    stderr: list
    extrapolated_limit: float
    limit_stderr: float
    bracket: tuple
    variant: str = "normalized"
    method: str = "closed-form"
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def rows(self):
        """CSV rows ``(t, psi, stderr, bracket_lo, bracket_hi)``."""
        lo, hi = self.bracket
        return [{"t": t, "psi": v, "stderr": e, "bracket_lo": lo, "bracket_hi": hi}
                for t, v, e in zip(self.t_grid, self.values, self.stderr)]


def richardson(t1, v1, t2, v2):
    """Two-point extrapolation to ``t = 0`` assuming ``v = L + a t``."""
    return (t1 * v2 - t2 * v1) / (t1 - t2)


def tangent_bracket(params: FracParams, dom: Domain, x0, p):
    """Two-sided bounds for ``lim dist^s P(x0, q)`` from the tangent balls at ``p``.

    Returns ``(lower, upper, flags)``. The lower bound is vacuous (0, flagged)
    when its base is not positive.
    """
    x0 = np.asarray(x0, float)
    tb = tangent_balls(dom, p)
    p = tb.p
    diff = p - x0
    dist = float(np.linalg.norm(diff))
    if dist == 0:
        raise DomainError("x0 must differ from p")
    proj = float(tb.nu @ diff)
    c, s, n = params.c, params.s, params.n
    flags = []
    base = 2 * tb.r_int * proj - dist**2
    if base > 0:
        lower = c / (2**s * tb.r_int**s * dist**n) * base**s
    else:
        lower = 0.0
        flags.append("lower bound vacuous (non-positive base)")
    upper = c / (2**s * tb.r_ext**s * dist**n) * (2 * tb.r_ext * proj + dist**2) ** s
    return lower, upper, flags


def _ball_kernel(params, dom: Ball, x0, q):
    return float(poisson_ball(params, dom.c, dom.radius, x0, q))


def boundary_profile(params: FracParams, dom: Domain, x0, p, t_grid: Sequence[float],
                     cfg: Optional[WosConfig] = None, *, variant: str = "normalized",
                     stream: int = 0) -> BoundaryLimitProfile:
    """``Psi`` on ``t_grid`` with a Richardson limit from the two smallest ``t``."""
    if variant not in VARIANTS:
        raise DomainError(f"variant must be one of {VARIANTS}")
    x0 = np.asarray(x0, float)
    if not float(dom.signed_dist(x0)) < 0:
        raise DomainError("x0 must be interior")
    p = np.asarray(p, float)
    nu = dom.normal(p)
    t_grid = sorted((float(t) for t in t_grid), reverse=True)
    if len(t_grid) < 2 or t_grid[-1] <= 0:
        raise DomainError("t_grid needs at least two positive values")
    cfg = cfg or WosConfig()
    closed = isinstance(dom, Ball)
    vals, errs = [], []
    for i, t in enumerate(t_grid):
        q = p + t * nu
        d = float(dom.signed_dist(q))
        if d <= 0:
            raise DomainError(f"t = {t} lands inside the domain")
        norm = d**params.s
        if variant == "normalized":
            norm *= float(np.linalg.norm(q - x0)) ** params.n
        if closed:
            vals.append(_ball_kernel(params, dom, x0, q) * norm)
            errs.append(0.0)
        else:
            probe = Mollifier(q, math.ceil(4.0 / t))
            est = exit_density(params, dom, x0, probe, cfg, stream=stream + i).check()
            vals.append(est.mean * norm)
            errs.append(est.stderr * norm)
    t1, t2 = t_grid[-2], t_grid[-1]
    limit = richardson(t1, vals[-2], t2, vals[-1])
    a, b = t2 / (t1 - t2), t1 / (t1 - t2)
    lim_err = math.hypot(a * errs[-2], b * errs[-1])
    lo, hi, flags = tangent_bracket(params, dom, x0, p)
    if variant == "normalized":
        # bracket bounds dist^s P; the normalized profile carries |p - x0|^n in the limit
        f = float(np.linalg.norm(p - x0)) ** params.n
        lo, hi = lo * f, hi * f
    if not closed and abs(vals[-1] - vals[-2]) < 2 * math.hypot(errs[-1], errs[-2]):
        flags.append("statistical error dominates the trend")
    return BoundaryLimitProfile(p.tolist(), nu.tolist(), t_grid, vals, errs, float(limit), lim_err,
                                (lo, hi), variant, "closed-form" if closed else "wos", flags)


def shifted_ball_limit(params: FracParams, R: float) -> float:
    """Closed-form boundary limit for the ball of radius ``R`` whose inradius from 0 is 1."""
    s = params.s
    return params.c * (2 * R - 1) ** s / (2**s * R**s)


def c_frak(params: FracParams, dom: Domain, *, scheme: ExteriorQuadScheme = DEFAULT_SCHEME,
           tol: float = 1e-3):
    """``int_{C Omega} c / (|y|^n d^s (2 + d)^s) dy`` and its error; needs inradius 1."""
    ir = inradius_from_origin(dom)
    if abs(ir - 1.0) > tol:
        raise DomainError(f"inradius from the origin is {ir:.6g}; rescale the domain to inradius 1")
    if isinstance(dom, Ball):
        w = FOmegaWeight(params, dom, dom.c, dom.radius)
        return integrate_weight(w, ball_exterior(dom.radius, dom.c), s=params.s, origin=dom.c, scheme=scheme)
    w = FOmegaWeight(params, dom)
    return integrate_weight(w, complement(dom), s=params.s, scheme=scheme)


CAVEAT = ("a boundary limit that is the same at every boundary point does not by itself imply a ball: "
          "balls whose inradius from the origin is 1 but which are not centred there also have a "
          "constant limit, with a different value")


def boundary_points(dom: Domain, count: int = 8, offset: float = 0.0):
    """``count`` boundary points on equally spaced rays from the origin (first crossing)."""
    from .quadrature import angular_rule

    n = dom.dim
    if n == 2:
        th = offset + 2 * math.pi * np.arange(count) / count
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        dirs = angular_rule(n, 2 * count)[0][:count]
    return _first_exit(dom, dirs)


def _first_exit(dom, dirs):
    # ray_crossings may list crossings that are not on the boundary; keep true ones
    cr = dom.ray_crossings(np.zeros(dom.dim), dirs)
    pts = cr[..., None] * dirs[:, None, :]
    on = np.abs(dom.signed_dist(np.nan_to_num(pts))) < 1e-9 * max(1.0, dom.bounding_radius)
    t = np.nanmin(np.where((cr > 0) & on, cr, np.nan), axis=1)
    return t[:, None] * dirs


def find_touch_point(dom: Domain, tol: float = 1e-6):
    """A boundary point at distance ``inradius`` from the origin."""
    from scipy.optimize import minimize_scalar

    ir = inradius_from_origin(dom)
    n = dom.dim
    pts = boundary_points(dom, 720 if n == 2 else 64)
    r = np.linalg.norm(pts, axis=1)
    i = int(np.nanargmin(r))
    p = pts[i]
    if n == 2:
        th0 = math.atan2(p[1], p[0])

        def rad(th):
            d = np.array([[math.cos(th), math.sin(th)]])
            return float(np.linalg.norm(_first_exit(dom, d)[0]))

        h = 2 * math.pi / 720
        th = minimize_scalar(rad, bounds=(th0 - h, th0 + h), method="bounded", options={"xatol": 1e-12}).x
        p = rad(th) * np.array([math.cos(th), math.sin(th)])
    if abs(float(np.linalg.norm(p)) - ir) > max(tol, 1e-3 * ir):
        raise DomainError("no boundary point found on the inscribed sphere")
    return p


@dataclass
class BallVerdict:
    consistent_with_ball: bool
    expected_limit: float
    limits: list
    limit_stderr: list
    points: list
    mu_excess: float
    mu_excess_err: float
    tolerance: float
    caveat: str = CAVEAT

    def to_dict(self):
        d = asdict(self)
        d["verdict"] = "consistent-with-ball" if self.consistent_with_ball else "not-consistent-with-ball"
        return d


def ball_detect(params: FracParams, dom: Domain, cfg: Optional[WosConfig] = None, *,
                t_grid: Sequence[float] = (0.04, 0.02), n_points: int = 8,
                scheme: ExteriorQuadScheme = DEFAULT_SCHEME, model_tol: float = 0.01) -> BallVerdict:
    """Test the two ball criteria: constant limit ``c/2^s`` and ``mu_1(Omega minus B_1) = 0``.

    The verdict tolerance on each limit is 3 standard errors plus ``model_tol``
    (relative); the excess mass must not exceed ``model_tol`` plus its
    quadrature error.
    """
    ir = inradius_from_origin(dom)
    if abs(ir - 1.0) > 1e-3:
        raise DomainError("ball detection needs inradius 1 from the origin")
    touch = find_touch_point(dom)
    pts = [touch] + list(boundary_points(dom, n_points, offset=0.3))
    expected = params.c / 2**params.s
    lims, errs = [], []
    ok = True
    for i, p in enumerate(pts):
        prof = boundary_profile(params, dom, np.zeros(dom.dim), p, t_grid, cfg, stream=100 * i)
        lims.append(prof.extrapolated_limit)
        errs.append(prof.limit_stderr)
        if abs(prof.extrapolated_limit - expected) > 3 * prof.limit_stderr + model_tol * expected:
            ok = False
    mu_ex, mu_err = mu_mass(MuMeasure(params, 1.0), excess(dom, 1.0), scheme=scheme)
    if mu_ex > model_tol + mu_err:
        ok = False
    return BallVerdict(ok, expected, lims, errs, [list(map(float, p)) for p in pts], mu_ex, mu_err,
                       model_tol)
