"""Ray-based quadrature of singular, heavy-tailed kernels over exterior regions.

Integrals are written in polar coordinates about an origin ``o``:

    int_A f(y) K(y) dy = int_{S^{n-1}} int_0^inf 1_A(o + t d) f K t^{n-1} dt dd.

Along each ray the region ``A`` is a finite union of intervals whose endpoints
are sphere and boundary crossings. Every finite interval gets two boundary
layers mapped by ``t = a + h w^{1/(1-s)}``, which cancels the ``(t - a)^{-s}``
singularity of the kernels at a sphere, and the unbounded interval is mapped by
``t = T v^{-1/(2s)}``, which turns the ``t^{-1-2s}`` tail into a bounded
integrand. Distances to the singular sphere are carried as exact offsets from
the crossing so the kernel keeps full relative accuracy next to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_legendre

from .errors import ConvergenceError, DomainError
from .geometry import Domain, sphere_crossings
from .kernels import FracParams, MuMeasure, f_omega_from_dist, poisson_ball_from_gaps, sphere_area

_LAYER_EDGES = np.array([0.0, 1 / 64, 1 / 16, 1 / 4, 1.0])
_TAIL_EDGES = np.array([0.0, 1 / 256, 1 / 64, 1 / 16, 1 / 4, 1 / 2, 1.0])


@dataclass(frozen=True)
class ExteriorQuadScheme:
    """Resolution of the ray quadrature.

    radial_nodes : Gauss-Legendre nodes per radial panel.
    angular_nodes : nodes per angular coordinate (directions for n >= 4).
    boundary_layer_split : fraction of each finite interval given to its two end layers.
    tail_cutoff_policy : "algebraic" is the only policy (exact map of the unbounded ray).
    """

    radial_nodes: int = 16
    angular_nodes: int = 64
    boundary_layer_split: float = 0.5
    tail_cutoff_policy: str = "algebraic"
    seed: int = 12345

    def __post_init__(self):
        if self.radial_nodes < 4 or self.angular_nodes < 4:
            raise DomainError("node counts must be >= 4")
        if not 0 < self.boundary_layer_split < 1:
            raise DomainError("boundary_layer_split must lie in (0, 1)")
        if self.tail_cutoff_policy != "algebraic":
            raise DomainError(f"unknown tail policy {self.tail_cutoff_policy!r}")

    def refined(self) -> "ExteriorQuadScheme":
        return replace(self, radial_nodes=2 * self.radial_nodes, angular_nodes=2 * self.angular_nodes)

    def coarsened(self) -> "ExteriorQuadScheme":
        return replace(self, radial_nodes=max(4, self.radial_nodes // 2),
                       angular_nodes=max(4, self.angular_nodes // 2))


DEFAULT_SCHEME = ExteriorQuadScheme()


@dataclass(frozen=True)
class Region:
    """``{y : |y - center| > radius}`` intersected with the domain, its complement, or everything.

    ``inside`` is True for ``Omega``, False for the complement of ``Omega`` and
    ignored when ``domain`` is None. ``radius = 0`` drops the ball constraint.
    """

    center: tuple
    radius: float
    domain: Optional[Domain] = None
    inside: bool = False

    def contains(self, y):
        y = np.asarray(y, float)
        ok = np.linalg.norm(y - np.asarray(self.center), axis=-1) > self.radius
        if self.domain is not None:
            sd = self.domain.signed_dist(y)
            ok &= (sd < 0) if self.inside else (sd > 0)
        return ok

    @property
    def bounded(self):
        return self.domain is not None and self.inside


def ball_exterior(r, center=None, dim=None) -> Region:
    c = (0.0,) * dim if center is None else tuple(np.asarray(center, float))
    return Region(c, float(r))


def complement(dom: Domain, r: float = 0.0) -> Region:
    """``C Omega``; ``r`` records the ball that must lie inside ``Omega``."""
    return Region((0.0,) * dom.dim, float(r), dom, False)


def excess(dom: Domain, r: float) -> Region:
    """``Omega minus closed B_r``."""
    return Region((0.0,) * dom.dim, float(r), dom, True)


# -- singular weights ---------------------------------------------------------


class Weight:
    """A kernel singular on one sphere; ``value(y, gap)`` gets ``|y-c|^2 - R^2``."""

    center: np.ndarray
    R: float

    def value(self, y, gap):
        raise NotImplementedError


class MuWeight(Weight):
    def __init__(self, m: MuMeasure):
        self.m = m
        self.center = np.zeros(m.params.n)
        self.R = m.r

    def value(self, y, gap):
        return self.m.density_from_gap(y, gap)


class PoissonWeight(Weight):
    """``P_{B_R(c)}(x, .)`` for a fixed interior ``x``."""

    def __init__(self, params: FracParams, center, R, x):
        self.params = params
        self.center = np.asarray(center, float)
        self.R = float(R)
        self.x = np.asarray(x, float)
        d = float(np.linalg.norm(self.x - self.center))
        if d >= self.R:
            raise DomainError("x must lie inside the ball")
        self.inner = (self.R - d) * (self.R + d)

    def value(self, y, gap):
        return poisson_ball_from_gaps(self.params, self.inner, gap, np.linalg.norm(y - self.x, axis=-1))


class FOmegaWeight(Weight):
    """Weight ``c / (|y|^n d^s (2+d)^s)``.

    When the boundary is a single sphere ``(center, R)``, the distance is taken
    from the exact gap; otherwise from the domain's signed distance.
    """

    def __init__(self, params: FracParams, dom: Domain, center=None, R=None):
        self.params = params
        self.dom = dom
        self.center = None if center is None else np.asarray(center, float)
        self.R = R

    def value(self, y, gap):
        if self.center is not None:
            d = gap / (np.linalg.norm(y - self.center, axis=-1) + self.R)
        else:
            d = self.dom.signed_dist(y)
        return f_omega_from_dist(self.params, y, d)


# -- angular rules ------------------------------------------------------------


def angular_rule(n: int, nodes: int, seed: int = 12345, breaks=None):
    """Directions and weights integrating over the unit sphere in R^n.

    n = 2 uses the periodic trapezoid rule, or Gauss-Legendre panels between
    ``breaks`` (angles where the integrand has kinks) when those are given.
    n = 3 uses Gauss-Legendre in the polar cosine times a trapezoid in azimuth.
    Higher dimensions fall back to seeded Monte Carlo directions.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        if breaks is None or len(breaks) == 0:
            th = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
            w = np.full(nodes, 2 * np.pi / nodes)
        else:
            edges = np.unique(np.mod(np.asarray(breaks, float), 2 * np.pi))
            edges = np.r_[edges, edges[0] + 2 * np.pi]
            # the floor scales with nodes so that coarsened rules really are coarser
            per = max(int(math.ceil(nodes / (len(edges) - 1))), max(2, nodes // 16))
            x, wx = roots_legendre(per)
            u = 0.5 * (x + 1)
            # cosine map clusters nodes at the kinks, where chords vanish like a square root
            a, b = edges[:-1, None], edges[1:, None]
            th = (a + (b - a) * 0.5 * (1 - np.cos(np.pi * u))).ravel()
            w = ((b - a) * 0.25 * np.pi * np.sin(np.pi * u) * wx).ravel()
        return np.stack([np.cos(th), np.sin(th)], axis=1), w
    if n == 3:
        m = max(4, nodes // 2)
        x, wx = roots_legendre(m)
        phi = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
        ct = np.repeat(x, nodes)
        st = np.sqrt(1 - ct**2)
        ph = np.tile(phi, m)
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
        w = np.repeat(wx, nodes) * (2 * np.pi / nodes)
        return dirs, w
    rng = np.random.default_rng(seed)
    count = nodes**2
    g = rng.standard_normal((count, n))
    dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    return dirs, np.full(count, sphere_area(n) / count)


def _gl_panels(edges, nodes):
    x, w = roots_legendre(nodes)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (b - a) * x + 0.5 * (b + a)).ravel(), (0.5 * (b - a) * w).ravel()


@dataclass
class _RadialTemplate:
    """Reference nodes for the layer, middle and tail maps at a given resolution."""

    layer_w: np.ndarray
    layer_wt: np.ndarray
    mid_x: np.ndarray
    mid_wt: np.ndarray
    tail_v: np.ndarray
    tail_wt: np.ndarray

    @classmethod
    def build(cls, nodes):
        lw, lwt = _gl_panels(_LAYER_EDGES, nodes)
        mx, mwt = _gl_panels(np.array([0.0, 1.0]), nodes)
        tv, twt = _gl_panels(_TAIL_EDGES, nodes)
        return cls(lw, lwt, mx, mwt, tv, twt)


def _ray_nodes(breaks, unbounded, tpl, s, split, scale, singular=None):
    """Radial nodes on ``[breaks[0], breaks[-1]]`` (plus a tail if ``unbounded``).

    ``singular[k]`` says whether ``breaks[k]`` may carry a kernel singularity;
    only those ends get a graded layer. Returns ``(anchor, offset, weight)``
    with ``t = anchor + offset``.
    """
    q = 1.0 / (1.0 - s)
    anchors, offsets, weights = [], [], []
    edges = list(breaks)
    sing = [True] * len(edges) if singular is None else list(singular)
    if unbounded:
        a = edges[-1]
        edges.append(a + max(abs(a), scale))
        sing.append(False)
    u = tpl.layer_w**q
    du = q * tpl.layer_w ** (q - 1) * tpl.layer_wt
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        L = b - a
        h = 0.5 * split * L
        lo, hi = a, b
        if sing[k]:
            anchors.append(np.full(u.size, a)); offsets.append(h * u); weights.append(h * du)
            lo = a + h
        if sing[k + 1]:
            anchors.append(np.full(u.size, b)); offsets.append(-h * u); weights.append(h * du)
            hi = b - h
        if lo > 0 and hi / lo > 3:
            m = int(math.ceil(math.log2(hi / lo)))
            cuts = lo * (hi / lo) ** (np.arange(m + 1) / m)
        else:
            cuts = np.linspace(lo, hi, 3)
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            t = c0 + (c1 - c0) * tpl.mid_x
            anchors.append(np.full(t.size, a))
            offsets.append(t - a)
            weights.append((c1 - c0) * tpl.mid_wt)
    if unbounded:
        T = edges[-1]
        v = tpl.tail_v
        t = T * v ** (-0.5 / s)
        anchors.append(np.full(v.size, T))
        offsets.append(t - T)
        weights.append(T * (0.5 / s) * v ** (-0.5 / s - 1) * tpl.tail_wt)
    return np.concatenate(anchors), np.concatenate(offsets), np.concatenate(weights)


def ray_nodes(region, origin, t_max, s, scheme, sphere=None, angular_breaks=None, t_breaks=None):
    """Quadrature nodes for ``int_region h(y) dy`` along rays from ``origin``.

    Returns ``(Y, w, gap)``: points, weights (Jacobian included) and, when
    ``sphere = (center, R)`` is given, ``|Y - center|^2 - R^2`` with full relative
    accuracy near that sphere. ``t_breaks`` adds spheres about ``origin``.
    """
    origin = np.asarray(origin, float)
    n = origin.size
    if n == 2:
        angular_breaks = _collect_breaks(origin, region, sphere, angular_breaks)
    dirs, aw = angular_rule(n, scheme.angular_nodes, scheme.seed, angular_breaks)
    tpl = _RadialTemplate.build(scheme.radial_nodes)
    scale = 1.0
    cols = []
    roots = None
    if sphere is not None:
        roots = sphere_crossings(origin, dirs, np.asarray(sphere[0], float), sphere[1])
        cols.append(roots)
        scale = max(scale, sphere[1])
    if region.radius > 0:
        cols.append(sphere_crossings(origin, dirs, np.asarray(region.center), region.radius))
        scale = max(scale, region.radius)
    if region.domain is not None:
        cols.append(region.domain.ray_crossings(origin, dirs))
        scale = max(scale, region.domain.bounding_radius)
    if t_breaks is not None:
        cols.append(np.broadcast_to(np.asarray(t_breaks, float), (len(dirs), len(t_breaks))))
    allb = np.concatenate(cols, axis=1) if cols else np.zeros((len(dirs), 0))
    plain = np.zeros(allb.shape[1], bool)
    if t_breaks is not None:
        plain[-len(t_breaks):] = True
    tol = 1e-14 * scale

    wts, anc, off, ray_id = [], [], [], []
    for i, d in enumerate(dirs):
        b = allb[i]
        ok = np.isfinite(b) & (b > 0)
        if t_max is not None:
            ok &= b < t_max
        b, pl = b[ok], plain[ok]
        order = np.argsort(b, kind="stable")
        b, pl = b[order], pl[order]
        edges = np.r_[0.0, b] if t_max is None else np.r_[0.0, b, t_max]
        sing = np.r_[False, ~pl] if t_max is None else np.r_[False, ~pl, False]
        keep = np.r_[True, np.diff(edges) > tol]
        # a duplicated break stays singular if any copy is
        for k in np.nonzero(~keep)[0]:
            sing[k - 1] |= sing[k]
        edges, sing = edges[keep], sing[keep]
        mids = 0.5 * (edges[:-1] + edges[1:])
        inside = region.contains(origin + mids[:, None] * d) if len(mids) else np.zeros(0, bool)
        tail_in = False
        if t_max is None and not region.bounded:
            far = edges[-1] + max(abs(edges[-1]), 1.0) * 2.0
            tail_in = bool(region.contains(origin + far * d))
        for j in np.nonzero(inside)[0]:
            a_, o_, w_ = _ray_nodes(edges[j:j + 2], False, tpl, s, scheme.boundary_layer_split, scale,
                                    sing[j:j + 2])
            anc.append(a_); off.append(o_); wts.append(w_ * aw[i]); ray_id.append(np.full(a_.size, i))
        if tail_in:
            a_, o_, w_ = _ray_nodes(edges[-1:], True, tpl, s, scheme.boundary_layer_split, scale,
                                    sing[-1:])
            anc.append(a_); off.append(o_); wts.append(w_ * aw[i]); ray_id.append(np.full(a_.size, i))
    if not anc:
        return np.zeros((0, n)), np.zeros(0), (None if sphere is None else np.zeros(0))
    anc = np.concatenate(anc)
    off = np.concatenate(off)
    w = np.concatenate(wts)
    rid = np.concatenate(ray_id)
    t = anc + off
    Y = origin + t[:, None] * dirs[rid]
    w = t ** (n - 1) * w
    gap = None
    if sphere is not None:
        t1, t2 = roots[rid, 0], roots[rid, 1]
        gap = np.where(anc == t1, off, t - t1) * np.where(anc == t2, off, t - t2)
        miss = ~np.isfinite(gap)
        if miss.any():
            dd = np.linalg.norm(Y[miss] - np.asarray(sphere[0], float), axis=-1)
            gap[miss] = (dd - sphere[1]) * (dd + sphere[1])
    return Y, w, gap


def _rays_integral(weight, region, f, origin, t_max, s, scheme, breaks_angular=None, t_breaks=None):
    sphere = None
    if weight is not None and weight.center is not None:
        sphere = (weight.center, weight.R)
    Y, w, gap = ray_nodes(region, origin, t_max, s, scheme, sphere, breaks_angular, t_breaks)
    if len(w) == 0:
        return 0.0
    vals = w if weight is None else w * weight.value(Y, gap)
    if f is not None:
        vals = vals * np.asarray(f(Y), float)
    return float(np.sum(vals))


def integrate_weight(weight, region: Region, f=None, *, s: float, origin=None, t_max=None,
                     scheme: ExteriorQuadScheme = DEFAULT_SCHEME, tol=None, max_refine=3,
                     angular_breaks=None, t_breaks=None):
    """Integrate ``f * weight`` over ``region`` along rays from ``origin``.

    Returns ``(value, err)`` where ``err`` is the change from the next coarser
    scheme. If ``tol`` is given the scheme is doubled until ``err <= tol``.
    """
    if origin is None:
        origin = np.zeros(len(region.center))

    def run(sc):
        return _rays_integral(weight, region, f, origin, t_max, s, sc, angular_breaks, t_breaks)

    coarse = run(scheme.coarsened())
    fine = run(scheme)
    err = abs(fine - coarse) + 1e-14 * abs(fine)
    level = 0
    while tol is not None and err > tol:
        if level >= max_refine:
            raise ConvergenceError(f"quadrature did not reach tol={tol:g} (err {err:.2e})", err)
        scheme = scheme.refined()
        nxt = run(scheme)
        err = abs(nxt - fine) + 1e-14 * abs(nxt)
        fine = nxt
        level += 1
    return fine, err


def ball_angular_breaks(dom, origin):
    """Kink angles of ``theta -> int over a ray`` for unions of discs (n = 2), else None."""
    from .geometry import Ball, BallUnion, Scaled, SlabComplement

    if dom is None or dom.dim != 2:
        return None
    if isinstance(dom, Scaled):
        return ball_angular_breaks(dom.base, np.asarray(origin) / dom.factor)
    if isinstance(dom, SlabComplement):
        origin = np.asarray(origin, float)
        circles, points = dom.kink_geometry()
        out = [a for c, rad in circles for a in _tangent_angles(origin, c, rad)]
        out += [math.atan2(*(q - origin)[::-1]) for q in points]
        return out
    parts = dom.parts if isinstance(dom, BallUnion) else (dom,) if isinstance(dom, Ball) else None
    if parts is None:
        return None
    origin = np.asarray(origin, float)
    out = []
    for b in parts:
        out += _tangent_angles(origin, b.c, b.radius)
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            ci, cj, ri, rj = parts[i].c, parts[j].c, parts[i].radius, parts[j].radius
            L = float(np.hypot(*(cj - ci)))
            if abs(ri - rj) < L < ri + rj:
                e = (cj - ci) / L
                a = (L * L + ri * ri - rj * rj) / (2 * L)
                h = math.sqrt(ri * ri - a * a)
                perp = np.array([-e[1], e[0]])
                for sgn in (1, -1):
                    p = ci + a * e + sgn * h * perp - origin
                    out.append(math.atan2(p[1], p[0]))
    return out or None


def _tangent_angles(origin, center, R):
    v = np.asarray(center, float) - origin
    dist = float(np.hypot(*v))
    if dist <= R:
        return []
    base = math.atan2(v[1], v[0])
    half = math.asin(R / dist)
    return [base - half, base + half]


def _collect_breaks(origin, region, sphere, extra):
    """Angles (n = 2) where the per-ray integral has square-root kinks."""
    out = list(extra) if extra is not None else []
    if sphere is not None:
        out += _tangent_angles(origin, sphere[0], sphere[1])
    if region.radius > 0:
        out += _tangent_angles(origin, region.center, region.radius)
    out += ball_angular_breaks(region.domain, origin) or []
    return out or None


def _check_growth(f, n, s):
    """Reject integrands growing like ``|y|^beta`` with ``beta >= 2s``."""
    rng = np.random.default_rng(7)
    dirs = rng.standard_normal((8, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.array([1e2, 1e3, 1e4, 1e5])
    Y = radii[:, None, None] * dirs[None]
    vals = np.abs(np.asarray(f(Y.reshape(-1, n)), float)).reshape(len(radii), -1).max(axis=1)
    if not np.all(np.isfinite(vals)):
        raise DomainError("integrand is not finite far from the origin")
    if vals[-1] > 0 and vals[0] > 0:
        slope = math.log(vals[-1] / vals[0]) / math.log(radii[-1] / radii[0])
        if slope >= 2 * s - 1e-3 and vals[-1] > 1.0:
            raise DomainError(f"integrand grows like |y|^{slope:.2f}, need exponent < 2s = {2 * s}")


def integrate_mu(m: MuMeasure, region: Region, f: Optional[Callable] = None, *,
                 scheme: ExteriorQuadScheme = DEFAULT_SCHEME, tol=None):
    """``int_region f d mu_r`` with an error estimate; ``f = None`` means ``f = 1``.

    ``region`` must exclude the ball ``B_r`` (build it with :func:`ball_exterior`,
    :func:`complement` or :func:`excess`).
    """
    n = m.params.n
    if region.radius < m.r * (1 - 1e-12) or np.any(np.asarray(region.center) != 0):
        if region.domain is None or not _ball_inside(region.domain, m.r):
            raise DomainError("region must lie outside the ball B_r")
    if f is not None and not region.bounded:
        _check_growth(f, n, m.params.s)
    breaks = ball_angular_breaks(region.domain, np.zeros(n))
    return integrate_weight(MuWeight(m), region, f, s=m.params.s, scheme=scheme, tol=tol,
                            angular_breaks=breaks)


def _ball_inside(dom, r):
    return float(-dom.signed_dist(np.zeros(dom.dim))) >= r * (1 - 1e-9)


def mu_mass(m: MuMeasure, region: Region, *, scheme: ExteriorQuadScheme = DEFAULT_SCHEME, tol=None):
    """``mu_r(region)`` and its error estimate."""
    return integrate_mu(m, region, None, scheme=scheme, tol=tol)
