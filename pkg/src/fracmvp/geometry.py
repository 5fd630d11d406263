"""Bounded domains described by exact signed distance functions.

Every domain is an open set containing the origin. Points are numpy arrays
whose last axis has length ``dim``; all queries broadcast over leading axes.
Signed distance is negative inside, positive outside and zero on the boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

_NUM_RAY_SAMPLES = 1024


def _as_points(x, dim=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if dim is not None and x.shape[-1] != dim:
        raise DomainError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


def sphere_crossings(origin, dirs, center, radius):
    """Ray parameters where ``origin + t*dirs`` meets the sphere ``|y - center| = radius``.

    Returns an array of shape (M, 2) with the two roots in increasing order,
    NaN where the ray misses the sphere.
    """
    dirs = np.atleast_2d(dirs)
    oc = np.asarray(origin, float) - np.asarray(center, float)
    b = dirs @ oc
    cc = oc @ oc - radius * radius
    disc = b * b - cc
    root = np.sqrt(np.where(disc >= 0, disc, np.nan))
    return np.stack([-b - root, -b + root], axis=-1)


class Domain:
    """Abstract bounded open domain containing the origin."""

    dim: int
    bounding_radius: float

    def signed_dist(self, x):
        raise NotImplementedError

    def contains(self, x):
        return self.signed_dist(x) < 0

    def ray_crossings(self, origin, dirs):
        """Boundary crossings of rays ``origin + t*d``, ``t >= 0``; NaN padded, shape (M, K).

        The default samples the signed distance along each ray and refines sign
        changes by bisection. Subclasses with analytic boundaries override it.
        Extra (non-boundary) entries are harmless to callers, missing ones are not.
        """
        origin = np.asarray(origin, float)
        dirs = np.atleast_2d(dirs)
        t_end = float(np.linalg.norm(origin)) + self.bounding_radius * 1.01 + 1e-12
        ts = np.linspace(0.0, t_end, _NUM_RAY_SAMPLES)
        pts = origin + ts[None, :, None] * dirs[:, None, :]
        sd = self.signed_dist(pts)
        sign = sd < 0
        change = sign[:, 1:] != sign[:, :-1]
        counts = change.sum(axis=1)
        kmax = int(counts.max()) if counts.size else 0
        out = np.full((dirs.shape[0], max(kmax, 1)), np.nan)
        if kmax == 0:
            return out
        rows, cols = np.nonzero(change)
        lo = ts[cols].copy()
        hi = ts[cols + 1].copy()
        d = dirs[rows]
        s_lo = sign[rows, cols]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            s_mid = self.signed_dist(origin + mid[:, None] * d) < 0
            same = s_mid == s_lo
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        slot = np.zeros(len(rows), dtype=int)
        # position of each crossing within its ray
        first = np.r_[True, rows[1:] != rows[:-1]]
        idx = np.arange(len(rows))
        start = np.maximum.accumulate(np.where(first, idx, 0))
        slot = idx - start
        out[rows, slot] = 0.5 * (lo + hi)
        return out

    def normal(self, p):
        """Unit outward normal at boundary point(s) ``p`` via central differences."""
        p = _as_points(p, self.dim)
        h = 1e-6 * max(1.0, self.bounding_radius)
        grad = np.empty_like(p)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            grad[..., i] = (self.signed_dist(p + e) - self.signed_dist(p - e)) / (2 * h)
        return grad / np.linalg.norm(grad, axis=-1, keepdims=True)

    def scaled(self, factor: float) -> "Domain":
        return Scaled(self, factor)

    def to_json(self) -> dict:
        raise DomainError(f"{type(self).__name__} has no JSON representation")


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple
    radius: float

    def __init__(self, center, radius):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(center)))
        object.__setattr__(self, "radius", float(radius))
        if self.radius <= 0:
            raise DomainError("ball radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    @property
    def c(self):
        return np.array(self.center)

    @property
    def bounding_radius(self):
        return float(np.linalg.norm(self.c)) + self.radius

    def signed_dist(self, x):
        x = _as_points(x, self.dim)
        return np.linalg.norm(x - self.c, axis=-1) - self.radius

    def ray_crossings(self, origin, dirs):
        return sphere_crossings(origin, dirs, self.c, self.radius)

    def normal(self, p):
        v = _as_points(p, self.dim) - self.c
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def scaled(self, factor):
        return Ball(self.c * factor, self.radius * factor)

    def to_json(self):
        return {"type": "ball", "center": list(self.center), "radius": self.radius}


class ShiftedBall(Ball):
    """The ball ``B_R(x0)`` with ``|x0| = R - 1``, so that ``dist(0, boundary) = 1``.

    ``x0`` points along ``direction`` (default: first coordinate axis).
    """

    def __init__(self, R, dim=2, direction=None):
        if R <= 1:
            raise DomainError("ShiftedBall needs R > 1")
        e = np.zeros(dim)
        e[0] = 1.0
        if direction is not None:
            e = np.asarray(direction, float)
            e = e / np.linalg.norm(e)
        super().__init__((R - 1.0) * e, R)
        object.__setattr__(self, "R", float(R))

    def to_json(self):
        out = {"type": "shifted_ball", "R": self.R, "n": self.dim}
        return out


class BallUnion(Domain):
    """Finite union of balls with an exact signed distance.

    Inside the union the nearest boundary point is either a radial projection
    onto one sphere or a point on the intersection of two spheres; candidates
    covered by another ball are discarded. Triple intersections are ignored.
    """

    def __init__(self, parts: Sequence[Ball]):
        if not parts:
            raise DomainError("BallUnion needs at least one ball")
        self.parts = tuple(parts)
        dims = {b.dim for b in self.parts}
        if len(dims) != 1:
            raise DomainError("all balls must share a dimension")
        self.dim = dims.pop()
        self._c = np.array([b.center for b in self.parts])
        self._r = np.array([b.radius for b in self.parts])

    @property
    def bounding_radius(self):
        return float(np.max(np.linalg.norm(self._c, axis=1) + self._r))

    def _dists_to_centers(self, x):
        return np.linalg.norm(x[..., None, :] - self._c, axis=-1)

    def _covered(self, q, exclude):
        # q: (..., n) candidate points on sphere(s) ``exclude`` (tuple of part indices)
        d = self._dists_to_centers(q) - self._r
        tol = 1e-12 * max(1.0, self.bounding_radius)
        mask = np.ones(len(self.parts), bool)
        mask[list(exclude)] = False
        if not mask.any():
            return np.zeros(q.shape[:-1], bool)
        return (d[..., mask] < -tol).any(axis=-1)

    def signed_dist(self, x):
        x = _as_points(x, self.dim)
        d = self._dists_to_centers(x) - self._r
        outside = d.min(axis=-1)
        inside_mask = outside < 0
        if not inside_mask.any() or len(self.parts) == 1:
            return outside
        best = np.full(x.shape[:-1], np.inf)
        for i, b in enumerate(self.parts):
            v = x - b.c
            nv = np.linalg.norm(v, axis=-1, keepdims=True)
            fallback = np.zeros(self.dim)
            fallback[0] = 1.0
            u = np.where(nv > 0, v / np.where(nv > 0, nv, 1.0), fallback)
            cands = [b.c + b.radius * u]
            if self.dim == 1:
                cands.append(b.c - b.radius * u)
            for q in cands:
                ok = ~self._covered(q, (i,))
                dist = np.linalg.norm(x - q, axis=-1)
                best = np.where(ok, np.minimum(best, dist), best)
        if self.dim >= 2:
            for i in range(len(self.parts)):
                for j in range(i + 1, len(self.parts)):
                    q = self._circle_nearest(x, i, j)
                    if q is None:
                        continue
                    ok = ~self._covered(q, (i, j))
                    dist = np.linalg.norm(x - q, axis=-1)
                    best = np.where(ok, np.minimum(best, dist), best)
        return np.where(inside_mask, -best, outside)

    def _circle_nearest(self, x, i, j):
        ci, cj = self._c[i], self._c[j]
        ri, rj = self._r[i], self._r[j]
        axis = cj - ci
        L = float(np.linalg.norm(axis))
        if L == 0 or L >= ri + rj or L <= abs(ri - rj):
            return None
        e = axis / L
        a = (L * L + ri * ri - rj * rj) / (2 * L)
        rho = math.sqrt(max(ri * ri - a * a, 0.0))
        cc = ci + a * e
        v = x - cc
        v = v - (v @ e)[..., None] * e
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        # any unit vector orthogonal to e for points on the axis
        perp = np.zeros(self.dim)
        perp[int(np.argmin(np.abs(e)))] = 1.0
        perp = perp - (perp @ e) * e
        perp /= np.linalg.norm(perp)
        u = np.where(nv > 1e-300, v / np.where(nv > 1e-300, nv, 1.0), perp)
        return cc + rho * u

    def ray_crossings(self, origin, dirs):
        return np.concatenate(
            [sphere_crossings(origin, dirs, b.c, b.radius) for b in self.parts], axis=1
        )

    def scaled(self, factor):
        return BallUnion([b.scaled(factor) for b in self.parts])

    def to_json(self):
        return {"type": "union", "parts": [b.to_json() for b in self.parts]}


def _arc_dist(P, C, rad, a0, a1):
    """Distance from 2-D points P to the circular arc centered C, angles [a0, a1] (ccw)."""
    v = P - C
    ang = np.arctan2(v[..., 1], v[..., 0])
    rel = np.mod(ang - a0, 2 * np.pi)
    within = rel <= (a1 - a0)
    d_arc = np.abs(np.linalg.norm(v, axis=-1) - rad)
    e0 = C + rad * np.array([math.cos(a0), math.sin(a0)])
    e1 = C + rad * np.array([math.cos(a1), math.sin(a1)])
    d_end = np.minimum(np.linalg.norm(P - e0, axis=-1), np.linalg.norm(P - e1, axis=-1))
    return np.where(within, d_arc, d_end)


def _seg_dist(P, A, B):
    AB = B - A
    t = np.clip(((P - A) @ AB) / (AB @ AB), 0.0, 1.0)
    return np.linalg.norm(P - (A + t[..., None] * AB), axis=-1)


class SlabComplement(Domain):
    """Smoothed ``(B_r  U  {|x_n| >= a}) ∩ B_L`` with ``a = 1.5*delta``, ``L = 1.5/delta``.

    The concave corners where the ball meets the slab faces and the convex
    corners where the faces meet the outer sphere are rounded with circular
    fillets of radius ``fillet`` (default ``delta/4``), which makes the boundary
    C^{1,1}. The set is rotationally symmetric about the last axis, so the
    signed distance is computed from a planar profile in ``(|x'|, |x_n|)``.
    The result satisfies
    ``(B_r U {|x_n|>=2 delta}) ∩ B_{1/delta}  ⊆  Ω  ⊆  (B_r U {|x_n|>=delta}) ∩ B_{2/delta}``.
    """

    def __init__(self, r, delta, dim=2, fillet=None):
        if dim < 2:
            raise DomainError("SlabComplement needs dim >= 2")
        if not (0 < delta < 0.5 * r / 0.75) or delta >= r:
            # a = 1.5 delta must stay below r with room for the fillet
            raise DomainError(f"delta={delta} incompatible with r={r}")
        self.dim = dim
        self.r = float(r)
        self.delta = float(delta)
        self.a = 1.5 * delta
        self.L = 1.5 / delta
        self.fillet = float(delta / 4 if fillet is None else fillet)
        if not (0 < self.fillet <= delta / 2):
            raise DomainError("fillet must lie in (0, delta/2]")
        if self.L <= self.r + 2 * self.a:
            raise DomainError("outer radius 1.5/delta too small for r")
        r, a, L, f = self.r, self.a, self.L, self.fillet
        self._Cf = np.array([math.sqrt((r + f) ** 2 - (a - f) ** 2), a - f])
        self._Cg = np.array([math.sqrt((L - f) ** 2 - (a + f) ** 2), a + f])
        Cf, Cg = self._Cf, self._Cg
        self._T1 = r * Cf / np.linalg.norm(Cf)
        self._T2 = np.array([Cf[0], a])
        self._T3 = np.array([Cg[0], a])
        self._T4 = L * Cg / np.linalg.norm(Cg)
        self._X = np.array([math.sqrt(r * r - a * a), a])
        self._Y = np.array([math.sqrt(L * L - a * a), a])
        self._th1 = math.atan2(self._T1[1], self._T1[0])
        self._phf = math.atan2(Cf[1], Cf[0])
        self._phg = math.atan2(Cg[1], Cg[0])
        self._rX = float(np.linalg.norm(self._X - Cf))
        self._rY = float(np.linalg.norm(self._Y - Cg))

    @property
    def bounding_radius(self):
        return self.L

    def _profile(self, x):
        x = _as_points(x, self.dim)
        w = np.linalg.norm(x[..., :-1], axis=-1)
        z = np.abs(x[..., -1])
        return np.stack([w, z], axis=-1)

    def _inside_profile(self, P):
        rad = np.linalg.norm(P, axis=-1)
        z = P[..., 1]
        core = (rad < self.r) | ((z > self.a) & (rad < self.L))
        vf = P - self._Cf
        df = np.linalg.norm(vf, axis=-1)
        angf = np.mod(np.arctan2(vf[..., 1], vf[..., 0]), 2 * np.pi)
        fill = (angf >= np.pi / 2) & (angf <= np.pi + self._phf) & (df > self.fillet) & (df < self._rX + 1e-12)
        vg = P - self._Cg
        dg = np.linalg.norm(vg, axis=-1)
        angg = np.arctan2(vg[..., 1], vg[..., 0])
        remove = (angg >= -np.pi / 2) & (angg <= self._phg) & (dg > self.fillet) & (dg < self._rY + 1e-12)
        return (core | fill) & ~remove

    def signed_dist(self, x):
        P = self._profile(x)
        f = self.fillet
        O = np.zeros(2)
        d = np.minimum.reduce([
            _arc_dist(P, O, self.r, 0.0, self._th1),
            _arc_dist(P, self._Cf, f, np.pi / 2, np.pi + self._phf),
            _seg_dist(P, self._T2, self._T3),
            _arc_dist(P, self._Cg, f, -np.pi / 2, self._phg),
            _arc_dist(P, O, self.L, self._phg, np.pi / 2),
        ])
        return np.where(self._inside_profile(P), -d, d)

    def kink_geometry(self):
        """Fillet circles and junction points of the planar (n = 2) boundary, all four mirror images."""
        circles, points = [], []
        for sx in (1, -1):
            for sz in (1, -1):
                m = np.array([sx, sz], float)
                circles += [(m * self._Cf, self.fillet), (m * self._Cg, self.fillet)]
                points += [m * q for q in (self._T1, self._T2, self._T3, self._T4)]
        return circles, points

    def to_json(self):
        out = {"type": "slab_complement", "r": self.r, "delta": self.delta, "n": self.dim}
        if self.fillet != self.delta / 4:
            out["fillet"] = self.fillet
        return out


class Implicit(Domain):
    """Domain given by a user-supplied exact signed distance ``phi``."""

    def __init__(self, phi: Callable, bounding_radius: float, dim: int):
        self.phi = phi
        self.bounding_radius = float(bounding_radius)
        self.dim = int(dim)

    def signed_dist(self, x):
        return np.asarray(self.phi(_as_points(x, self.dim)), float)


class Scaled(Domain):
    """Dilation ``factor * base`` of another domain."""

    def __init__(self, base: Domain, factor: float):
        if factor <= 0:
            raise DomainError("scale factor must be positive")
        self.base = base
        self.factor = float(factor)
        self.dim = base.dim

    @property
    def bounding_radius(self):
        return self.factor * self.base.bounding_radius

    def signed_dist(self, x):
        return self.factor * self.base.signed_dist(_as_points(x, self.dim) / self.factor)

    def ray_crossings(self, origin, dirs):
        return self.factor * self.base.ray_crossings(np.asarray(origin, float) / self.factor, dirs)

    def normal(self, p):
        return self.base.normal(_as_points(p, self.dim) / self.factor)

    def scaled(self, factor):
        return Scaled(self.base, self.factor * factor)

    def to_json(self):
        return {"type": "scaled", "factor": self.factor, "base": self.base.to_json()}


def signed_dist(dom: Domain, x):
    return dom.signed_dist(x)


def inradius_from_origin(dom: Domain) -> float:
    """``dist(0, ∂Ω)``; raises if the origin is not interior."""
    d = float(dom.signed_dist(np.zeros(dom.dim)))
    if d >= 0:
        raise DomainError("origin is not interior to the domain")
    return -d


@dataclass(frozen=True)
class TangentBalls:
    p: np.ndarray
    nu: np.ndarray
    r_int: float
    r_ext: float
    x_int: np.ndarray
    x_ext: np.ndarray


def tangent_balls(dom: Domain, p, tol=1e-9) -> TangentBalls:
    """Interior and exterior tangent balls at a smooth boundary point.

    Radii are the largest for which the tangent ball stays inside (outside)
    the domain, found by bisection on the signed distance of its center. The
    exterior radius is capped at ``10 * bounding_radius``.
    """
    p = _as_points(p, dom.dim)
    scale = max(1.0, dom.bounding_radius)
    if abs(float(dom.signed_dist(p))) > 1e3 * tol * scale:
        raise DomainError("point is not on the boundary")
    nu = dom.normal(p)
    cap_int = 2 * dom.bounding_radius
    cap_ext = 10 * dom.bounding_radius

    def fits(rho, sign):
        c = p + sign * rho * nu
        depth = sign * float(dom.signed_dist(c))
        return depth >= rho - 10 * tol * scale

    def largest(sign, cap):
        if fits(cap, sign):
            return cap
        lo, hi = 0.0, cap
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if fits(mid, sign):
                lo = mid
            else:
                hi = mid
        return lo

    r_int = largest(-1, cap_int)
    r_ext = largest(+1, cap_ext)
    if min(r_int, r_ext) < 1e-6 * scale:
        raise DomainError("boundary point is not C^{1,1} (no tangent ball)")
    return TangentBalls(p, nu, r_int, r_ext, p - r_int * nu, p + r_ext * nu)


def domain_from_json(obj, n=None) -> Domain:
    """Build a domain from its JSON description (dict or JSON text)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "type" not in obj:
        raise DomainError("domain JSON must be an object with a 'type' field")
    kind = obj["type"]
    try:
        if kind == "ball":
            return Ball(obj["center"], obj["radius"])
        if kind == "union":
            parts = [domain_from_json(p, n) for p in obj["parts"]]
            if not all(isinstance(b, Ball) for b in parts):
                raise DomainError("union parts must be balls")
            return BallUnion(parts)
        if kind == "shifted_ball":
            return ShiftedBall(obj["R"], int(obj.get("n", n or 2)))
        if kind == "slab_complement":
            return SlabComplement(obj["r"], obj["delta"], int(obj.get("n", n or 2)), obj.get("fillet"))
        if kind == "scaled":
            return Scaled(domain_from_json(obj["base"], n), obj["factor"])
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed {kind!r} domain: {exc}") from exc
    raise DomainError(f"unknown domain type {kind!r}")
