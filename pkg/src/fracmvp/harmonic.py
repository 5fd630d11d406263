"""Exterior data, Poisson extensions on balls, mollifiers and mean-value checks."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError
from .geometry import Ball, Domain, inradius_from_origin
from .kernels import FracParams, MuMeasure, poisson_ball, poisson_ball_from_gaps, sphere_area
from .quadrature import (DEFAULT_SCHEME, ExteriorQuadScheme, MuWeight, PoissonWeight, Region,
                         ball_angular_breaks, ball_exterior, complement, excess, integrate_weight,
                         ray_nodes)

KINDS = ("bump", "shell", "constant")


def bump_profile(z):
    """``exp(1 - 1/(1 - z^2))`` for ``|z| < 1``, else 0; equals 1 at the center."""
    z = np.asarray(z, float)
    inside = np.abs(z) < 1
    zz = np.where(inside, z, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - zz * zz)), 0.0)


def smooth_step(u):
    """C-infinity step: 0 for ``u <= 0``, 1 for ``u >= 1``."""
    u = np.asarray(u, float)
    a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class Term:
    """One summand of :class:`ExteriorData`.

    bump:     ``height * bump_profile(|y - center| / radius)``
    shell:    ``height * smooth_step((|y - center| - radius) / width)``, a smoothed
              indicator of ``|y - center| >= radius``; ``width`` defaults to ``radius/4``
    constant: ``height`` everywhere
    """

    kind: str
    center: tuple = ()
    radius: float = 0.0
    height: float = 1.0
    width: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown term kind {self.kind!r}")
        if self.kind != "constant" and not self.radius > 0:
            raise DomainError(f"{self.kind} term needs a positive radius")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.kind == "shell" and self.width is None:
            object.__setattr__(self, "width", self.radius / 4)

    @property
    def c(self):
        return np.array(self.center)

    def __call__(self, y):
        y = np.asarray(y, float)
        if self.kind == "constant":
            return np.full(y.shape[:-1], self.height)
        d = np.linalg.norm(y - self.c, axis=-1)
        if self.kind == "bump":
            return self.height * bump_profile(d / self.radius)
        return self.height * smooth_step((d - self.radius) / self.width)

    def to_json(self):
        out = {"kind": self.kind, "height": self.height}
        if self.kind != "constant":
            out.update(center=list(self.center), radius=self.radius)
        if self.kind == "shell":
            out["width"] = self.width
        return out


@dataclass(frozen=True)
class ExteriorData:
    """Dirichlet data ``g = sum(terms)`` on the complement of a domain."""

    terms: tuple = field(default_factory=tuple)

    def __init__(self, terms=()):
        object.__setattr__(self, "terms", tuple(terms))

    def __call__(self, y):
        y = np.asarray(y, float)
        out = np.zeros(y.shape[:-1])
        for t in self.terms:
            out = out + t(y)
        return out

    def __add__(self, other):
        return ExteriorData(self.terms + other.terms)

    def scaled(self, a: float) -> "ExteriorData":
        return ExteriorData([Term(t.kind, t.center, t.radius, a * t.height, t.width) for t in self.terms])

    def dilated(self, lam: float) -> "ExteriorData":
        """``y -> g(y / lam)``."""
        return ExteriorData([Term(t.kind, tuple(lam * np.array(t.center)), lam * t.radius, t.height,
                                  None if t.width is None else lam * t.width) for t in self.terms])

    @property
    def sup_bound(self) -> float:
        """Upper bound for ``sup |g|``."""
        return float(sum(abs(t.height) for t in self.terms))

    @property
    def nonnegative(self) -> bool:
        return all(t.height >= 0 for t in self.terms)

    def to_json(self):
        return {"terms": [t.to_json() for t in self.terms]}


def constant_data(value=1.0) -> ExteriorData:
    return ExteriorData([Term("constant", height=value)])


def data_from_json(obj) -> ExteriorData:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        terms = []
        for t in obj["terms"]:
            kind = t["kind"]
            if kind == "shell-indicator-smoothed":
                kind = "shell"
            if kind == "radial-bump":
                kind = "bump"
            terms.append(Term(kind, tuple(t.get("center", ())), float(t.get("radius", 0.0)),
                              float(t.get("height", 1.0)), t.get("width")))
    except (KeyError, TypeError, AttributeError) as exc:
        raise DomainError(f"malformed exterior data: {exc}") from exc
    return ExteriorData(terms)


@functools.lru_cache(maxsize=None)
def _profile_mass(n: int) -> float:
    val, _ = integrate.quad(lambda r: bump_profile(r) * r ** (n - 1), 0.0, 1.0, epsabs=0, epsrel=1e-13)
    return sphere_area(n) * val


@dataclass(frozen=True)
class Mollifier:
    """``phi_{k,p}(x) = k^n eta(k (x - p))`` with ``eta`` the unit-mass exponential bump."""

    p: tuple
    k: float

    def __init__(self, p, k):
        object.__setattr__(self, "p", tuple(float(v) for v in np.atleast_1d(p)))
        object.__setattr__(self, "k", float(k))
        if not self.k > 0:
            raise DomainError("mollifier sharpness must be positive")

    @property
    def radius(self):
        return 1.0 / self.k

    def as_data(self) -> ExteriorData:
        n = len(self.p)
        return ExteriorData([Term("bump", self.p, 1.0 / self.k, self.k**n / _profile_mass(n))])

    def __call__(self, y):
        return self.as_data()(y)

    def check_outside(self, dom: Domain):
        if float(dom.signed_dist(np.array(self.p))) <= 1.0 / self.k:
            raise DomainError("mollifier support meets the closure of the domain")


# -- integration of exterior data ---------------------------------------------


def _term_integral(term, weight, region, s, scheme, mass_origin, tol=None, local=True):
    """``int_region term * weight`` and its error.

    With ``local=False`` every term is integrated along rays from ``mass_origin``,
    which is what a weight peaked near that origin needs.
    """
    if not local and term.kind != "constant":
        return integrate_weight(weight, region, term, s=s, origin=mass_origin, scheme=scheme, tol=tol)
    if term.kind == "constant":
        v, e = integrate_weight(weight, region, None, s=s, origin=mass_origin, scheme=scheme, tol=tol,
                                angular_breaks=ball_angular_breaks(region.domain, mass_origin))
        return term.height * v, abs(term.height) * e
    if term.kind == "bump":
        return integrate_weight(weight, region, term, s=s, origin=term.c, t_max=term.radius,
                                scheme=scheme, tol=tol)
    # shell = height * (1 - (1 - step)); the second part lives in a ball about the center
    full, e1 = integrate_weight(weight, region, None, s=s, origin=mass_origin, scheme=scheme, tol=tol,
                                angular_breaks=ball_angular_breaks(region.domain, mass_origin))
    inner, e2 = integrate_weight(weight, region, lambda y: 1.0 - term(y) / term.height, s=s,
                                 origin=term.c, t_max=term.radius + term.width,
                                 t_breaks=[term.radius], scheme=scheme, tol=tol)
    return term.height * (full - inner), abs(term.height) * (e1 + e2)


def integrate_data_mu(m: MuMeasure, region: Region, g: ExteriorData, *,
                      scheme: ExteriorQuadScheme = DEFAULT_SCHEME, tol=None):
    """``int_region g d mu_r`` term by term."""
    total = err = 0.0
    origin = np.zeros(m.params.n)
    for term in g.terms:
        v, e = _term_integral(term, MuWeight(m), region, m.params.s, scheme, origin, tol)
        total += v
        err += e
    return total, err


# -- Poisson extension on a ball ---------------------------------------------


_NEAR_SPHERE = 0.1


def _shell_encloses(term, R):
    """True when the shell's data vanish on a neighbourhood of the sphere ``|y| = R``."""
    return term.kind == "shell" and np.linalg.norm(term.c) + R < term.radius * (1 - 1e-12)


def _term_nodes(params, R, term, sc):
    """Shared nodes for one non-constant term: ``(Y, w*h, gap)``.

    For a shell the integrand ``h`` is ``1 - step``, which is compactly supported.
    """
    region = ball_exterior(R, dim=params.n)
    sphere = (np.zeros(params.n), R)
    if term.kind == "bump":
        Y, w, gap = ray_nodes(region, term.c, term.radius, params.s, sc, sphere)
        return Y, w * term(Y), gap
    if _shell_encloses(term, R):
        Y, w, gap = ray_nodes(region, term.c, None, params.s, sc, sphere,
                              t_breaks=[term.radius, term.radius + term.width])
        return Y, w * term(Y) / term.height, gap
    Y, w, gap = ray_nodes(region, term.c, term.radius + term.width, params.s, sc, sphere,
                          t_breaks=[term.radius])
    return Y, w * (1.0 - term(Y) / term.height), gap


def poisson_extend(params: FracParams, R: float, g: ExteriorData, x, *,
                   scheme: ExteriorQuadScheme = DEFAULT_SCHEME, return_error=False):
    """``int_{C B_R} g(y) P_{B_R}(x, y) dy`` at one or many interior points ``x``.

    Constant terms contribute their height exactly (the kernel has unit mass).
    Other terms share one node set about their center for all ``x``. The kernel
    peaks at the boundary point nearest ``x``; where that peak is sharper than
    the shared nodes resolve (``x`` close to the sphere and the term touching
    it) rays from ``x`` itself are used instead.
    """
    x = np.asarray(x, float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    n = params.n
    if X.shape[-1] != n:
        raise DomainError("point dimension mismatch")
    rx = np.linalg.norm(X, axis=-1)
    if np.any(rx >= R):
        raise DomainError("poisson_extend needs |x| < R")
    region = ball_exterior(R, dim=n)
    out = np.zeros(len(X))
    err = np.zeros(len(X))
    inner = (R - rx) * (R + rx)
    for term in g.terms:
        if term.kind == "constant":
            out += term.height
            continue
        clear = (np.linalg.norm(term.c) - term.radius - (term.width or 0.0) > R * (1 + 1e-12)
                 or _shell_encloses(term, R))
        near = np.zeros(len(X), bool) if clear else (R - rx) < _NEAR_SPHERE * R
        far = ~near
        if term.kind == "bump":
            sign, base = 1.0, 0.0
        elif clear:
            sign, base = term.height, 0.0
        else:
            sign, base = -term.height, term.height
        if far.any():
            vals = []
            for sc in (scheme.coarsened(), scheme):
                Y, wh, gap = _term_nodes(params, R, term, sc)
                vals.append(_apply_kernel(params, X[far], inner[far], Y, gap, wh))
            out[far] += base + sign * vals[1]
            err[far] += abs(sign) * np.abs(vals[1] - vals[0])
        for i in np.nonzero(near)[0]:
            v, e = _term_integral(term, PoissonWeight(params, np.zeros(n), R, X[i]), region,
                                  params.s, scheme, X[i], local=False)
            out[i] += v
            err[i] += e
    if single:
        return (out[0], err[0]) if return_error else out[0]
    return (out, err) if return_error else out


def _apply_kernel(params, X, inner, Y, gap, wh, chunk=2048):
    res = np.empty(len(X))
    for lo in range(0, len(X), chunk):
        xs = X[lo:lo + chunk]
        dist = np.linalg.norm(xs[:, None, :] - Y[None, :, :], axis=-1)
        K = poisson_ball_from_gaps(params, inner[lo:lo + chunk, None], gap[None, :], dist)
        res[lo:lo + chunk] = K @ wh
    return res


class HarmonicFunction:
    """An evaluable function together with the open set where it is s-harmonic."""

    harmonic_in: Domain

    def __call__(self, x):
        raise NotImplementedError


class ConstantFunction(HarmonicFunction):
    def __init__(self, value: float, dim: int):
        self.value = float(value)
        self.g = constant_data(value)
        self.harmonic_in = None
        self.dim = dim

    def __call__(self, x):
        x = np.asarray(x, float)
        return np.full(x.shape[:-1], self.value) if x.ndim > 1 else self.value


class PoissonExtension(HarmonicFunction):
    """The s-harmonic function on ``B_R`` equal to ``g`` outside it."""

    def __init__(self, params: FracParams, R: float, g: ExteriorData,
                 scheme: ExteriorQuadScheme = DEFAULT_SCHEME):
        self.params = params
        self.R = float(R)
        self.g = g
        self.scheme = scheme
        self.harmonic_in = Ball(np.zeros(params.n), R)

    def __call__(self, x):
        x = np.asarray(x, float)
        X = np.atleast_2d(x)
        inside = np.linalg.norm(X, axis=-1) < self.R
        out = np.asarray(self.g(X), float).copy()
        if inside.any():
            out[inside] = poisson_extend(self.params, self.R, self.g, X[inside], scheme=self.scheme)
        return out if x.ndim > 1 else float(out[0])


def verify_mvp(params: FracParams, dom_of_harmonicity: Optional[Domain], u, r: float, *,
               scheme: ExteriorQuadScheme = DEFAULT_SCHEME) -> float:
    """``|u(0) - int_{C B_r} u d mu_r|`` plus the quadrature error estimate.

    ``u`` is either a :class:`HarmonicFunction` carrying exterior data ``g``
    (the integral is split into the part inside the harmonicity domain, where
    ``u`` itself is evaluated, and the part outside, where ``g`` is used) or a
    plain callable integrated over all of ``C B_r``.
    ``r`` may equal the inradius of the harmonicity domain.
    """
    n = params.n
    if not r > 0:
        raise DomainError("r must be positive")
    if dom_of_harmonicity is not None:
        rin = inradius_from_origin(dom_of_harmonicity)
        if r > rin * (1 + 1e-12):
            raise DomainError(f"B_r with r={r} is not contained in the harmonicity domain (inradius {rin})")
    m = MuMeasure(params, r)
    u0 = float(np.asarray(u(np.zeros(n))))
    g = getattr(u, "g", None)
    if g is None or dom_of_harmonicity is None:
        from .quadrature import integrate_mu
        total, err = integrate_mu(m, ball_exterior(r, dim=n), u, scheme=scheme)
        return abs(u0 - total) + err
    dom = dom_of_harmonicity
    far, err = integrate_data_mu(m, complement(dom, r), g, scheme=scheme)
    near = 0.0
    if r < inradius_from_origin(dom) * (1 - 1e-12) or not isinstance(dom, Ball):
        breaks = ball_angular_breaks(dom, np.zeros(n))
        near, e2 = integrate_weight(MuWeight(m), excess(dom, r), u, s=params.s, scheme=scheme,
                                    angular_breaks=breaks)
        err += e2
    return abs(u0 - far - near) + err


def mollified_poisson(params: FracParams, varpi: Domain, moll: Mollifier, x, wos_cfg):
    """WoS estimate of ``u_{k,p}(x)``, the s-harmonic function in ``varpi`` with data ``phi_{k,p}``."""
    from .wos import wos_solve

    moll.check_outside(varpi)
    return wos_solve(params, varpi, moll.as_data(), x, wos_cfg, next_event=True)


def mollifier_convergence(params: FracParams, varpi: Domain, p, x, ks: Sequence[int], wos_cfg, *,
                          reference: Optional[float] = None) -> dict:
    """``u_{k,p}(x)`` over ``ks`` with an empirical convergence rate.

    Every ``k`` reuses the same random stream, so differences between
    successive ``k`` are far less noisy than the values. The rate is the
    log-log slope of the successive differences ``|u_k - u_k'|``; no rate is
    asserted. Errors against ``reference`` (the closed-form kernel on a ball,
    by default) are reported per row. Returns ``{"rows", "reference", "rate"}``.
    """
    ks = sorted(int(k) for k in ks)
    p = np.asarray(p, float)
    if reference is None and isinstance(varpi, Ball):
        reference = float(poisson_ball(params, varpi.c, varpi.radius, x, p))
    rows = []
    for k in ks:
        est = mollified_poisson(params, varpi, Mollifier(p, k), x, wos_cfg)
        rows.append({"k": k, "value": est.mean, "stderr": est.stderr,
                     "error": None if reference is None else est.mean - reference})
    kk, dev = ks[:-1], [abs(a["value"] - b["value"]) for a, b in zip(rows, rows[1:])]
    rate = None
    good = [(k, d) for k, d in zip(kk, dev) if d > 0]
    if len(good) >= 2:
        lk, ld = np.log([g[0] for g in good]), np.log([g[1] for g in good])
        rate = float(-np.polyfit(lk, ld, 1)[0])
    return {"rows": rows, "reference": reference, "rate": rate}


def averaged_identity_check(params: FracParams, dom: Domain, moll: Mollifier, r: Optional[float] = None, *,
                            scheme: ExteriorQuadScheme = DEFAULT_SCHEME) -> float:
    """``|int_{C Omega} phi / ((|y|^2 - r^2)^s |y|^n) dy - 1 / ((|p|^2 - r^2)^s |p|^n)|``.

    ``r`` defaults to the inradius of ``dom``.
    """
    n, s = params.n, params.s
    if r is None:
        r = inradius_from_origin(dom)
    p = np.array(moll.p)
    pn = float(np.linalg.norm(p))
    if pn <= r:
        raise DomainError("need |p| > r")
    if float(dom.signed_dist(p)) <= 0:
        raise DomainError("p must lie outside the domain")
    m = MuMeasure(params, r)
    scale = params.c * r ** (2 * s)
    (term,) = moll.as_data().terms
    val, _ = integrate_weight(MuWeight(m), complement(dom, r), term, s=s, origin=term.c,
                              t_max=term.radius, scheme=scheme)
    target = 1.0 / (((pn - r) * (pn + r)) ** s * pn**n)
    return abs(val / scale - target)
