"""Walk-on-spheres for the fractional Dirichlet problem.

From a point ``z`` inside the domain the walk jumps to a sample of the
mean-value measure of the ball ``B_rho(z)`` with ``rho`` a fixed fraction of
the distance to the boundary; the first landing point outside the domain is
scored with the exterior data. The radial part of each jump is drawn from a
tabulated inverse CDF built by quadrature.
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_legendre

from .errors import ConvergenceError, DomainError, StatisticalQualityError
from .geometry import Domain
from .kernels import FracParams

# -- radial exit law ----------------------------------------------------------


class RadialExitSampler:
    """Inverse CDF of ``U = |Y - z| / rho`` for a jump out of ``B_rho(z)``.

    ``U`` has density ``proportional to (u^2 - 1)^{-s} / u`` on ``(1, inf)``,
    independent of ``n`` once the radial Jacobian is included. The table maps
    ``logit(P(U > u))`` to ``log(u - 1)``; both ends are asymptotically linear,
    so the interpolant is extended linearly beyond the table.
    """

    def __init__(self, s: float, step: float = 0.05, x_range=(-40.0, 40.0), tol: float = 1e-5):
        self.s = float(s)
        self._fine = self._build(step, x_range)
        coarse = self._build(2 * step, x_range)
        z_test = np.linspace(self._fine[0][0], self._fine[0][-1], 2001)
        resid = float(np.max(np.abs(self._eval(self._fine, z_test) - self._eval(coarse, z_test))))
        if resid > tol:
            raise ConvergenceError(f"radial inverse CDF not converged (max change {resid:.2e})", resid)
        self.table_residual = resid

    def _tail_table(self, x):
        """``P(U > 1 + e^x)`` and ``P(U <= 1 + e^x)`` on the grid ``x``.

        With ``w = u^2 - 1`` the unnormalized tail is ``int_w^inf t^{-s}/(1+t) dt``.
        Pieces between grid points are integrated in ``log t`` by Gauss-Legendre;
        the two ends use convergent series.
        """
        s = self.s
        e = np.exp(x)
        w = e * (2.0 + e)
        lw = np.log(w)
        gx, gw = roots_legendre(12)
        a, b = lw[:-1, None], lw[1:, None]
        lt = 0.5 * (b - a) * gx + 0.5 * (a + b)
        t = np.exp(lt)
        pieces = np.sum(0.5 * (b - a) * gw * t ** (1 - s) / (1 + t), axis=1)
        w0, w1 = w[0], w[-1]
        head = sum((-1) ** k * w0 ** (k + 1 - s) / (k + 1 - s) for k in range(6))
        tail = sum((-1) ** k * w1 ** (-k - s) / (k + s) for k in range(6))
        # accumulate from each end separately to avoid cancellation in the far tails
        lower = head + np.r_[0.0, np.cumsum(pieces)]
        upper = tail + np.r_[np.cumsum(pieces[::-1])[::-1], 0.0]
        total = lower[-1] + tail
        return upper / total, lower / total

    def _build(self, step, x_range):
        x = np.arange(x_range[0], x_range[1] + step / 2, step)
        up, lo = self._tail_table(x)
        z = np.log(up) - np.log(lo)
        order = np.argsort(z)
        z, xs = z[order], x[order]
        return z, xs, PchipInterpolator(z, xs, extrapolate=False)

    def _eval(self, table, z):
        zt, xt, interp = table
        z = np.asarray(z, float)
        out = interp(np.clip(z, zt[0], zt[-1]))
        # beyond the table: logit ~ -2s x (far) and ~ -(1-s) x (near the sphere)
        lo = z < zt[0]
        hi = z > zt[-1]
        out = np.where(lo, xt[0] - (z - zt[0]) / (2 * self.s), out)
        out = np.where(hi, xt[-1] - (z - zt[-1]) / (1 - self.s), out)
        return out

    def tail_prob(self, u):
        """``P(U > u)`` from the table (for diagnostics)."""
        u = np.asarray(u, float)
        zt, xt, _ = self._fine
        z_of_x = PchipInterpolator(xt[::-1], zt[::-1])
        z = z_of_x(np.log(u - 1.0))
        return 1.0 / (1.0 + np.exp(-z))

    def sample(self, rng, size):
        p = rng.random(size)
        p = np.where(p == 0.0, np.nextafter(0.0, 1.0), p)
        z = np.log(p) - np.log1p(-p)
        return 1.0 + np.exp(self._eval(self._fine, z))


@functools.lru_cache(maxsize=None)
def radial_sampler(s: float) -> RadialExitSampler:
    return RadialExitSampler(s)


def _directions(rng, size, n):
    g = rng.standard_normal((size, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_exit(params: FracParams, center, rho: float, rng, size: Optional[int] = None):
    """Draw from the mean-value measure of ``B_rho(center)``.

    Returns one point, or ``size`` points stacked on the first axis.
    """
    if not rho > 0:
        raise DomainError("rho must be positive")
    m = 1 if size is None else int(size)
    u = radial_sampler(params.s).sample(rng, m)
    y = np.asarray(center, float) + (rho * u)[:, None] * _directions(rng, m, params.n)
    return y[0] if size is None else y


# -- solver -------------------------------------------------------------------


@dataclass(frozen=True)
class WosConfig:
    n_paths: int = 10000
    seed: int = 0
    max_jumps: int = 10000
    shrink_factor: float = 0.9
    chunk_size: int = 8192
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if not 0.5 <= self.shrink_factor < 1:
            raise DomainError("shrink_factor must lie in [0.5, 1)")
        if self.max_jumps < 1 or self.chunk_size < 1:
            raise DomainError("max_jumps and chunk_size must be positive")


@dataclass(frozen=True)
class WosEstimate:
    mean: float
    stderr: float
    n_paths: int
    mean_jumps: float
    seed: int
    capped: int = 0

    @property
    def valid(self) -> bool:
        return self.capped <= 1e-3 * self.n_paths

    def check(self):
        if not self.valid:
            raise StatisticalQualityError(
                f"{self.capped} of {self.n_paths} paths hit the jump cap; estimate is invalid")
        return self

    def to_dict(self):
        d = asdict(self)
        d["valid"] = self.valid
        return d


def _thread_count(cfg: WosConfig, n_chunks: int) -> int:
    if cfg.threads is not None:
        cap = cfg.threads
    else:
        env = os.environ.get("FRAC_THREADS")
        cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_chunks))


def chunk_rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    """Counter-based generator for one chunk of paths; independent of thread layout."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(stream), int(chunk)))
    return np.random.Generator(np.random.Philox(ss))


def _kernel_sum(params, Y, w, z, rho):
    s, n = params.s, params.n
    d = np.linalg.norm(Y[None, :, :] - z[:, None, :], axis=-1)
    gap = (d - rho[:, None]) * (d + rho[:, None])
    k = np.exp(math.log(params.c) + 2 * s * np.log(rho)[:, None] - s * np.log(gap) - n * np.log(d))
    return k @ w


@dataclass(frozen=True)
class EventNodes:
    """Quadrature for data supported off the domain, used as a next-event estimator.

    At every step from ``z`` with radius ``rho`` the walk scores the exact
    expected value of the data over the next landing point, ``sum_j w_j K(z, Y_j)``.
    Exits then score zero for this part of the data, which removes the variance
    of hitting a narrow bump. Each bump uses a coarse node set when the jump
    sphere is far from it relative to its radius.
    """

    fine: tuple
    coarse: tuple
    centers: np.ndarray
    radii: np.ndarray
    far: float = 4.0

    def expected(self, params: FracParams, z, rho):
        z = np.asarray(z, float)
        rho = np.asarray(rho, float)
        out = np.zeros(len(z))
        for i, (c, rad) in enumerate(zip(self.centers, self.radii)):
            h = (np.linalg.norm(z - c, axis=1) - rho) / rad - 1.0
            near = h < self.far
            for mask, (Y, w) in ((near, self.fine[i]), (~near, self.coarse[i])):
                ii = np.nonzero(mask)[0]
                for lo in range(0, ii.size, 2048):
                    j = ii[lo:lo + 2048]
                    out[j] += _kernel_sum(params, Y, w, z[j], rho[j])
        return out


@functools.lru_cache(maxsize=None)
def _bump_mass(n):
    from .harmonic import _profile_mass

    return _profile_mass(n)


def _bump_nodes(terms, n, radial, angular):
    from .quadrature import angular_rule

    x, wx = roots_legendre(radial)
    dirs, wd = angular_rule(n, angular)
    out = []
    for t in terms:
        rad = 0.5 * t.radius * (x + 1)
        wr = 0.5 * t.radius * wx * rad ** (n - 1)
        Y = t.c + (rad[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        w = (wr[:, None] * wd[None, :]).ravel() * t(Y)
        # exact mass of the bump, so that slowly varying kernels are integrated exactly
        w *= _bump_mass(n) * t.radius**n * t.height / w.sum()
        out.append((Y, w))
    return tuple(out)


def split_events(g, dom: Domain, radial: int = 12, angular: int = 24):
    """Split data into bump terms supported off ``dom`` (as :class:`EventNodes`) and the rest."""
    ev = [t for t in g.terms if t.kind == "bump" and float(dom.signed_dist(t.c)) > t.radius]
    rest = [t for t in g.terms if not any(t is e for e in ev)]
    if not ev:
        return None, g
    n = dom.dim
    nodes = EventNodes(_bump_nodes(ev, n, radial, angular), _bump_nodes(ev, n, 6, 12),
                       np.array([t.c for t in ev]), np.array([t.radius for t in ev]))
    return nodes, type(g)(rest)


def walk(params: FracParams, dom: Domain, x, size: int, rng, cfg: WosConfig, first_radius=None,
         events: Optional[EventNodes] = None):
    """Run ``size`` walks from ``x``; returns ``(exit_points, jumps, capped, first_inside, acc, acc0)``.

    ``first_radius`` forces the first jump to use ``B_{first_radius}(x)``; then
    ``first_inside`` marks paths whose first landing point is still in the domain.
    Capped paths keep their last (interior) position. ``acc`` holds next-event
    scores for ``events`` (zeros without), ``acc0`` the part from the first step.
    """
    n = params.n
    sampler = radial_sampler(params.s)
    pos = np.tile(np.asarray(x, float), (size, 1))
    jumps = np.zeros(size, dtype=np.int64)
    active = np.ones(size, bool)
    first_inside = np.zeros(size, bool)
    acc = np.zeros(size)
    acc0 = np.zeros(size)
    if first_radius is not None:
        if events is not None:
            acc0[:] = events.expected(params, pos[:1], np.array([first_radius]))[0]
            acc += acc0
        u = sampler.sample(rng, size)
        pos = pos + (first_radius * u)[:, None] * _directions(rng, size, n)
        jumps += 1
        first_inside = dom.signed_dist(pos) < 0
        active = first_inside.copy()
    idx = np.nonzero(active)[0]
    while idx.size:
        sd = dom.signed_dist(pos[idx])
        inside = sd < 0
        idx, sd = idx[inside], sd[inside]
        capped = jumps[idx] >= cfg.max_jumps
        idx, sd = idx[~capped], sd[~capped]
        if not idx.size:
            break
        rho = cfg.shrink_factor * (-sd)
        if events is not None:
            e = events.expected(params, pos[idx], rho)
            acc[idx] += e
            if first_radius is None:
                acc0[idx[jumps[idx] == 0]] = e[jumps[idx] == 0]
        u = sampler.sample(rng, idx.size)
        pos[idx] += (rho * u)[:, None] * _directions(rng, idx.size, n)
        jumps[idx] += 1
    capped = (jumps >= cfg.max_jumps) & (dom.signed_dist(pos) < 0)
    return pos, jumps, capped, first_inside, acc, acc0


@dataclass
class Moments:
    """Running sums of per-path score vectors, reduced in chunk order."""

    n: int
    sums: np.ndarray
    cross: np.ndarray
    jumps: int
    capped: int

    def mean(self):
        return self.sums / self.n

    def cov(self):
        m = self.mean()
        c = self.cross / self.n - np.outer(m, m)
        return c * self.n / max(self.n - 1, 1)

    def estimate(self, i=0, seed=0):
        var = max(self.cov()[i, i], 0.0)
        return WosEstimate(float(self.mean()[i]), math.sqrt(var / self.n), self.n,
                           self.jumps / self.n, seed, self.capped)


def simulate(params: FracParams, dom: Domain, x, cfg: WosConfig, score: Callable, *,
             stream: int = 0, first_radius=None, events: Optional[EventNodes] = None) -> Moments:
    """Walk ``cfg.n_paths`` paths from ``x`` and accumulate ``score``.

    ``score(exit_points, first_inside)`` returns an array of shape (k, m) for m
    paths; with ``events`` it is called as ``score(exit_points, first_inside, acc, acc0)``. Chunks use their own counter-based streams and are reduced in chunk
    order, so results do not depend on the number of threads.
    """
    x = np.asarray(x, float)
    if x.shape != (params.n,):
        raise DomainError("start point has the wrong dimension")
    if not float(dom.signed_dist(x)) < 0:
        raise DomainError("start point must be interior")
    sizes = [min(cfg.chunk_size, cfg.n_paths - lo) for lo in range(0, cfg.n_paths, cfg.chunk_size)]

    def one(i):
        rng = chunk_rng(cfg.seed, stream, i)
        pos, jumps, capped, first_inside, acc, acc0 = walk(params, dom, x, sizes[i], rng, cfg,
                                                           first_radius, events)
        args = (pos, first_inside) if events is None else (pos, first_inside, acc, acc0)
        vals = np.atleast_2d(np.asarray(score(*args), float))
        vals = np.where(capped[None, :], 0.0, vals)
        return vals.sum(axis=1), vals @ vals.T, int(jumps.sum()), int(capped.sum())

    workers = _thread_count(cfg, len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(one, range(len(sizes))))
    else:
        parts = [one(i) for i in range(len(sizes))]
    sums = sum(p[0] for p in parts)
    cross = sum(p[1] for p in parts)
    return Moments(cfg.n_paths, np.asarray(sums), np.asarray(cross),
                   sum(p[2] for p in parts), sum(p[3] for p in parts))


def wos_solve(params: FracParams, dom: Domain, g, x, cfg: WosConfig = WosConfig(), *, stream: int = 0,
              next_event: bool = False) -> WosEstimate:
    """Estimate the s-harmonic function in ``dom`` with exterior data ``g`` at ``x``.

    By default each path scores ``g`` at its landing point. With ``next_event``
    (and ``g`` an ``ExteriorData``) bump terms supported away from ``dom`` are
    scored by their expected value over every jump instead, which is unbiased
    and far less noisy for narrow bumps.
    """
    if next_event and hasattr(g, "terms"):
        ev, rest = split_events(g, dom)
        if ev is not None:
            mom = simulate(params, dom, x, cfg, lambda y, _, a, a0: a + rest(y), stream=stream, events=ev)
            return mom.estimate(0, cfg.seed)
    mom = simulate(params, dom, x, cfg, lambda y, _: g(y), stream=stream)
    return mom.estimate(0, cfg.seed)


def exit_density(params: FracParams, dom: Domain, x, probe, cfg: WosConfig = WosConfig(), *,
                 stream: int = 0) -> WosEstimate:
    """``E[phi_{k,p}(exit point)]``, the Poisson kernel at ``p`` smoothed by the probe."""
    probe.check_outside(dom)
    return wos_solve(params, dom, probe.as_data(), x, cfg, stream=stream, next_event=True)
