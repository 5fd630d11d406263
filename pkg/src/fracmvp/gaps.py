"""Mean-value gap functionals and the witness families that bound them from below.

Every reported number is a lower bound for a supremum, obtained from an
explicit witness ``u``: the s-harmonic function in ``Omega`` with exterior data
``g``. Interior values of ``u`` come from walk-on-spheres, exterior integrals of
``g`` from quadrature.

For a witness with data ``g`` the walk started at the origin with first jump
radius exactly ``r`` lands first with law ``mu_r``; paths landing in ``Omega``
continue until they exit. Hence ``E[g(exit)] = u(0)`` and
``E[1{first landing in Omega} g(exit)] = int_{Omega minus B_r} u d mu_r``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog, minimize_scalar
from scipy.stats import qmc

from .errors import DomainError, IllConditionedError, StatisticalQualityError
from .geometry import Domain, SlabComplement, inradius_from_origin
from .harmonic import ExteriorData, Mollifier, Term, integrate_data_mu
from .kernels import FracParams, MuMeasure
from .quadrature import DEFAULT_SCHEME, ExteriorQuadScheme, complement, excess, mu_mass
from .wos import WosConfig, simulate, split_events, wos_solve

KINDS = ("G", "Gstar", "Gcal")
# relative accuracy of the next-event node quadrature (checked against 48x96-node rules)
EVENT_REL_TOL = 2e-5


@dataclass
class GapValue:
    kind: str
    value: float
    stderr: float
    u0: float
    ext: float
    mu_comp: float
    denominator: Optional[float] = None


@dataclass
class GapReport:
    kind: str
    lower_bound: float
    stderr: float
    witness: dict
    mu_gap: float
    mu_comp: float
    diagnostics: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _masses(params, dom, r, scheme):
    m = MuMeasure(params, r)
    comp, e1 = mu_mass(m, complement(dom, r), scheme=scheme)
    gap, e2 = mu_mass(m, excess(dom, r), scheme=scheme)
    return comp, gap, e1 + e2


def _ratio_err(a, sa, b, sb, cov=0.0):
    """Delta-method standard error of ``a / b``."""
    q = a / b
    var = (sa / b) ** 2 + (q * sb / b) ** 2 - 2 * q * cov / b**2
    return math.sqrt(max(var, 0.0))


def check_bounded(params, dom, g: ExteriorData, cfg: WosConfig, points=None, limit=1.0):
    """Confirm ``|u| <= limit`` in ``Omega``, cheaply when ``sum |heights| <= limit``.

    Otherwise ``u`` is estimated by WoS on a grid of interior points.
    """
    if g.sup_bound <= limit:
        return True
    if points is None:
        points = np.concatenate([interior_points(dom, 64, seed=cfg.seed),
                                 near_boundary_points(dom, 64, seed=cfg.seed)])
    small = replace(cfg, n_paths=min(cfg.n_paths, 2000))
    for i, x in enumerate(points):
        est = wos_solve(params, dom, g, x, small, stream=10_000 + i, next_event=True)
        if abs(est.mean) > limit + 3 * est.stderr:
            return False
    return True


def gap_value(kind: str, params: FracParams, dom: Domain, g: ExteriorData, cfg: WosConfig, *,
              r: Optional[float] = None, scheme: ExteriorQuadScheme = DEFAULT_SCHEME,
              masses=None, inner_paths: int = 32) -> GapValue:
    """The defining quotient (G, Gstar) or difference (Gcal) for the witness with data ``g``.

    ``r`` defaults to the inradius of ``dom``. ``masses`` may pass precomputed
    ``(mu_r(C Omega), mu_r(Omega minus B_r), err)``.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown gap kind {kind!r}")
    if r is None:
        r = inradius_from_origin(dom)
    elif r > inradius_from_origin(dom) * (1 + 1e-9):
        raise DomainError("B_r must lie inside the domain")
    n = params.n
    mu_comp, mu_gap, _ = masses if masses is not None else _masses(params, dom, r, scheme)
    m = MuMeasure(params, r)
    ext, _ = integrate_data_mu(m, complement(dom, r), g, scheme=scheme)
    origin = np.zeros(n)
    # systematic error of the next-event quadrature, on the scale of int |g|
    sys_err = EVENT_REL_TOL * (abs(ext) if g.nonnegative else
                               integrate_data_mu(m, complement(dom, r), _abs_data(g), scheme=scheme)[0])

    if kind == "Gcal":
        if not check_bounded(params, dom, g, cfg):
            raise DomainError("witness violates |u| <= 1 in the domain")
        est = wos_solve(params, dom, g, origin, cfg, next_event=True)
        val = mu_comp * est.mean - ext
        return GapValue(kind, abs(val), mu_comp * math.hypot(est.stderr, sys_err), est.mean, ext, mu_comp)

    if kind == "G" and not g.nonnegative:
        return _g_signed(params, dom, g, cfg, r, ext, mu_comp, inner_paths, sys_err)

    ev, rest = split_events(g, dom)

    def score(y, first_inside, acc=0.0, acc0=0.0):
        v = rest(y)
        return np.stack([acc + v, acc - acc0 + np.where(first_inside, v, 0.0)])

    mom = simulate(params, dom, origin, cfg, score, first_radius=r, events=ev)
    mean = mom.mean()
    cov = mom.cov() / mom.n
    u0 = mean[0]
    s0 = math.hypot(math.sqrt(max(cov[0, 0], 0.0)), sys_err)
    num = u0 - ext / mu_comp
    # by the mean value property the denominator (|u| = u for g >= 0) equals ext + inner = u0
    den = u0 if kind == "G" else abs(u0)
    if kind == "Gstar" and abs(den) < 10 * s0:
        raise IllConditionedError(f"Gstar denominator {den:.3e} below 10x its error {s0:.3e}")
    val = abs(num) / den
    err = _ratio_err(abs(num), s0, den, s0, s0 * s0)
    return GapValue(kind, val, err, u0, ext, mu_comp, den)


def _abs_data(g):
    return ExteriorData([Term(t.kind, t.center, t.radius, abs(t.height), t.width) for t in g.terms])


def _g_signed(params, dom, g, cfg, r, ext, mu_comp, inner_paths, sys_err=0.0):
    """G for data of both signs: ``|u|`` on ``Omega minus B_r`` needs nested walks (biased up)."""
    n = params.n
    abs_ext, _ = integrate_data_mu(MuMeasure(params, r), complement(dom, r), _abs_data(g))
    est0 = wos_solve(params, dom, g, np.zeros(n), cfg, next_event=True)
    outer = replace(cfg, n_paths=max(1, cfg.n_paths // inner_paths), chunk_size=cfg.chunk_size)
    inner_cfg = replace(cfg, n_paths=inner_paths, threads=1)
    from .wos import chunk_rng, walk

    rng = chunk_rng(cfg.seed, 77, 0)
    pos, _, _, first_inside, _, _ = walk(params, dom, np.zeros(n), outer.n_paths, rng, outer, first_radius=r)
    vals = np.zeros(outer.n_paths)
    for i in np.nonzero(first_inside)[0]:
        vals[i] = abs(wos_solve(params, dom, g, pos[i], replace(inner_cfg, seed=cfg.seed + i + 1), next_event=True).mean)
    inside_part = vals.mean()
    den = abs_ext + inside_part
    se_den = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
    num = abs(est0.mean - ext / mu_comp)
    return GapValue("G", num / den, _ratio_err(num, math.hypot(est0.stderr, sys_err), den, se_den),
                    est0.mean, ext, mu_comp, den)


# -- witness families ---------------------------------------------------------


def touch_point(dom: Domain, r: float, n_dirs: int = 2048):
    """A boundary point of ``Omega`` outside the closed ``B_r``, as far from the origin as possible."""
    from .quadrature import angular_rule

    dirs, _ = angular_rule(dom.dim, max(8, int(round(n_dirs ** (1 / max(dom.dim - 1, 1))))))
    cross = dom.ray_crossings(np.zeros(dom.dim), dirs)
    far = np.nanmax(np.where(cross > 0, cross, np.nan), axis=1)
    i = int(np.nanargmax(far))
    if not far[i] > r * (1 + 1e-6):
        raise DomainError("domain has no boundary outside B_r (it is the ball)")
    p = far[i] * dirs[i]
    if dom.dim == 2:
        th0 = math.atan2(dirs[i, 1], dirs[i, 0])
        h = 2 * math.pi / len(dirs)

        def neg(th):
            d = np.array([[math.cos(th), math.sin(th)]])
            c = dom.ray_crossings(np.zeros(2), d)[0]
            return -float(np.nanmax(np.where(c > 0, c, np.nan)))

        th = minimize_scalar(neg, bounds=(th0 - h, th0 + h), method="bounded",
                             options={"xatol": 1e-10}).x
        if -neg(th) >= far[i]:
            p = -neg(th) * np.array([math.cos(th), math.sin(th)])
    return p, dom.normal(p)


def touch_family(dom: Domain, r: float, j_max: int = 4, t0: float = 0.05, p_star=None, dim=None):
    """Mollifiers ``phi_{k_j, p_j}`` with ``p_j = p* + t_j nu``, ``t_j = t0 / 2^(j-1)``, ``k_j = 2 / t_j``."""
    if p_star is None:
        p_star, nu = touch_point(dom, r)
    else:
        p_star = np.asarray(p_star, float)
        nu = dom.normal(p_star)
    out = []
    for j in range(1, j_max + 1):
        t = t0 / 2 ** (j - 1)
        k = 2.0 / t
        out.append((j, Mollifier(p_star + t * nu, k)))
    return out


def ladder_family(dom: Domain, r: float, count: int = 4, height: float = 1.0):
    """Bumps outside ``Omega`` along the ray through the closest boundary point, at growing distance."""
    n = dom.dim
    if isinstance(dom, SlabComplement):
        # inside the gap between the slab faces, walking outward from the ball
        e = np.zeros(n)
        e[0] = 1.0
        half = dom.a
        rad = 0.8 * half
        centers = [(dom.r + rad * (1.2 + 2.5 * i)) * e for i in range(count)]
        return [ExteriorData([Term("bump", tuple(c), rad, height)]) for c in centers]
    p, nu = touch_point(dom, r)
    scale = max(dom.bounding_radius, 1.0)
    out = []
    for i in range(count):
        d = 0.1 * scale * 2**i
        out.append(ExteriorData([Term("bump", tuple(p + (d + 0.05 * scale) * nu), 0.05 * scale * 2**i, height)]))
    return out


def interior_points(dom: Domain, count: int, seed: int = 0):
    """Quasi-random (Sobol) points of ``Omega`` by rejection from its bounding box."""
    n = dom.dim
    R = dom.bounding_radius
    sob = qmc.Sobol(n, scramble=True, seed=seed)
    pts = []
    have = 0
    while have < count:
        cand = (2 * sob.random(1024) - 1) * R
        cand = cand[dom.signed_dist(cand) < 0]
        pts.append(cand)
        have += len(cand)
    return np.concatenate(pts)[:count]


def near_boundary_points(dom: Domain, count: int, band: float = 0.05, seed: int = 0):
    """Interior points within ``band`` of the boundary."""
    rng = np.random.default_rng(seed)
    out = []
    have = 0
    R = dom.bounding_radius
    while have < count:
        cand = rng.uniform(-R, R, (8192, dom.dim))
        sd = dom.signed_dist(cand)
        cand = cand[(sd < 0) & (sd > -band)]
        out.append(cand)
        have += len(cand)
    return np.concatenate(out)[:count]


def lp_basis(dom: Domain, r: float, count: int = 12, offset: float = 0.08, radius: float = 0.25):
    """Non-negative bumps just outside the boundary, plus the constant 1."""
    from .quadrature import angular_rule

    n = dom.dim
    dirs, _ = angular_rule(n, count if n == 2 else max(4, int(round(math.sqrt(count)))))
    cross = dom.ray_crossings(np.zeros(n), dirs)
    far = np.nanmax(np.where(cross > 0, cross, np.nan), axis=1)
    basis = []
    for d, t in zip(dirs, far):
        p = t * d
        c = p + (offset + radius) * dom.normal(p)
        basis.append(ExteriorData([Term("bump", tuple(c), radius, 1.0)]))
    basis.append(ExteriorData([Term("constant", height=1.0)]))
    return basis


def _responses(params, dom, basis, points, cfg, stream0=1000):
    """``u_i(x_k)`` for every basis datum, sharing exit points across the basis."""
    U = np.zeros((len(points), len(basis)))
    S = np.zeros_like(U)
    for k, x in enumerate(points):
        mom = simulate(params, dom, x, cfg, lambda y, _: np.stack([g(y) for g in basis]),
                       stream=stream0 + k)
        U[k] = mom.mean()
        S[k] = np.sqrt(np.maximum(np.diag(mom.cov()), 0.0) / mom.n)
    return U, S


def estimate_gap_lower_bound(kind: str, params: FracParams, dom: Domain, family: str, cfg: WosConfig, *,
                             r: Optional[float] = None, scheme: ExteriorQuadScheme = DEFAULT_SCHEME,
                             **family_args) -> GapReport:
    """Maximize :func:`gap_value` over a witness family.

    family: "touch" (mollified Poisson kernels approaching a boundary point),
    "ladder" (bumps at growing distance), or "lp" (Gcal only: linear program over
    combinations of basis responses with ``|u| <= 1`` at sample points).
    """
    if r is None:
        r = inradius_from_origin(dom)
    masses = _masses(params, dom, r, scheme)
    mu_comp, mu_gap, _ = masses
    flags = []
    if family == "lp":
        if kind != "Gcal":
            raise DomainError("the lp family applies to Gcal only")
        return _lp_report(params, dom, r, cfg, scheme, masses, **family_args)
    if family == "touch":
        if mu_gap <= 0:
            cands = [({"data": ExteriorData([Term("bump", (r * 2.0,) + (0.0,) * (dom.dim - 1), r / 2)]).to_json()},
                      ExteriorData([Term("bump", (r * 2.0,) + (0.0,) * (dom.dim - 1), r / 2)]))]
        else:
            cands = [({"j": j, "p": list(mo.p), "k": mo.k}, mo.as_data())
                     for j, mo in touch_family(dom, r, **family_args)]
    elif family == "ladder":
        cands = [({"rung": i, "data": g.to_json()}, g)
                 for i, g in enumerate(ladder_family(dom, r, **family_args))]
    else:
        raise DomainError(f"unknown witness family {family!r}")
    diag = []
    best = None
    for i, (desc, g) in enumerate(cands):
        try:
            gv = gap_value(kind, params, dom, g, replace(cfg, seed=cfg.seed + i), r=r, scheme=scheme,
                           masses=masses)
        except IllConditionedError as exc:
            diag.append({**desc, "error": str(exc)})
            continue
        diag.append({**desc, "value": gv.value, "stderr": gv.stderr, "u0": gv.u0, "ext": gv.ext})
        # ties go to the earlier (smoother) candidate
        if best is None or gv.value > best[1].value:
            best = (desc, gv)
    if best is None:
        raise IllConditionedError("no witness gave a well-conditioned value")
    desc, gv = best
    if gv.value > 0 and gv.stderr > 0.2 * gv.value:
        flags.append("statistical error exceeds 20% of the bound")
    return GapReport(kind, gv.value, gv.stderr, desc, mu_gap, mu_comp, diag, flags)


def _combine(basis, a):
    terms = []
    for g, c in zip(basis, a):
        if c != 0:
            terms.extend(g.scaled(float(c)).terms)
    return ExteriorData(terms)


def _lp_report(params, dom, r, cfg, scheme, masses, n_interior=500, n_boundary=100, basis=None,
               coef_bound=20.0, origin_paths=None):
    """LP over combinations of basis responses, then an independent re-evaluation.

    The LP sees Monte Carlo estimates and would otherwise select coefficients
    that amplify their noise. The chosen witness is therefore re-estimated with
    fresh streams: ``u(0)`` by next-event WoS, ``sup |u|`` on a fresh point set;
    the coefficients are scaled down if that sup exceeds 1. Only the fresh value
    is reported.
    """
    mu_comp, mu_gap, merr = masses
    n = params.n
    basis = lp_basis(dom, r) if basis is None else basis
    origin = np.zeros(n)
    pts = np.concatenate([interior_points(dom, n_interior, cfg.seed),
                          near_boundary_points(dom, n_boundary, seed=cfg.seed)])
    U, _ = _responses(params, dom, basis, pts, cfg)
    big = replace(cfg, n_paths=origin_paths or 20 * cfg.n_paths)
    U0 = np.array([wos_solve(params, dom, g, origin, big, stream=500 + i, next_event=True).mean for i, g in enumerate(basis)])
    m = MuMeasure(params, r)
    ext = np.array([integrate_data_mu(m, complement(dom, r), g, scheme=scheme)[0] for g in basis])
    L = mu_comp * U0 - ext
    A = np.vstack([U, -U])
    b = np.ones(2 * len(pts))
    bounds = [(-coef_bound, coef_bound)] * len(basis)
    best = None
    for sign in (1.0, -1.0):
        res = linprog(-sign * L, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        if res.status == 3:
            raise IllConditionedError("LP unbounded")
        if res.status != 0:
            raise IllConditionedError(f"LP failed: {res.message}")
        val = sign * float(L @ res.x)
        if best is None or val > best[0]:
            best = (val, res.x)
    lp_val, a = best

    # fresh, independent evaluation of the selected witness
    g = _combine(basis, a)
    check = np.concatenate([interior_points(dom, n_interior // 4, cfg.seed + 1),
                            near_boundary_points(dom, n_boundary, seed=cfg.seed + 1)])
    sup = max(abs(wos_solve(params, dom, g, x, cfg, stream=20_000 + k, next_event=False).mean) for k, x in enumerate(check))
    if sup > 1:
        a = a / sup
        g = _combine(basis, a)
    est = wos_solve(params, dom, g, origin, big, stream=30_000, next_event=True)
    ext_a, _ = integrate_data_mu(m, complement(dom, r), g, scheme=scheme)
    val = mu_comp * est.mean - ext_a
    if val < 0:
        val = -val
    stderr = mu_comp * est.stderr

    # single basis bumps are admissible candidates too (0 <= g <= 1)
    cands = []
    for i, gi in enumerate(basis[:-1]):
        v = abs(mu_comp * U0[i] - ext[i])
        cands.append({"basis": i, "value": float(v)})
    upper = 2 * mu_gap
    diag = [{"lp_objective_in_sample": lp_val, "fresh_sup": float(sup)},
            {"upper_bound": upper, "ratio_upper_over_optimum": upper / val if val > 0 else math.inf},
            *cands]
    witness = {"coefficients": a.tolist(), "basis": [gb.to_json() for gb in basis]}
    flags = []
    if val > 0 and stderr > 0.2 * val:
        flags.append("statistical error exceeds 20% of the bound")
    return GapReport("Gcal", val, stderr, witness, mu_gap, mu_comp, diag, flags)


def slab_blowup_experiment(params: FracParams, deltas: Sequence[float], cfg: WosConfig, *, r: float = 1.0,
                           scheme: ExteriorQuadScheme = DEFAULT_SCHEME.refined(), with_witness: bool = True):
    """Rows ``(delta, mu_comp, mu_comp_err, target_bound, best_witness_value, stderr)`` over slab domains."""
    deltas = list(deltas)
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise DomainError("deltas must be decreasing")
    if any(not 0 < d < 0.5 for d in deltas):
        raise DomainError("each delta must lie in (0, 0.5)")
    rows = []
    for d in deltas:
        dom = SlabComplement(r, d * r, params.n) if r == 1.0 else SlabComplement(1.0, d, params.n).scaled(r)
        m = MuMeasure(params, r)
        comp, err = mu_mass(m, complement(dom, r), scheme=scheme)
        row = {"delta": d, "mu_comp": comp, "mu_comp_err": err, "target_bound": 1.0 / comp - 1.0,
               "best_witness_value": float("nan"), "stderr": float("nan")}
        if with_witness:
            try:
                rep = estimate_gap_lower_bound("Gstar", params, dom, "ladder", cfg, r=r, scheme=scheme)
                row.update(best_witness_value=rep.lower_bound, stderr=rep.stderr)
            except IllConditionedError:
                pass
        rows.append(row)
    return rows
