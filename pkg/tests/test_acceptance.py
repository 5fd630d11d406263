"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import chisquare

from fracmvp import (Ball, ExteriorData, MuMeasure, PoissonExtension, Scaled, ShiftedBall, SlabComplement, Term,
                     WosConfig, boundary_profile, c_frak, complement, estimate_gap_lower_bound, frac_params,
                     gap_value, mu_mass, poisson_extend, sample_exit, slab_blowup_experiment, verify_mvp,
                     wos_solve)
from fracmvp.gaps import ladder_family
from fracmvp.kernels import poisson_ball, sphere_area
from fracmvp.limits import boundary_points, shifted_ball_limit
from fracmvp.quadrature import ball_exterior

UNIT = Ball((0.0, 0.0), 1.0)


@pytest.fixture
def report(capsys):
    t0 = time.perf_counter()

    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail} ({time.perf_counter() - t0:.1f}s)")
        assert ok, detail

    return emit


def test_ac01_normalization(report):
    worst = 0.0
    for n, s in [(1, 0.25), (2, 0.5), (3, 0.75)]:
        p = frac_params(n, s)
        for r in (0.5, 1.0, 2.0):
            val, _ = mu_mass(MuMeasure(p, r), ball_exterior(r, dim=n))
            worst = max(worst, abs(val - 1.0))
    report("AC1 normalization", worst <= 1e-6, f"max |mu_r(C B_r) - 1| = {worst:.2e}")


def test_ac02_mean_value_property(report):
    p = frac_params(2, 0.5)
    data = [ExteriorData([Term("bump", (1.8, 0.0), 0.6)]),
            ExteriorData([Term("bump", (-0.9, 1.4), 0.5, 2.0)]),
            ExteriorData([Term("bump", (0.0, -1.3), 0.25, 0.5)])]
    worst = 0.0
    for g in data:
        u = PoissonExtension(p, 1.0, g)
        for r in (0.3, 0.7, 1.0):
            worst = max(worst, verify_mvp(p, UNIT, u, r))
    report("AC2 mean value property", worst <= 1e-4, f"max residual = {worst:.2e}")


def test_ac03_shifted_ball_limit(report):
    p = frac_params(2, 0.5)
    R = 2.0
    target = p.c * math.sqrt(3) / 2
    dom = ShiftedBall(R)
    lims = [boundary_profile(p, dom, np.zeros(2), q, [0.004, 0.002, 0.001]).extrapolated_limit
            for q in boundary_points(dom, 8, offset=0.1)]
    dev = max(abs(v / target - 1) for v in lims)
    spread = max(lims) / min(lims) - 1
    ok = dev < 0.01 and spread < 0.01 and abs(shifted_ball_limit(p, R) / target - 1) < 1e-12
    report("AC3 shifted-ball limit", ok, f"max rel dev {dev:.1e}, pairwise spread {spread:.1e}")


def test_ac04_kernel_monotonicity(report):
    p = frac_params(2, 0.5)
    rng = np.random.default_rng(11)
    bad = 0
    for _ in range(50):
        x = 0.8 * rng.uniform() ** 0.5 * _unit(rng)
        y = (1.0 + rng.exponential(0.5)) * _unit(rng)
        small = float(poisson_ball(p, np.zeros(2), 0.8, x, y))
        large = float(poisson_ball(p, np.zeros(2), 1.0, x, y))
        bad += small > large
    report("AC4 kernel monotonicity", bad == 0, f"{bad} of 50 pairs violate P_B0.8 <= P_B1")


def _unit(rng):
    v = rng.standard_normal(2)
    return v / np.linalg.norm(v)


def test_ac05_wos_unbiased(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(20):
        s = float(rng.choice([0.25, 0.5, 0.75]))
        p = frac_params(2, s)
        c = (1.3 + rng.uniform()) * _unit(rng)
        g = ExteriorData([Term("bump", tuple(c), float(rng.uniform(0.2, 0.6)), float(rng.uniform(0.5, 2)))])
        x = 0.9 * rng.uniform() ** 0.5 * _unit(rng)
        est = wos_solve(p, UNIT, g, x, WosConfig(n_paths=100_000, seed=i))
        ref, qerr = poisson_extend(p, 1.0, g, x, return_error=True)
        worst = max(worst, abs(est.mean - float(ref)) / math.hypot(est.stderr, float(qerr)))
    report("AC5 WoS unbiasedness", worst <= 3.0, f"max |WoS - quadrature| = {worst:.2f} combined errors")


def _radial_probs(p, edges):
    """Bin masses of |y| under the unit-ball exit law, by 1-D quadrature of the kernel."""
    s, n = p.s, p.n
    area = sphere_area(n)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        if a == 1.0:
            # (t^2 - 1)^-s = (t - 1)^-s (t + 1)^-s: algebraic endpoint weight
            val = integrate.quad(lambda t: (t + 1) ** -s / t, 1.0, b, weight="alg", wvar=(-s, 0))[0]
        else:
            val = integrate.quad(lambda t: (t * t - 1) ** -s / t, a, b)[0]
        out.append(area * p.c * val)
    return np.array(out)


def test_ac06_exit_law_chi_square(report):
    pvals = []
    for s in (0.5, 0.75):
        p = frac_params(2, s)
        y = sample_exit(p, np.zeros(2), 1.0, np.random.default_rng(77), 1_000_000)
        u = np.linalg.norm(y, axis=1)
        edges = np.concatenate([[1.0], 1 + np.geomspace(1e-4, 1e3, 40), [np.inf]])
        probs = _radial_probs(p, edges)
        counts = np.histogram(u, bins=edges)[0]
        expected = probs * len(u)
        keep = expected >= 5
        f_obs, f_exp = counts[keep], expected[keep]
        if not keep.all():
            f_obs = np.append(f_obs, counts[~keep].sum())
            f_exp = np.append(f_exp, expected[~keep].sum())
        f_exp *= f_obs.sum() / f_exp.sum()
        pvals.append(chisquare(f_obs, f_exp).pvalue)
    report("AC6 exit-law chi-square", min(pvals) > 0.01, "p-values " + ", ".join(f"{v:.3f}" for v in pvals))


def test_ac07_touch_trajectory(report, two_balls):
    p = frac_params(2, 0.5)
    rep = estimate_gap_lower_bound("G", p, two_balls, "touch", WosConfig(n_paths=100_000, seed=3))
    vals = [(d["value"], d["stderr"]) for d in rep.diagnostics]
    mono = all(b[0] >= a[0] - 3 * math.hypot(a[1], b[1]) for a, b in zip(vals, vals[1:]))
    ok = len(vals) == 4 and mono and vals[-1][0] > 0.8
    report("AC7 touch-point trajectory", ok, "G values " + ", ".join(f"{v:.3f}+-{e:.3f}" for v, e in vals))


def test_ac08_lp_sandwich(report, two_balls):
    p = frac_params(2, 0.5)
    rep = estimate_gap_lower_bound("Gcal", p, two_balls, "lp", WosConfig(n_paths=1000, seed=0))
    upper = 2 * rep.mu_gap
    cand = [rep.lower_bound] + [d["value"] for d in rep.diagnostics if "basis" in d]
    within = all(v <= upper + 3 * rep.stderr for v in cand)
    positive = rep.mu_gap <= 1e-3 or rep.lower_bound - 3 * rep.stderr > 0
    # frozen lower trend, confirmed against the LP run (observed about 0.9 mu_gap)
    trend = rep.lower_bound >= 0.25 * rep.mu_gap
    ratio = upper / rep.lower_bound
    report("AC8 LP sandwich", within and positive and trend,
           f"optimum {rep.lower_bound:.4f}+-{rep.stderr:.4f} in [0.25, 2] x mu_gap = {rep.mu_gap:.4f}, "
           f"upper/optimum {ratio:.2f}")


def test_ac09_slab_blowup(report):
    p = frac_params(2, 0.5)
    rows = slab_blowup_experiment(p, [0.4, 0.2, 0.1], WosConfig(n_paths=1000), with_witness=False)
    ok = True
    for a, b in zip(rows, rows[1:]):
        err = a["mu_comp_err"] + b["mu_comp_err"]
        ok &= a["mu_comp"] - b["mu_comp"] > err
        ok &= b["target_bound"] - a["target_bound"] > err / b["mu_comp"] ** 2 + err / a["mu_comp"] ** 2
    detail = "; ".join(f"delta {r['delta']}: mu {r['mu_comp']:.6f}+-{r['mu_comp_err']:.0e}, "
                       f"bound {r['target_bound']:.4f}" for r in rows)
    report("AC9 slab blow-up", ok, detail)


def test_ac10_cfrak_bounds(report):
    p = frac_params(2, 0.5)
    one, e1 = c_frak(p, UNIT)
    ok = abs(one - 1) <= 1e-4
    parts = [f"ball {one:.6f}"]
    for R in (2.0, 4.0):
        v, e = c_frak(p, ShiftedBall(R))
        ok &= R ** (-2 * p.s) + e < v < 1 - e
        parts.append(f"R={R:g}: {R ** (-2 * p.s):.3f} < {v:.4f} < 1")
    report("AC10 c_frak bounds", ok, ", ".join(parts))


def test_ac11_scaling_invariance(report, two_balls):
    p = frac_params(2, 0.5)
    cfg = WosConfig(n_paths=20_000, seed=9)
    cases = [(ShiftedBall(2.0), ExteriorData([Term("bump", (-2.0, 0.0), 0.6)])),
             (two_balls, ExteriorData([Term("bump", (2.2, 0.0), 0.3)])),
             (SlabComplement(1.0, 0.2, 2), None)]
    worst = 0.0
    for dom, g in cases:
        if g is None:
            g = ladder_family(dom, 1.0)[0]
        m0, e0 = mu_mass(MuMeasure(p, 1.0), complement(dom, 1.0))
        g0 = gap_value("G", p, dom, g, cfg, r=1.0)
        for lam in (0.5, 3.0):
            m1, e1 = mu_mass(MuMeasure(p, lam), complement(Scaled(dom, lam), lam))
            worst = max(worst, abs(m1 - m0) / max(e0 + e1, 1e-12))
            g1 = gap_value("G", p, Scaled(dom, lam), g.dilated(lam), cfg, r=lam)
            worst = max(worst, abs(g1.value - g0.value) / max(3 * math.hypot(g0.stderr, g1.stderr), 1e-12))
    report("AC11 scaling invariance", worst <= 1.0, f"max deviation {worst:.2f} x combined error")
