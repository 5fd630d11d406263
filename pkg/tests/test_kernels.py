import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import closed_form_c
from fracmvp import DomainError, FracParams, MuMeasure, calibrate_constant, frac_params, mu_density, poisson_ball
from fracmvp.errors import ConvergenceError
from fracmvp.kernels import f_omega, sphere_area


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7])
@pytest.mark.parametrize("s", [0.05, 0.25, 0.5, 0.75, 0.95])
def test_constant_matches_closed_form(n, s):
    # DERIVED: Gamma(n/2) sin(pi s) / pi^(n/2+1), never used by the library
    assert calibrate_constant(n, s).c == pytest.approx(closed_form_c(n, s), rel=1e-10)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_calibration_reports_nonconvergence():
    with pytest.raises(ConvergenceError):
        calibrate_constant(2, 0.5, tol=1e-30)


@pytest.mark.parametrize("bad", [(0, 0.5, 1.0), (2, 0.0, 1.0), (2, 1.0, 1.0), (2, 0.5, -1.0)])
def test_params_validation(bad):
    with pytest.raises(DomainError):
        FracParams(*bad)


def test_density_undefined_on_ball(p2):
    with pytest.raises(DomainError):
        mu_density(MuMeasure(p2, 1.0), np.array([0.5, 0.0]))
    with pytest.raises(DomainError):
        MuMeasure(p2, 0.0)


def test_density_log_space_extremes(p2):
    m = MuMeasure(p2, 1.0)
    near = mu_density(m, np.array([1.0 + 1e-15, 0.0]))
    far = mu_density(m, np.array([1e100, 0.0]))
    assert np.isfinite(near) and near > 0
    assert far > 0 and np.isfinite(far)
    # far field ~ c / |y|^(n + 2s)
    assert math.log(far) + 3 * math.log(1e100) == pytest.approx(math.log(p2.c), rel=1e-12)


def test_poisson_at_center_is_mu_density(p2):
    y = np.array([[2.0, 0.5], [-1.2, 0.3]])
    assert np.allclose(poisson_ball(p2, np.zeros(2), 1.0, np.zeros(2), y), mu_density(MuMeasure(p2, 1.0), y))


def test_poisson_domain_errors(p2):
    with pytest.raises(DomainError):
        poisson_ball(p2, np.zeros(2), 1.0, np.array([1.0, 0.0]), np.array([2.0, 0.0]))
    with pytest.raises(DomainError):
        poisson_ball(p2, np.zeros(2), 1.0, np.zeros(2), np.array([0.5, 0.0]))


def test_f_omega_on_unit_ball_is_poisson_kernel(p2):
    from fracmvp import Ball

    y = np.array([[1.5, 0.2], [0.0, -3.0]])
    assert np.allclose(f_omega(p2, Ball((0.0, 0.0), 1.0), y), poisson_ball(p2, np.zeros(2), 1.0, np.zeros(2), y),
                       rtol=1e-12)


coord = st.floats(-0.7, 0.7)


@settings(max_examples=60, deadline=None)
@given(x1=coord, x2=coord, th=st.floats(0, 2 * math.pi), rad=st.floats(1.01, 5.0), lam=st.floats(0.2, 5.0))
def test_poisson_scaling(x1, x2, th, rad, lam):
    p = frac_params(2, 0.5)
    x = np.array([x1, x2])
    y = rad * np.array([math.cos(th), math.sin(th)])
    a = poisson_ball(p, np.zeros(2), 1.0, x, y)
    b = poisson_ball(p, np.zeros(2), lam, lam * x, lam * y)
    assert b == pytest.approx(a / lam**2, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0.0, 0.79), th=st.floats(0, 2 * math.pi), rho=st.floats(1.0001, 4.0), ph=st.floats(0, 2 * math.pi),
       s=st.sampled_from([0.25, 0.5, 0.75]))
def test_poisson_domain_monotonicity(r, th, rho, ph, s):
    # smaller ball, smaller kernel (exterior point of both)
    p = frac_params(2, s)
    x = r * np.array([math.cos(th), math.sin(th)])
    y = rho * np.array([math.cos(ph), math.sin(ph)])
    assert poisson_ball(p, np.zeros(2), 0.8, x, y) <= poisson_ball(p, np.zeros(2), 1.0, x, y)
