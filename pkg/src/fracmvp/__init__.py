"""Numerical toolkit for the fractional mean value property and its gaps.

Mean-value measures and ball Poisson kernels of the fractional Laplacian,
singular exterior quadrature, walk-on-spheres for the exterior-value problem,
witness-based lower bounds for mean value gaps, and boundary limits of
Poisson kernels.
"""

__version__ = "0.1.0"

from .errors import (ConvergenceError, DomainError, FracError, IllConditionedError,  # noqa: E402
                     StatisticalQualityError)
from .gaps import GapReport, estimate_gap_lower_bound, gap_value, slab_blowup_experiment  # noqa: E402
from .geometry import (Ball, BallUnion, Domain, Implicit, Scaled, ShiftedBall, SlabComplement,  # noqa: E402
                       domain_from_json, inradius_from_origin, tangent_balls)
from .harmonic import (ExteriorData, Mollifier, PoissonExtension, Term, data_from_json,  # noqa: E402
                       mollified_poisson, mollifier_convergence, poisson_extend, verify_mvp)
from .kernels import (FracParams, MuMeasure, calibrate_constant, frac_params, mu_density,  # noqa: E402
                      poisson_ball)
from .limits import (BoundaryLimitProfile, ball_detect, boundary_profile, c_frak,  # noqa: E402
                     tangent_bracket)
from .quadrature import ExteriorQuadScheme, complement, excess, integrate_mu, mu_mass  # noqa: E402
from .wos import WosConfig, WosEstimate, exit_density, sample_exit, wos_solve  # noqa: E402
