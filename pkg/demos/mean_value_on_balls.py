"""
Mean values of s-harmonic functions on balls
============================================

An s-harmonic function in the unit ball is not determined by boundary values
but by its values on the whole complement. Its value at the centre is still an
average: against the measure mu_r living on the complement of B_r.
"""

import numpy as np

from fracmvp import (Ball, ExteriorData, MuMeasure, PoissonExtension, Term, frac_params, mu_mass,
                     poisson_extend, verify_mvp)
from fracmvp.quadrature import ball_exterior

# The measure is a probability measure for every radius and order.
for n, s in [(1, 0.25), (2, 0.5), (3, 0.75)]:
    p = frac_params(n, s)
    masses = [mu_mass(MuMeasure(p, r), ball_exterior(r, dim=n))[0] for r in (0.5, 1.0, 2.0)]
    print(f"n={n} s={s}: total mass " + "  ".join(f"{m:.12f}" for m in masses))

# Exterior data: two smooth bumps outside the unit ball.
p = frac_params(2, 0.5)
g = ExteriorData([Term("bump", (1.8, 0.0), 0.6), Term("bump", (-0.9, 1.4), 0.5, 2.0)])
u = PoissonExtension(p, 1.0, g)

# Along a ray the extension decays away from the data.
xs = np.linspace(-0.9, 0.9, 7)
vals = poisson_extend(p, 1.0, g, np.stack([xs, np.zeros_like(xs)], axis=1))
for x, v in zip(xs, vals):
    print(f"u({x:+.2f}, 0) = {v:.6f}")

# The mean value identity holds for every r up to the radius of harmonicity.
# At r = 1 the averaging region is exactly where the data live.
for r in (0.3, 0.7, 1.0):
    print(f"r = {r}: |u(0) - mean| = {verify_mvp(p, Ball((0.0, 0.0), 1.0), u, r):.2e}")
