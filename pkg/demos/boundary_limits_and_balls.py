"""
Can the Poisson kernel recognise a ball?
========================================

Scaled by dist^s, the Poisson kernel of the unit ball seen from its centre has
the same limit at every boundary point. A ball through the unit circle but
centred elsewhere also has a constant limit, with a larger value. So a
constant limit alone does not identify the centred ball; its value does.
"""

import numpy as np

from fracmvp import Ball, ShiftedBall, ball_detect, boundary_profile, c_frak, frac_params
from fracmvp.limits import boundary_points, shifted_ball_limit

p = frac_params(2, 0.5)
origin = np.zeros(2)

for dom, name in [(Ball((0.0, 0.0), 1.0), "unit disc"), (ShiftedBall(2.0), "shifted disc R=2")]:
    lims = [boundary_profile(p, dom, origin, q, [0.004, 0.002]).extrapolated_limit
            for q in boundary_points(dom, 6, offset=0.2)]
    print(f"{name:>17}: " + " ".join(f"{v:.6f}" for v in lims))

print(f"closed form c/2^s = {p.c / 2 ** p.s:.6f}, shifted = {shifted_ball_limit(p, 2.0):.6f}")

# The normalisation of the Poisson-like weight separates them too.
for R in (2.0, 4.0, 8.0):
    v, e = c_frak(p, ShiftedBall(R))
    print(f"R = {R:g}: c_frak = {v:.5f} (lower bound {R ** (-2 * p.s):.4f})")

verdict = ball_detect(p, ShiftedBall(2.0))
print(verdict.to_dict()["verdict"], "|", verdict.caveat)
