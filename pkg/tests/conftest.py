import numpy as np
import pytest
from scipy.special import gamma

from fracmvp import frac_params


def closed_form_c(n, s):
    """Independent oracle for the normalizing constant."""
    return gamma(n / 2) * np.sin(np.pi * s) / np.pi ** (n / 2 + 1)


@pytest.fixture(scope="session")
def p2():
    return frac_params(2, 0.5)


@pytest.fixture(scope="session")
def two_balls():
    from fracmvp import Ball, BallUnion

    return BallUnion([Ball((0.0, 0.0), 1.0), Ball((1.3, 0.0), 0.6)])
