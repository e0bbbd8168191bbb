"""Shared fixtures; expensive solves are session-scoped so suites reuse them."""
import math

import pytest

from spheig import Branch, PParams, SphericalDomain
from spheig.ode_axisym import solve_beta


@pytest.fixture(scope="session")
def quarter_arc_p25():
    """Shooting eigenpair on Arc(pi/2) at p = 2.5 (beta ~ 1.5247)."""
    return solve_beta(PParams(2.5, 2), SphericalDomain.arc(math.pi / 2),
                      Branch.SINGULAR, tol=1e-11)


@pytest.fixture(scope="session")
def cap_2pi5_p25():
    """Shooting eigenpair on Cap(2*pi/5) at p = 2.5 (beta ~ 1.6225)."""
    return solve_beta(PParams(2.5, 3), SphericalDomain.cap(2 * math.pi / 5, 3),
                      Branch.SINGULAR, tol=1e-12)


@pytest.fixture(scope="session")
def octant():
    """The first-octant geodesic triangle on S^2."""
    return SphericalDomain.polygon([[1.0, 0.0, 0.0],
                                    [0.0, 1.0, 0.0],
                                    [0.0, 0.0, 1.0]])
