import math

import numpy as np
import pytest

from spheig import Branch, DegenerateWeight, PParams, SphericalDomain
from spheig.errors import BracketFailure
from spheig.ode_axisym import (first_zero_at, ode_rhs, series_start, shoot,
                               solve_beta)

# dual-integrator value (adaptive DOP853 and fixed-step RK4 agree to 5e-12)
FIRST_ZERO_P3_BETA1 = 1.9886066670577
# Arc(pi) at p = 3 lands on 1/sqrt(3)
BETA_P3_ARC_PI = 0.5773502691896


def test_first_zero_golden_dual_integrator():
    P = PParams(3.0, 2)
    a = shoot(P, 1.0, 2.0, method="dop853")
    b = shoot(P, 1.0, 2.0, method="rk4", n_steps=8192)
    assert a.first_zero == pytest.approx(FIRST_ZERO_P3_BETA1, abs=1e-11)
    assert b.first_zero == pytest.approx(FIRST_ZERO_P3_BETA1, abs=1e-11)
    assert abs(a.first_zero - b.first_zero) < 1e-10


def test_arc_pi_p3_exponent_dual_integrator():
    P = PParams(3.0, 2)
    dom = SphericalDomain.arc(math.pi)
    s1 = solve_beta(P, dom, Branch.SINGULAR, tol=1e-12)
    s2 = solve_beta(P, dom, Branch.SINGULAR, tol=1e-12, method="rk4",
                    n_steps=8192)
    assert s1.beta == pytest.approx(BETA_P3_ARC_PI, abs=5e-12)
    assert s2.beta == pytest.approx(BETA_P3_ARC_PI, abs=5e-12)
    assert s1.beta == pytest.approx(1.0 / math.sqrt(3.0), abs=5e-12)


@pytest.mark.parametrize("alpha", [math.pi / 3, 2.2])
def test_p2_arc_closed_form(alpha):
    P = PParams(2.0, 2)
    dom = SphericalDomain.arc(alpha)
    sing = solve_beta(P, dom, Branch.SINGULAR, tol=1e-11)
    reg = solve_beta(P, dom, Branch.REGULAR, tol=1e-11)
    assert sing.beta == pytest.approx(math.pi / alpha, abs=1e-9)
    assert reg.beta == pytest.approx(-math.pi / alpha, abs=1e-9)


def test_p2_hemisphere_and_regular_half_space():
    hemi = SphericalDomain.cap(math.pi / 2, 3)
    sing = solve_beta(PParams(2.0, 3), hemi, Branch.SINGULAR, tol=1e-11)
    assert sing.beta == pytest.approx(2.0, abs=1e-9)
    # u = x_N is p-harmonic on the half space for every p
    reg = solve_beta(PParams(1.5, 3), hemi, Branch.REGULAR, tol=1e-11)
    assert reg.beta == pytest.approx(-1.0, abs=1e-9)


def test_profile_normalized_and_positive(quarter_arc_p25):
    traj = quarter_arc_p25.omega
    assert traj.integral_abs() == pytest.approx(1.0, abs=1e-12)
    assert np.all(traj.values[1:-1] > 0.0)
    assert traj.values[0] == 0.0


def test_series_start_matches_rhs():
    P = PParams(2.5, 4)
    beta = 1.7
    t0 = 1e-6
    w, wp = series_start(P, beta, t0)
    lam = (P.p - 1.0) * beta * (beta - P.beta0)
    c2 = -lam / (2.0 * (P.dim_N - 1))
    _, wpp = ode_rhs(P, beta, t0, w, wp)
    assert wpp == pytest.approx(2.0 * c2, rel=1e-5)


def test_first_zero_decreases_with_beta():
    P = PParams(2.0, 2)
    dom = SphericalDomain.arc(math.pi)
    zeros = [first_zero_at(P, dom, b) for b in (1.0, 2.0, 3.0)]
    assert zeros[0] > zeros[1] > zeros[2]
    assert zeros == pytest.approx([math.pi, math.pi / 2, math.pi / 3],
                                  abs=1e-8)


def test_degenerate_weight_and_bad_beta():
    P = PParams(1.5, 2)
    with pytest.raises(DegenerateWeight):
        ode_rhs(P, 1.0, 0.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        shoot(P, 0.0, 1.0)


def test_scan_window_failure():
    # the magnitude window tops out at 50, far below pi/alpha here
    P = PParams(2.0, 2)
    with pytest.raises(BracketFailure):
        solve_beta(P, SphericalDomain.arc(0.05), Branch.SINGULAR)


def test_regularization_activation_reported():
    P = PParams(2.0, 2)
    res = shoot(P, 2.0, math.pi / 2, eps=1e-10)
    assert 0.0 <= res.regularization_max < 1e-6
    assert res.endpoint_value == pytest.approx(0.0, abs=1e-9)
