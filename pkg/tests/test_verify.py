import math

import numpy as np
import pytest

from spheig import (ArcMesh, Branch, PositivityError, PParams, RangeError,
                    build_sub_super, convexity_bound_check,
                    energy_identity_check, homogeneity_check, run_suite,
                    solve_nonlinear, sup_ratio, vector_inequality_check)


@pytest.fixture(scope="module")
def arc_fem_pair():
    mesh = ArcMesh.uniform(0.5 * math.pi, 100)
    return solve_nonlinear(mesh, PParams(2.5, 2), Branch.SINGULAR, tol=1e-10)


def test_suite_passes_and_is_deterministic():
    first = run_suite(seed=3, trials=300)
    second = run_suite(seed=3, trials=300)
    assert [r["check"] for r in first] == [r["check"] for r in second]
    assert [r["slack"] for r in first] == [r["slack"] for r in second]
    failing = [r["check"] for r in first if not r["passed"]]
    assert failing == []
    assert len(first) == len({r["check"] for r in first})


def test_vector_inequality():
    rep = vector_inequality_check(PParams(1.5, 3), 2000, seed=11)
    assert rep["violations"] == 0
    again = vector_inequality_check(PParams(1.5, 3), 2000, seed=11)
    assert again["worst_rel_margin"] == rep["worst_rel_margin"]
    with pytest.raises(RangeError):
        vector_inequality_check(PParams(2.5, 2), 100)
    with pytest.raises(RangeError):
        vector_inequality_check(PParams(1.5, 2), 0)


def test_sub_super_envelopes():
    w = np.linspace(0.1, 2.0, 50)
    wp = 0.5 * w
    pair = build_sub_super(w, wp, 0.7)
    assert pair.delta1 == pytest.approx(0.5)
    assert pair.theta_t == pytest.approx(0.4)
    assert np.all(pair.phi_t <= pair.psi_t + 1e-15)
    rep = convexity_bound_check(pair, w, wp)
    assert rep["passed"]
    with pytest.raises(RangeError):
        build_sub_super(w, wp, 0.4)
    with pytest.raises(PositivityError):
        build_sub_super(w, 2.0 * w, 0.7)


def test_residual_homogeneity(arc_fem_pair):
    P = PParams(2.5, 2)
    for lam in (0.37, 2.0, 11.0):
        rep = homogeneity_check(arc_fem_pair, P, lam)
        assert rep["rel_err"] <= 1e-10, rep
    with pytest.raises(RangeError):
        homogeneity_check(arc_fem_pair, P, -1.0)


def test_energy_identity(arc_fem_pair):
    rep = energy_identity_check(arc_fem_pair, PParams(2.5, 2))
    assert rep["passed"], rep
    assert rep["bound_checked"]
    assert rep["identity_rel_err"] <= rep["tol"]


def test_sup_ratio_stable_under_refinement(arc_fem_pair):
    P = PParams(2.5, 2)
    r1 = sup_ratio(arc_fem_pair, P)
    mesh2 = arc_fem_pair.omega.mesh.refine()
    pair2 = solve_nonlinear(mesh2, P, Branch.SINGULAR, tol=1e-10)
    assert sup_ratio(pair2, P) == pytest.approx(r1, rel=0.05)
    assert r1 > 1.0
