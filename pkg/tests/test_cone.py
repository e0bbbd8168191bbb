import math

import numpy as np
import pytest

from spheig import (ConeDomain, ConeField, ConeGrid, ConfigError,
                    ContractionFailure, FitError, NondegeneracyFailure,
                    PositivityError, PParams, SphericalDomain, TauFamily,
                    contraction_check, decay_fit, deformation_family,
                    diagnostic_pair, nondegeneracy_check, sandwich_check,
                    solve_truncated, tau_lipschitz_check, write_cone_report)

P2 = PParams(2.0, 2)


def synthetic_family(b, n_s, n_t):
    """Family v_tau = (1 + 0.5 tau sin t) sin t / r: harmonic-looking but the
    tau quotient is radially constant, so the oscillation never decays."""
    cone = ConeDomain(SphericalDomain.arc(math.pi), 1.0, b)
    grid = ConeGrid(cone, n_s, n_t)
    taus = np.array([0.0, 0.5, 1.0])
    r = np.exp(grid.node_s)
    st = np.sin(grid.node_theta)
    fields = []
    for tau in taus:
        vals = (1.0 + 0.5 * tau * st) * st / r
        fields.append(ConeField(grid, vals, False, vals[: n_t + 1]))

    scale = float(np.max(np.abs(fields[-1].values)))
    nspan = grid.n_s + 1
    M = np.full((len(taus) - 1, nspan), -np.inf)
    m = np.full((len(taus) - 1, nspan), np.inf)
    quots = np.full((len(taus) - 1, grid.n_vertices), np.nan)
    floor = 1e-14 * scale
    for k in range(len(taus) - 1):
        va, vb = fields[k].values, fields[k + 1].values
        mid = 0.5 * (va + vb)
        ok = mid > floor
        quot = np.zeros_like(mid)
        quot[ok] = (vb[ok] - va[ok]) / ((taus[k + 1] - taus[k]) * mid[ok])
        quots[k, ok] = quot[ok]
        qm = grid.as_matrix(quot)
        okm = grid.as_matrix(ok)
        row_max = np.where(okm.any(axis=1),
                           np.where(okm, qm, -np.inf).max(axis=1), -np.inf)
        row_min = np.where(okm.any(axis=1),
                           np.where(okm, qm, np.inf).min(axis=1), np.inf)
        M[k] = np.maximum.accumulate(row_max[::-1])[::-1]
        m[k] = np.minimum.accumulate(row_min[::-1])[::-1]
    prof = np.sin(grid.theta_nodes)
    return TauFamily(grid, taus, fields, 2.0 / 3.0, 1.0, 1.5 * prof, prof,
                     P2, M, m, quots)


def test_domain_and_grid_validation(octant):
    with pytest.raises(ConfigError):
        ConeDomain(octant, 1.0, 4.0)
    with pytest.raises(ConfigError):
        ConeDomain(SphericalDomain.arc(1.0), 2.0, 1.0)
    with pytest.raises(ConfigError):
        ConeGrid(ConeDomain(SphericalDomain.arc(1.0), 1.0, 4.0), 2, 32)


def test_truncated_harmonic_matches_closed_form():
    # u = (c1 r + c2 / r) sin(theta): harmonic, sin data at r=1, zero at r=4
    cone = ConeDomain(SphericalDomain.arc(math.pi), 1.0, 4.0)
    c1 = 1.0 / (1.0 - 16.0)
    c2 = -16.0 * c1

    errs = []
    for n_t in (32, 64):
        fld = solve_truncated(cone, P2, lambda t: math.sin(t), n_t=n_t)
        r = np.exp(fld.grid.node_s)
        exact = (c1 * r + c2 / r) * np.sin(fld.grid.node_theta)
        errs.append(float(np.max(np.abs(fld.values - exact))))
    assert errs[0] <= 5e-4
    rate = math.log2(errs[0] / errs[1])
    assert rate >= 1.8


def test_decay_fit_recovers_exact_power():
    cone = ConeDomain(SphericalDomain.arc(math.pi), 1.0, 256.0)
    grid = ConeGrid(cone, 96, 16)
    vals = np.exp(-1.37 * grid.node_s) * np.sin(grid.node_theta)
    fld = ConeField(grid, vals, False, vals[:17])
    beta, window = decay_fit(fld, math.pi / 2)
    assert beta == pytest.approx(1.37, abs=1e-10)
    assert window[0] == pytest.approx(256.0 ** (1.0 / 3.0), rel=1e-12)
    assert window[1] == pytest.approx(256.0 ** (2.0 / 3.0), rel=1e-12)


def test_decay_fit_rejects_nonpositive_ray():
    cone = ConeDomain(SphericalDomain.arc(math.pi), 1.0, 16.0)
    grid = ConeGrid(cone, 16, 16)
    fld = ConeField(grid, -np.ones(grid.n_vertices), False, None)
    with pytest.raises(FitError):
        decay_fit(fld, math.pi / 2)


def test_inner_data_validation():
    cone = ConeDomain(SphericalDomain.arc(math.pi), 1.0, 4.0)
    with pytest.raises(ConfigError, match="nonnegative"):
        solve_truncated(cone, P2, lambda t: math.sin(t) - 0.5, n_t=8)
    with pytest.raises(ConfigError, match="lateral corners"):
        solve_truncated(cone, P2, lambda t: 1.0, n_t=8)
    with pytest.raises(ConfigError, match="length"):
        solve_truncated(cone, P2, np.ones(5), n_t=8)
    zero = solve_truncated(cone, P2, lambda t: 0.0, n_t=8)
    assert np.all(zero.values == 0.0)


def test_family_grid_validation():
    cone = ConeDomain(SphericalDomain.arc(math.pi), 1.0, 8.0)
    prof = lambda t: math.sin(t)
    with pytest.raises(ConfigError, match="increasing"):
        deformation_family(cone, P2, prof, prof, [0.0, 0.6, 0.3, 1.0],
                           beta=1.0, n_t=8)
    with pytest.raises(ConfigError, match="span"):
        deformation_family(cone, P2, prof, prof, [0.0, 0.5], beta=1.0, n_t=8)
    with pytest.raises(PositivityError):
        deformation_family(cone, P2, prof, lambda t: math.sin(2.0 * t),
                           [0.0, 1.0], beta=1.0, n_t=8)


def test_small_family_passes_checks():
    domain = SphericalDomain.arc(math.pi / 2)
    theta, w, wp, beta = diagnostic_pair(domain, P2, n_t=24)
    assert beta == pytest.approx(2.0, abs=1e-8)
    assert w[0] == w[-1] == 0.0 and wp[0] == wp[-1] == 0.0
    assert np.all(w[1:-1] > 0.0) and np.all(wp[1:-1] > 0.0)

    cone = ConeDomain(domain, 1.0, 64.0)
    fam = deformation_family(cone, P2, w, wp, [0.0, 0.5, 1.0], beta=beta,
                             n_t=24)
    assert 0.0 < fam.delta1 < 1.0
    lip = tau_lipschitz_check(fam)
    assert lip["passed"], lip
    sand = sandwich_check(fam, 1)
    assert sand["passed"], sand
    con = contraction_check(fam)
    assert con["passed"]
    assert con["theta_fit"] <= con["bound"] + con["tol"]
    osc = con["osc"]
    assert len(osc) >= 4
    assert all(b <= a * (1.0 + 1e-12) for a, b in zip(osc, osc[1:]))


def test_contraction_flags_non_decaying_family():
    fam = synthetic_family(4096.0, 192, 16)
    with pytest.raises(ContractionFailure, match="bound"):
        contraction_check(fam)


def test_contraction_needs_enough_shells():
    fam = synthetic_family(8.0, 16, 16)
    with pytest.raises(ContractionFailure, match="widen b/a"):
        contraction_check(fam)


def test_osc_is_per_pair():
    fam = synthetic_family(8.0, 16, 16)
    fam.M = np.array([[3.0, 2.0], [5.0, 5.0]])
    fam.m = np.array([[1.0, 1.0], [4.0, 4.0]])
    assert np.allclose(fam.osc(), [2.0, 1.0])


def test_nondegeneracy_half_space_band():
    # u = r sin(theta) = dist to the boundary ray, so the band is exactly 1
    cone = ConeDomain(SphericalDomain.arc(math.pi), 1.0, 256.0)
    grid = ConeGrid(cone, 64, 32)
    vals = np.exp(grid.node_s) * np.sin(grid.node_theta)
    fld = ConeField(grid, vals, False, vals[:33])
    rep = nondegeneracy_check(fld, 0.3)
    assert rep["n_nodes"] > 0
    assert rep["ratio"] <= 1.001
    assert rep["band_min"] == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(NondegeneracyFailure):
        nondegeneracy_check(fld, 1e-4)


def test_diagnostic_pair_rejects_polygon(octant):
    with pytest.raises(ConfigError):
        diagnostic_pair(octant, PParams(2.0, 3))


def test_cone_report_format(tmp_path):
    fam = synthetic_family(8.0, 16, 16)
    con = {"c_hat_est": 2.0, "theta_fit": 0.1, "bound": 0.6,
           "osc": [1.0, 0.5], "shell_radii": [1.0, 2.0]}
    path = tmp_path / "cone.csv"
    write_cone_report(path, fam, con, beta_fit=1.5)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# delta1,")
    assert lines[1] == "# c_hat_est,2"
    assert lines[4] == "# beta_fit,1.5"
    assert lines[5] == "shell,r,osc"
    assert lines[6] == "0,1,1"
    assert lines[7] == "1,2,0.5"
