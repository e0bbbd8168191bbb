import math

import numpy as np
import pytest

from spheig import (ArcMesh, Branch, MeshError, PParams, SphericalDomain,
                    SurfaceMesh, cap_mesh, evaluate_residual, load_mesh,
                    polygon_mesh, save_mesh, solve_nonlinear)
from spheig.fem_sphere import (assemble_linearized, assemble_weighted,
                               element_gradients, frozen_eigen_mu)
from spheig.ode_axisym import solve_beta


def test_arc_mesh_basics():
    m = ArcMesh.uniform(math.pi, 100)
    assert m.n_vertices == 101
    assert m.h() == pytest.approx(math.pi / 100)
    assert m.lumped_mass().sum() == pytest.approx(math.pi)
    r = m.refine()
    assert r.n_vertices == 201
    assert r.h() == pytest.approx(m.h() / 2)
    with pytest.raises(MeshError):
        ArcMesh([0.0, 1.0])
    with pytest.raises(MeshError):
        ArcMesh([0.0, 0.5, 0.4])


def test_cap_mesh_area_and_snap():
    exact = 2.0 * math.pi  # hemisphere area
    errs = []
    for n in (8, 16):
        m = cap_mesh(math.pi / 2, n)
        errs.append(abs(m.areas.sum() - exact) / exact)
    assert errs[0] < 1e-2 and errs[1] < 2.5e-3
    assert errs[0] / errs[1] > 3.0  # second order in h

    r = cap_mesh(math.pi / 2, 8).refine()
    bnd = r.vertices[r.boundary_flags]
    colat = np.arccos(np.clip(bnd[:, 2], -1.0, 1.0))
    assert np.abs(colat - math.pi / 2).max() < 1e-12


def test_surface_mesh_validation():
    v = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
                  [1.0, 1.0, 0.0] / np.sqrt(2.0)])
    with pytest.raises(MeshError):
        SurfaceMesh(2.0 * v, [[0, 1, 2]])
    with pytest.raises(MeshError):
        SurfaceMesh(v, [[0, 1, 1]])
    # an edge shared by three triangles is non-conforming
    with pytest.raises(MeshError):
        SurfaceMesh(v, [[0, 1, 2], [0, 1, 3], [0, 1, 2]])
    m = SurfaceMesh(v[:3], [[0, 2, 1]])  # orientation is normalized
    assert m.areas[0] > 0.0


def test_mesh_io_round_trip(tmp_path, octant):
    m = polygon_mesh(octant, 0.15)
    path = tmp_path / "oct.mesh"
    save_mesh(m, path)
    back = load_mesh(path)
    assert np.abs(back.vertices - m.vertices).max() < 1e-15
    assert np.array_equal(back.triangles, m.triangles)


def test_hemisphere_mu_second_order():
    P = PParams(2.0, 3)
    errs = []
    for n in (8, 16):
        m = cap_mesh(math.pi / 2, n)
        mu, field = frozen_eigen_mu(m, P, 1.0, np.ones(m.n_vertices))
        errs.append(abs(mu - 2.0))
        assert np.all(field.values[~m.boundary_flags] > 0.0)
    assert errs[0] < 2.5e-2 and errs[1] < 6.5e-3
    assert errs[0] / errs[1] > 3.0


def test_p2_cap_solve_both_branches():
    m = cap_mesh(math.pi / 2, 24)
    P = PParams(2.0, 3)
    sing = solve_nonlinear(m, P, Branch.SINGULAR, tol=1e-10)
    reg = solve_nonlinear(m, P, Branch.REGULAR, tol=1e-10)
    assert sing.beta == pytest.approx(2.0, abs=1e-3)
    assert reg.beta == pytest.approx(-1.0, abs=1e-3)
    # the discrete relation is branch-symmetric, so the meshes cancel exactly
    assert sing.beta - 1.0 == pytest.approx(-reg.beta, abs=1e-9)


def test_arc_p3_fem_converges_to_shooting():
    P = PParams(3.0, 2)
    ode = solve_beta(P, SphericalDomain.arc(math.pi), Branch.SINGULAR,
                     tol=1e-12)
    diffs = []
    for ne in (100, 200, 400):
        mesh = ArcMesh.uniform(math.pi, ne)
        fem = solve_nonlinear(mesh, P, Branch.SINGULAR, tol=1e-10)
        diffs.append(abs(fem.beta - ode.beta))
    assert diffs[0] > diffs[1] > diffs[2]
    order = math.log2(diffs[0] / diffs[2]) / 2.0
    assert order > 1.5


def test_cap_p25_fem_matches_shooting(cap_2pi5_p25):
    m = cap_mesh(2 * math.pi / 5, 12)
    fem = solve_nonlinear(m, PParams(2.5, 3), Branch.SINGULAR, tol=1e-8)
    assert abs(fem.beta - cap_2pi5_p25.beta) < 5e-3


def test_residual_homogeneity(cap_2pi5_p25):
    P = PParams(2.5, 3)
    grid = cap_2pi5_p25.omega
    r1 = evaluate_residual(grid, P, cap_2pi5_p25.beta)
    lam = 3.7
    r2 = evaluate_residual(grid.scaled(lam), P, cap_2pi5_p25.beta)
    assert r2 / r1 == pytest.approx(lam ** (P.p - 1.0), rel=1e-8)


def test_residual_second_order_on_exact_field():
    P = PParams(2.0, 3)
    resid = []
    for n in (8, 16, 32):
        m = cap_mesh(math.pi / 2, n)
        vals = m.vertices[:, 2].copy()
        vals[m.boundary_flags] = 0.0
        resid.append((m.h(), evaluate_residual(m, P, 2.0, vals)))
    for h, r in resid:
        assert r < 1.0 * h * h
    assert resid[0][1] > resid[1][1] > resid[2][1]


def test_linearization_tangency():
    # J(v) v = (p-1) A(v) v for the p-homogeneous operator at eps = 0
    P = PParams(2.5, 3)
    m = cap_mesh(2 * math.pi / 5, 10)
    rng = np.random.default_rng(7)
    vals = m.vertices[:, 2] + 0.1 * rng.standard_normal(m.n_vertices)
    J, _ = assemble_linearized(m, P, vals)
    A, _ = assemble_weighted(m, P, 0.0, vals)
    lhs = J @ vals
    rhs = (P.p - 1.0) * (A @ vals)
    assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-12


def test_linearized_matrix_ellipticity_eigenvalues():
    P = PParams(1.5, 3)
    m = cap_mesh(0.4 * math.pi, 8)
    vals = np.cos(np.arccos(np.clip(m.vertices[:, 2], -1, 1)))
    _, B = assemble_linearized(m, P, vals)
    G = element_gradients(m, vals)
    g = np.linalg.norm(G, axis=1)
    lo, hi = min(1.0, P.p - 1.0), max(1.0, P.p - 1.0)
    for k in range(len(B)):
        if g[k] < 1e-12:
            continue
        ev = np.linalg.eigvalsh(B[k]) / g[k] ** (P.p - 2.0)
        assert ev.min() > lo - 1e-9 and ev.max() < hi + 1e-9


def test_octant_mu_and_beta(octant):
    P = PParams(2.0, 3)
    pm = polygon_mesh(octant, 0.09)
    mu, _ = frozen_eigen_mu(pm, P, 1.0, np.ones(pm.n_vertices))
    assert mu == pytest.approx(12.0, abs=0.08)
    pair = solve_nonlinear(pm.refine(), P, Branch.SINGULAR, tol=1e-9)
    assert pair.beta == pytest.approx(4.0, abs=5e-3)


def test_linearized_needs_surface_mesh():
    with pytest.raises(MeshError):
        assemble_linearized(ArcMesh.uniform(1.0, 8), PParams(2.5, 2),
                            np.zeros(9))
