import math

import numpy as np
import pytest

from spheig import (ComplementPolar, DomainFamily, DomainKind, Direction,
                    EmptyDomain, OutsideDomain, PParams, SphericalDomain,
                    boundary_distance, expand, parse_domain_file, shrink,
                    write_domain_file)
from spheig.geometry import (geodesic_distance, geodesic_step,
                             sphere_surface_measure, tangent_toward)


def test_pparams_beta0():
    assert PParams(2.0, 3).beta0 == 1.0
    assert PParams(3.0, 2).beta0 == -0.5
    assert PParams(2.0, 2).beta0 == 0.0


@pytest.mark.parametrize("p,dim", [(1.0, 2), (0.5, 3), (math.inf, 2), (2.0, 1)])
def test_pparams_rejects_bad_values(p, dim):
    with pytest.raises(ValueError):
        PParams(p, dim)


def test_sphere_surface_measures():
    assert sphere_surface_measure(1) == pytest.approx(2.0 * math.pi)
    assert sphere_surface_measure(2) == pytest.approx(4.0 * math.pi)


def test_geodesic_helpers():
    ex = np.array([1.0, 0.0, 0.0])
    ez = np.array([0.0, 0.0, 1.0])
    assert geodesic_distance(ex, ez) == pytest.approx(math.pi / 2)
    t = tangent_toward(ez, ex)
    stepped = geodesic_step(ez, t, math.pi / 2)
    assert np.allclose(stepped, ex, atol=1e-14)


def test_arc_and_cap_validation():
    assert SphericalDomain.arc(1.0).kind == DomainKind.ARC
    with pytest.raises(ValueError):
        SphericalDomain.arc(0.0)
    with pytest.raises(ValueError):
        SphericalDomain.arc(2.0 * math.pi)
    with pytest.raises(ValueError):
        SphericalDomain.cap(math.pi, 3)
    with pytest.raises(ValueError):
        SphericalDomain.cap(1.0, 2)


def test_polygon_validation(octant):
    assert octant.dim_N == 3
    with pytest.raises(ValueError):
        SphericalDomain.polygon([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                                 [0.0, 0.0, 1.0]])
    # figure-eight ordering crosses itself
    s = 1.0 / math.sqrt(3.0)
    with pytest.raises(ValueError):
        SphericalDomain.polygon([[s, s, s], [-s, -s, s], [-s, s, s],
                                 [s, -s, s]])
    # spans more than a hemisphere
    with pytest.raises(ValueError):
        SphericalDomain.polygon([[1.0, 0.0, 0.0], [-0.9, 0.1, 0.0],
                                 [0.0, 0.0, 1.0]])


def test_polygon_orientation_normalized(octant):
    rev = SphericalDomain.polygon(octant.vertices[::-1])
    assert {tuple(np.round(v, 12)) for v in rev.vertices} == \
           {tuple(np.round(v, 12)) for v in octant.vertices}
    # spherical excess of the octant: three right angles
    angles = octant.interior_angles()
    assert np.allclose(angles, math.pi / 2, atol=1e-9)


def test_contains(octant):
    arc = SphericalDomain.arc(math.pi / 2)
    assert arc.contains([1.0, 0.0])
    assert not arc.contains([0.0, 1.0])
    cap = SphericalDomain.cap(0.5, 3)
    assert cap.contains([0.0, 0.0, 1.0])
    assert not cap.contains([1.0, 0.0, 0.0])
    c = 1.0 / math.sqrt(3.0)
    assert octant.contains([c, c, c])
    assert not octant.contains([-c, c, c])


def test_boundary_distance(octant):
    arc = SphericalDomain.arc(math.pi / 2)
    assert boundary_distance(arc, [1.0, 0.0]) == pytest.approx(math.pi / 4)
    cap = SphericalDomain.cap(0.7, 3)
    assert boundary_distance(cap, [0.0, 0.0, 1.0]) == pytest.approx(0.7)
    c = 1.0 / math.sqrt(3.0)
    # the octant center is asin(1/sqrt(3)) from each edge great circle
    assert boundary_distance(octant, [c, c, c]) == \
        pytest.approx(math.asin(c), abs=1e-12)
    with pytest.raises(OutsideDomain):
        boundary_distance(cap, [1.0, 0.0, 0.0])


def test_shrink_expand_closed_forms():
    arc = SphericalDomain.arc(1.0)
    assert shrink(arc, 0.2).alpha == pytest.approx(0.6)
    assert expand(arc, 0.2).alpha == pytest.approx(1.4)
    cap = SphericalDomain.cap(1.0, 4)
    assert shrink(cap, 0.25).alpha == pytest.approx(0.75)
    assert expand(cap, 0.25).alpha == pytest.approx(1.25)
    assert shrink(cap, 0.25).dim_N == 4
    with pytest.raises(EmptyDomain):
        shrink(arc, 0.5)
    with pytest.raises(ComplementPolar):
        expand(cap, math.pi)
    assert shrink(arc, 0.0) is arc


def test_polygon_offset_nesting(octant):
    small = shrink(octant, 0.05)
    large = expand(octant, 0.05)
    assert all(octant.contains(v, tol=1e-9) for v in small.vertices)
    assert all(large.contains(v, tol=1e-9) for v in octant.vertices)
    assert small.inradius() < octant.inradius() < large.inradius()
    with pytest.raises(EmptyDomain):
        shrink(octant, 1.0)


def test_domain_family(octant):
    fam = DomainFamily(SphericalDomain.cap(1.0, 3), Direction.INNER,
                       (0.2, 0.1, 0.05))
    alphas = [d.alpha for d in fam.domains()]
    assert alphas == pytest.approx([0.8, 0.9, 0.95])
    with pytest.raises(ValueError):
        DomainFamily(octant, Direction.INNER, (0.1, 0.1))
    with pytest.raises(ValueError):
        DomainFamily(octant, Direction.OUTER, ())


def test_domain_file_round_trip(tmp_path, octant):
    p_arc = tmp_path / "arc.domain"
    write_domain_file(SphericalDomain.arc(1.25), p_arc)
    back = parse_domain_file(p_arc)
    assert back.kind == DomainKind.ARC and back.alpha == 1.25

    p_poly = tmp_path / "poly.domain"
    write_domain_file(octant, p_poly)
    back = parse_domain_file(p_poly)
    assert back.kind == DomainKind.POLYGON
    assert np.allclose(back.vertices, octant.vertices)

    bad = tmp_path / "bad.domain"
    bad.write_text("kind = arc\nwhatever\n")
    with pytest.raises(ValueError):
        parse_domain_file(bad)
