"""Spherical domains and their inner/outer approximation families.

Domains live on the unit sphere S^(N-1): circular arcs (N = 2), axisymmetric
caps (N >= 3) and geodesic polygons (N = 3, restricted to an open hemisphere
so that gnomonic projection is available).  Domain values are immutable;
``shrink`` and ``expand`` return new instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ComplementPolar, EmptyDomain, MonotonicityViolation, OutsideDomain

TWO_PI = 2.0 * math.pi

# Polygons must stay this far inside an open hemisphere around their centroid.
_HEMISPHERE_MARGIN = 0.97 * math.pi / 2.0


@dataclass(frozen=True)
class PParams:
    """Analytic parameters of the eigenvalue problem.

    Parameters
    ----------
    p : float
        Quasilinear exponent, p > 1.
    dim_N : int
        Ambient dimension N >= 2; the sphere is S^(N-1).

    Attributes
    ----------
    beta0 : float
        (N - p)/(p - 1), the exponent of the radial power solution of the
        full-space problem.  It separates the singular branch (beta > 0)
        from the regular branch (beta < 0).
    """

    p: float
    dim_N: int
    beta0: float = field(init=False)

    def __post_init__(self):
        if not (self.p > 1.0 and math.isfinite(self.p)):
            raise ValueError(f"p must be a finite real > 1, got {self.p}")
        if int(self.dim_N) != self.dim_N or self.dim_N < 2:
            raise ValueError(f"dim_N must be an integer >= 2, got {self.dim_N}")
        object.__setattr__(self, "dim_N", int(self.dim_N))
        object.__setattr__(self, "beta0", (self.dim_N - self.p) / (self.p - 1.0))


class DomainKind(str, Enum):
    ARC = "arc"
    CAP = "cap"
    POLYGON = "polygon"


class Direction(str, Enum):
    INNER = "inner"
    OUTER = "outer"


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def geodesic_distance(u, v) -> float:
    """Great-circle distance between two unit vectors (robust near 0 and pi)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = np.linalg.norm(np.cross(u, v)) if u.shape[-1] == 3 else abs(u[0] * v[1] - u[1] * v[0])
    return math.atan2(cross, float(np.dot(u, v)))


def tangent_toward(a, b):
    """Unit tangent at a pointing along the geodesic toward b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = b - np.dot(a, b) * a
    n = np.linalg.norm(t)
    if n < 1e-15:
        raise ValueError("points are parallel or antipodal; tangent undefined")
    return t / n


def geodesic_step(v, tangent, dist: float):
    """Walk distance ``dist`` from unit vector v along a unit tangent."""
    return math.cos(dist) * np.asarray(v, float) + math.sin(dist) * np.asarray(tangent, float)


def sphere_surface_measure(n: int) -> float:
    """Total measure of the unit sphere S^n (e.g. |S^1| = 2*pi)."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


# ---------------------------------------------------------------------------
# gnomonic helpers for polygons


def _poly_frame(vertices: np.ndarray):
    center = _unit(vertices.sum(axis=0))
    # any orthonormal tangent pair at center
    trial = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(trial, center)) > 0.9:
        trial = np.array([0.0, 1.0, 0.0])
    e1 = _unit(trial - np.dot(trial, center) * center)
    e2 = np.cross(center, e1)
    return center, e1, e2


def _gnomonic_xy(points: np.ndarray, frame) -> np.ndarray:
    center, e1, e2 = frame
    z = points @ center
    if np.any(z <= 1e-12):
        raise ValueError("point outside the projection hemisphere")
    return np.stack([points @ e1 / z, points @ e2 / z], axis=-1)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _is_simple(xy: np.ndarray) -> bool:
    n = len(xy)
    for i in range(n):
        a1, a2 = xy[i], xy[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(a1, a2, xy[j], xy[(j + 1) % n]):
                return False
    return True


def _shoelace(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _crossing_number_inside(xy_poly: np.ndarray, pt) -> bool:
    x, y = pt
    inside = False
    n = len(xy_poly)
    for i in range(n):
        x1, y1 = xy_poly[i]
        x2, y2 = xy_poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xs = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xs > x:
                inside = not inside
    return inside


@dataclass(frozen=True)
class SphericalDomain:
    """An open domain on S^(N-1): arc, cap, or simple geodesic polygon.

    Use the factory classmethods :meth:`arc`, :meth:`cap`, :meth:`polygon`.
    ``alpha`` is the arc length (arcs) or the geodesic opening radius (caps);
    polygon vertices are unit 3-vectors listed counterclockwise (as seen from
    outside the sphere) along a simple boundary.
    """

    kind: DomainKind
    dim_N: int
    alpha: float | None = None
    vertices: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == DomainKind.ARC:
            if self.dim_N != 2:
                raise ValueError("arcs live on S^1 (dim_N = 2)")
            if not (0.0 < self.alpha < TWO_PI):
                raise ValueError(f"arc length must lie in (0, 2*pi), got {self.alpha}")
        elif self.kind == DomainKind.CAP:
            if self.dim_N < 3:
                raise ValueError("caps need dim_N >= 3")
            if not (0.0 < self.alpha < math.pi):
                raise ValueError(f"cap opening must lie in (0, pi), got {self.alpha}")
        elif self.kind == DomainKind.POLYGON:
            if self.dim_N != 3:
                raise ValueError("geodesic polygons live on S^2 (dim_N = 3)")
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[1] != 3 or len(v) < 3:
                raise ValueError("polygon needs at least 3 unit 3-vectors")
            norms = np.linalg.norm(v, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("polygon vertices must be unit vectors")
            v = v / norms[:, None]
            center = _unit(v.sum(axis=0))
            dists = [geodesic_distance(center, vi) for vi in v]
            if max(dists) > _HEMISPHERE_MARGIN:
                raise ValueError("polygon must fit inside an open hemisphere")
            frame = (center,) + _poly_frame(v)[1:]
            xy = _gnomonic_xy(v, frame)
            if not _is_simple(xy):
                raise ValueError("polygon boundary must be simple (no crossings)")
            if _shoelace(xy) < 0.0:
                v = v[::-1].copy()
            for i in range(len(v)):
                if geodesic_distance(v[i], v[(i + 1) % len(v)]) < 1e-8:
                    raise ValueError("repeated or nearly repeated polygon vertices")
            v.setflags(write=False)
            object.__setattr__(self, "vertices", v)
        else:  # pragma: no cover
            raise ValueError(f"unknown kind {self.kind}")

    # -- factories ---------------------------------------------------------

    @classmethod
    def arc(cls, alpha: float) -> "SphericalDomain":
        return cls(DomainKind.ARC, 2, alpha=float(alpha))

    @classmethod
    def cap(cls, alpha: float, dim_N: int = 3) -> "SphericalDomain":
        return cls(DomainKind.CAP, int(dim_N), alpha=float(alpha))

    @classmethod
    def polygon(cls, vertices) -> "SphericalDomain":
        return cls(DomainKind.POLYGON, 3, vertices=np.asarray(vertices, dtype=float))

    # -- basic queries -------------------------------------------------------

    def frame(self):
        """Gnomonic frame (center, e1, e2) for polygon domains."""
        if self.kind != DomainKind.POLYGON:
            raise ValueError("frame() is polygon-only")
        return _poly_frame(self.vertices)

    def contains(self, sigma, tol: float = 1e-12) -> bool:
        sigma = _unit(sigma)
        if self.kind == DomainKind.ARC:
            phi = math.atan2(sigma[1], sigma[0])
            return abs(phi) <= self.alpha / 2.0 + tol
        if self.kind == DomainKind.CAP:
            theta = math.acos(np.clip(sigma[-1], -1.0, 1.0))
            return theta <= self.alpha + tol
        frame = self.frame()
        if np.dot(sigma, frame[0]) <= 1e-12:
            return False
        xy = _gnomonic_xy(sigma[None, :], frame)[0]
        if _crossing_number_inside(_gnomonic_xy(self.vertices, frame), xy):
            return True
        return _polygon_boundary_distance(self, sigma) <= tol

    def interior_angles(self) -> np.ndarray:
        """Interior angle at each polygon vertex, in (0, 2*pi)."""
        if self.kind != DomainKind.POLYGON:
            raise ValueError("interior_angles() is polygon-only")
        v = self.vertices
        n = len(v)
        out = np.empty(n)
        for i in range(n):
            t_prev = tangent_toward(v[i], v[(i - 1) % n])
            t_next = tangent_toward(v[i], v[(i + 1) % n])
            gamma = math.acos(float(np.clip(np.dot(t_prev, t_next), -1.0, 1.0)))
            bis = t_prev + t_next
            if np.linalg.norm(bis) < 1e-12:
                bis = np.cross(v[i], t_next)
            bis = _unit(bis - np.dot(bis, v[i]) * v[i])
            probe = _unit(geodesic_step(v[i], bis, 1e-5))
            out[i] = gamma if self.contains(probe, tol=0.0) else TWO_PI - gamma
        return out

    def inradius(self) -> float:
        """Geodesic inradius (polygons: estimated on an interior sample grid)."""
        if self.kind == DomainKind.ARC:
            return self.alpha / 2.0
        if self.kind == DomainKind.CAP:
            return self.alpha
        frame = self.frame()
        xy = _gnomonic_xy(self.vertices, frame)
        lo, hi = xy.min(axis=0), xy.max(axis=0)
        gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], 48), np.linspace(lo[1], hi[1], 48))
        best = 0.0
        center, e1, e2 = frame
        for x, y in zip(gx.ravel(), gy.ravel()):
            if not _crossing_number_inside(xy, (x, y)):
                continue
            pt = _unit(center + x * e1 + y * e2)
            best = max(best, _polygon_boundary_distance(self, pt))
        return best


def _polygon_boundary_distance(domain: SphericalDomain, sigma) -> float:
    v = domain.vertices
    n = len(v)
    best = math.inf
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        nrm = _unit(np.cross(a, b))
        # foot of the great-circle perpendicular, then check it lies on the edge
        foot = sigma - np.dot(sigma, nrm) * nrm
        fn = np.linalg.norm(foot)
        on_edge = False
        if fn > 1e-15:
            foot = foot / fn
            on_edge = (np.dot(np.cross(a, foot), nrm) >= -1e-12 and
                       np.dot(np.cross(foot, b), nrm) >= -1e-12)
        if on_edge:
            d = abs(math.asin(float(np.clip(np.dot(sigma, nrm), -1.0, 1.0))))
        else:
            d = min(geodesic_distance(sigma, a), geodesic_distance(sigma, b))
        best = min(best, d)
    return best


def boundary_distance(domain: SphericalDomain, sigma, tol: float = 1e-9) -> float:
    """Geodesic distance from a point of the closed domain to its boundary.

    Parameters
    ----------
    domain : SphericalDomain
    sigma : array_like
        Unit vector of length ``domain.dim_N`` (arcs: 2-vector on S^1).
    tol : float
        Points farther than ``tol`` outside the closure raise OutsideDomain.

    Returns
    -------
    float
        Distance to the nearest boundary point (0 on the boundary).
    """
    sigma = _unit(sigma)
    if len(sigma) != domain.dim_N:
        raise ValueError("sigma dimension does not match the domain")
    if domain.kind == DomainKind.ARC:
        phi = math.atan2(sigma[1], sigma[0])
        d = domain.alpha / 2.0 - abs(phi)
    elif domain.kind == DomainKind.CAP:
        theta = math.acos(float(np.clip(sigma[-1], -1.0, 1.0)))
        d = domain.alpha - theta
    else:
        d = _polygon_boundary_distance(domain, sigma)
        if not domain.contains(sigma, tol=tol):
            raise OutsideDomain(f"point at distance {d:.3g} outside the polygon")
        return d
    if d < -tol:
        raise OutsideDomain(f"point lies {-d:.3g} outside the domain")
    return max(d, 0.0)


# ---------------------------------------------------------------------------
# shrink / expand


def _offset_polygon(domain: SphericalDomain, delta: float, inward: bool) -> SphericalDomain:
    v = domain.vertices
    n = len(v)
    angles = domain.interior_angles()
    new_v = np.empty_like(v)
    err = EmptyDomain if inward else ComplementPolar
    for i in range(n):
        t_prev = tangent_toward(v[i], v[(i - 1) % n])
        t_next = tangent_toward(v[i], v[(i + 1) % n])
        bis = t_prev + t_next
        if np.linalg.norm(bis) < 1e-12:
            bis = np.cross(v[i], t_next)
        bis = _unit(bis - np.dot(bis, v[i]) * v[i])
        probe = _unit(geodesic_step(v[i], bis, 1e-5))
        if not domain.contains(probe, tol=0.0):
            bis = -bis
        # right spherical triangle: edge offset delta opposite the half angle
        s = math.sin(delta) / math.sin(angles[i] / 2.0)
        if s >= 1.0:
            raise err(f"offset {delta} exceeds the reach of vertex {i}")
        move = math.asin(s)
        step = move if inward else -move
        new_v[i] = _unit(geodesic_step(v[i], bis, step))
    try:
        out = SphericalDomain.polygon(new_v)
    except ValueError as exc:
        raise err(f"offset polygon is invalid: {exc}") from exc
    # containment sanity: the smaller polygon's vertices sit inside the larger
    small, large = (out, domain) if inward else (domain, out)
    if not all(large.contains(u, tol=1e-9) for u in small.vertices):
        raise err("offset polygon escaped its parent")
    return out


def shrink(domain: SphericalDomain, delta: float) -> SphericalDomain:
    """Inner approximation: pull the boundary inward by geodesic distance delta.

    Arcs lose delta at each endpoint, caps reduce their opening by delta, and
    polygon vertices move inward along interior-angle bisectors so that each
    edge's great circle recedes by delta.  Raises EmptyDomain when nothing
    would remain.
    """
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    if delta == 0.0:
        return domain
    if domain.kind == DomainKind.ARC:
        alpha = domain.alpha - 2.0 * delta
        if alpha <= 0.0:
            raise EmptyDomain(f"arc of length {domain.alpha} cannot shrink by {delta}")
        return SphericalDomain.arc(alpha)
    if domain.kind == DomainKind.CAP:
        alpha = domain.alpha - delta
        if alpha <= 0.0:
            raise EmptyDomain(f"cap of opening {domain.alpha} cannot shrink by {delta}")
        return SphericalDomain.cap(alpha, domain.dim_N)
    return _offset_polygon(domain, delta, inward=True)


def expand(domain: SphericalDomain, delta: float) -> SphericalDomain:
    """Outer approximation: push the boundary outward by geodesic distance delta.

    Raises ComplementPolar when the expansion would cover the whole sphere
    (or, for polygons, leave the meshable hemisphere).
    """
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    if delta == 0.0:
        return domain
    if domain.kind == DomainKind.ARC:
        alpha = domain.alpha + 2.0 * delta
        if alpha >= TWO_PI:
            raise ComplementPolar(f"arc of length {domain.alpha} cannot expand by {delta}")
        return SphericalDomain.arc(alpha)
    if domain.kind == DomainKind.CAP:
        alpha = domain.alpha + delta
        if alpha >= math.pi:
            raise ComplementPolar(f"cap of opening {domain.alpha} cannot expand by {delta}")
        return SphericalDomain.cap(alpha, domain.dim_N)
    return _offset_polygon(domain, delta, inward=False)


@dataclass(frozen=True)
class DomainFamily:
    """A monotone family of inner or outer approximations of a base domain.

    ``steps`` are strictly decreasing positive offsets delta_k; step k yields
    shrink(base, delta_k) for Direction.INNER and expand(base, delta_k) for
    Direction.OUTER, so the family converges monotonically to the base.
    """

    base: SphericalDomain
    direction: Direction
    steps: tuple

    def __post_init__(self):
        steps = tuple(float(s) for s in self.steps)
        if len(steps) == 0:
            raise ValueError("family needs at least one step")
        if any(s <= 0.0 for s in steps):
            raise ValueError("steps must be positive")
        if any(b >= a for a, b in zip(steps, steps[1:])):
            raise ValueError("steps must be strictly decreasing")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "direction", Direction(self.direction))

    def domains(self) -> tuple:
        op = shrink if self.direction == Direction.INNER else expand
        doms = tuple(op(self.base, d) for d in self.steps)
        if self.base.kind == DomainKind.POLYGON:
            # verify the nesting that arcs/caps get for free
            for small, large in zip(doms, doms[1:]):
                if self.direction == Direction.OUTER:
                    small, large = large, small
                if not all(large.contains(u, tol=1e-9) for u in small.vertices):
                    raise MonotonicityViolation("family containment violated")
        return doms


# ---------------------------------------------------------------------------
# domain description files (key = value lines)


def write_domain_file(domain: SphericalDomain, path) -> None:
    lines = [f"kind = {domain.kind.value}", f"dim = {domain.dim_N}"]
    if domain.kind in (DomainKind.ARC, DomainKind.CAP):
        lines.append(f"alpha_radians = {domain.alpha!r}")
    else:
        for v in domain.vertices:
            lines.append("vertex = " + " ".join(repr(float(x)) for x in v))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_domain_file(path) -> SphericalDomain:
    kind = None
    dim = None
    alpha = None
    verts = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed domain line: {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key == "kind":
                kind = val.lower()
            elif key == "dim":
                dim = int(val)
            elif key == "alpha_radians":
                alpha = float(val)
            elif key == "vertex":
                verts.append([float(x) for x in val.split()])
            else:
                raise ValueError(f"unknown domain key {key!r}")
    if kind == "arc":
        return SphericalDomain.arc(alpha)
    if kind == "cap":
        return SphericalDomain.cap(alpha, dim if dim is not None else 3)
    if kind == "polygon":
        return SphericalDomain.polygon(np.asarray(verts))
    raise ValueError(f"domain file must declare kind arc|cap|polygon, got {kind!r}")
