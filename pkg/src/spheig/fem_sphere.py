"""P1 finite elements for the spherical eigenvalue problem.

Meshes come in two flavors: interval meshes for arcs (and for the
axisymmetric 1D reduction of caps) and flat-triangle surface meshes for caps
and geodesic polygons on S^2.  The nonlinear problem is solved as a fixed
point of frozen-weight generalized eigenproblems

    A(w) v = mu * M(w) v,   weight per element (beta^2 wbar^2 + |grad w|^2 + eps^2)^((p-2)/2),

followed by a scalar root-find of mu1(beta) = (p-1)*beta*(beta-beta0).
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .errors import (BracketFailure, EigenIterError, MeshError, PicardError)
from .fields import Branch, ColatGrid, DiscreteField, Eigenpair
from .geometry import (DomainKind, PParams, SphericalDomain,
                       sphere_surface_measure)
from .ode_axisym import _branch_magnitude_floor

# ---------------------------------------------------------------------------
# meshes


class ArcMesh:
    """P1 interval mesh on [0, alpha].

    ``sin_power`` > 0 weighs every element integral by sin(theta)^sin_power
    (times the measure of S^(dim-2)); that turns the interval problem into
    the axisymmetric reduction of a cap, with the theta = 0 end left free.
    """

    dim = 1

    def __init__(self, nodes, sin_power: int = 0, measure_const: float = 1.0,
                 dirichlet=(True, True)):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 3 or np.any(np.diff(nodes) <= 0):
            raise MeshError("interval mesh needs >= 3 strictly increasing nodes")
        self.nodes = nodes
        self.alpha = float(nodes[-1] - nodes[0])
        self.n_vertices = len(nodes)
        self.h_elems = np.diff(nodes)
        self.mid = 0.5 * (nodes[:-1] + nodes[1:])
        self.sin_power = int(sin_power)
        rho = np.sin(self.mid) ** self.sin_power if self.sin_power else np.ones_like(self.mid)
        self.measure = measure_const * rho
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[0], flags[-1] = bool(dirichlet[0]), bool(dirichlet[1])
        self.boundary_flags = flags
        self._dual = None

    @classmethod
    def uniform(cls, alpha: float, n_elems: int, **kw) -> "ArcMesh":
        return cls(np.linspace(0.0, alpha, n_elems + 1), **kw)

    @classmethod
    def from_colat_grid(cls, grid: ColatGrid) -> "ArcMesh":
        if grid.dim_N == 2:
            return cls(grid.nodes)
        return cls(grid.nodes, sin_power=grid.dim_N - 2,
                   measure_const=sphere_surface_measure(grid.dim_N - 2),
                   dirichlet=(False, True))

    def h(self) -> float:
        return float(self.h_elems.max())

    def lumped_mass(self) -> np.ndarray:
        m = np.zeros(self.n_vertices)
        half = 0.5 * self.h_elems * self.measure
        np.add.at(m, np.arange(self.n_vertices - 1), half)
        np.add.at(m, np.arange(1, self.n_vertices), half)
        return m

    def refine(self) -> "ArcMesh":
        new = np.empty(2 * len(self.nodes) - 1)
        new[0::2] = self.nodes
        new[1::2] = self.mid
        return ArcMesh(new, sin_power=self.sin_power,
                       measure_const=(self.measure[0] / (np.sin(self.mid[0]) ** self.sin_power)
                                      if self.sin_power else self.measure[0]),
                       dirichlet=(self.boundary_flags[0], self.boundary_flags[-1]))


class SurfaceMesh:
    """Conforming flat-triangle approximation of a patch of S^2.

    Vertices are unit vectors; triangles index counterclockwise as seen from
    outside the sphere.  Boundary vertices are derived from edges that belong
    to exactly one triangle and must match ``boundary_flags`` when given.
    """

    dim = 2

    def __init__(self, vertices, triangles, boundary_flags=None, snap=None):
        v = np.asarray(vertices, dtype=float)
        t = np.asarray(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError("vertices must be (n, 3)")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise MeshError("vertices must lie on the unit sphere")
        v = v / norms[:, None]
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must be (m, 3)")
        # consistent outward orientation
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        nrm = np.cross(e1, e2)
        cent = (v[t[:, 0]] + v[t[:, 1]] + v[t[:, 2]]) / 3.0
        flip = np.einsum("ij,ij->i", nrm, cent) < 0.0
        t[flip] = t[flip][:, [0, 2, 1]]
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        nrm = np.cross(e1, e2)
        area2 = np.linalg.norm(nrm, axis=1)
        if np.any(area2 < 1e-14):
            raise MeshError("degenerate (zero-area) triangle")
        self.vertices = v
        self.triangles = t
        self.areas = 0.5 * area2
        unit_n = nrm / area2[:, None]
        # P1 basis gradients: rotate the opposite edge into the triangle plane
        g = np.empty((len(t), 3, 3))
        for loc, (i, j) in enumerate(((1, 2), (2, 0), (0, 1))):
            g[:, loc, :] = np.cross(unit_n, v[t[:, j]] - v[t[:, i]]) / (2.0 * self.areas[:, None])
        self.grads = g
        self.measure = np.ones(len(t))
        self.n_vertices = len(v)

        edges = {}
        for k, tri in enumerate(t):
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                edges[key] = edges.get(key, 0) + 1
        if any(c > 2 for c in edges.values()):
            raise MeshError("non-conforming mesh: an edge belongs to > 2 triangles")
        derived = np.zeros(self.n_vertices, dtype=bool)
        self._boundary_edges = [k for k, c in edges.items() if c == 1]
        for a, b in self._boundary_edges:
            derived[a] = derived[b] = True
        if boundary_flags is not None and not np.array_equal(np.asarray(boundary_flags, bool), derived):
            raise MeshError("boundary flags disagree with mesh topology")
        self.boundary_flags = derived
        self._edge_count = edges
        self._snap = snap
        self._dual = None

    def h(self) -> float:
        t, v = self.triangles, self.vertices
        lens = [np.linalg.norm(v[t[:, i]] - v[t[:, j]], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
        return float(np.max(lens))

    def lumped_mass(self) -> np.ndarray:
        m = np.zeros(self.n_vertices)
        third = self.areas / 3.0
        for loc in range(3):
            np.add.at(m, self.triangles[:, loc], third)
        return m

    def refine(self) -> "SurfaceMesh":
        """Uniform 1-to-4 refinement; new boundary midpoints are snapped back
        onto the domain boundary when the mesh carries a snap rule."""
        v = list(self.vertices)
        mid_idx = {}
        boundary_edge_set = set(self._boundary_edges)

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in mid_idx:
                m = self.vertices[a] + self.vertices[b]
                m = m / np.linalg.norm(m)
                if key in boundary_edge_set and self._snap is not None:
                    m = self._snap(m)
                mid_idx[key] = len(v)
                v.append(m)
            return mid_idx[key]

        tris = []
        for a, b, c in self.triangles:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        return SurfaceMesh(np.array(v), np.array(tris), snap=self._snap)


def cap_mesh(alpha: float, n_rings: int) -> SurfaceMesh:
    """Structured polar mesh of the cap {colatitude < alpha} on S^2.

    Ring j sits at colatitude j*alpha/n_rings and carries about
    2*pi*sin(theta_j)/(alpha/n_rings) vertices, so triangles stay near
    isotropic from the pole to the rim.
    """
    if n_rings < 2:
        raise MeshError("cap mesh needs at least 2 rings")
    dt = alpha / n_rings
    verts = [np.array([0.0, 0.0, 1.0])]
    rings = []
    for j in range(1, n_rings + 1):
        theta = j * dt
        m = max(4, int(round(2.0 * math.pi * math.sin(theta) / dt)))
        offs = 0.5 * (j % 2) * 2.0 * math.pi / m
        phis = offs + 2.0 * math.pi * np.arange(m) / m
        idx = np.arange(len(verts), len(verts) + m)
        rings.append((phis, idx))
        st, ct = math.sin(theta), math.cos(theta)
        for phi in phis:
            verts.append(np.array([st * math.cos(phi), st * math.sin(phi), ct]))
    tris = []
    phis1, idx1 = rings[0]
    m1 = len(idx1)
    for k in range(m1):
        tris.append((0, idx1[k], idx1[(k + 1) % m1]))
    for (pa, ia), (pb, ib) in zip(rings, rings[1:]):
        tris.extend(_stitch_rings(pa, ia, pb, ib))

    def snap(pt):
        phi = math.atan2(pt[1], pt[0])
        return np.array([math.sin(alpha) * math.cos(phi),
                         math.sin(alpha) * math.sin(phi), math.cos(alpha)])

    return SurfaceMesh(np.array(verts), np.array(tris), snap=snap)


def _stitch_rings(phi_in, idx_in, phi_out, idx_out):
    """Triangulate the annulus between two vertex rings by merging on angle."""
    ni, no = len(idx_in), len(idx_out)
    tris = []
    i = j = 0

    def nxt(phis, k):
        n = len(phis)
        return phis[(k + 1) % n] + (2.0 * math.pi if k + 1 >= n else 0.0)

    while i < ni or j < no:
        take_outer = j < no and (i >= ni or nxt(phi_out, j) <= nxt(phi_in, i))
        if take_outer:
            tris.append((idx_in[i % ni], idx_out[j % no], idx_out[(j + 1) % no]))
            j += 1
        else:
            tris.append((idx_in[i % ni], idx_out[j % no], idx_in[(i + 1) % ni]))
            i += 1
    return tris


def polygon_mesh(domain: SphericalDomain, target_h: float) -> SurfaceMesh:
    """Delaunay mesh of a geodesic polygon via gnomonic projection.

    Geodesics map to straight lines, so the polygon is meshed as a planar
    straight-edge polygon (hex-lattice interior points, uniform boundary
    subdivision) and vertices are pulled back to the sphere.  Boundary
    conformity is checked and raises MeshError on failure.
    """
    from scipy.spatial import Delaunay

    if domain.kind != DomainKind.POLYGON:
        raise MeshError("polygon_mesh needs a polygon domain")
    center, e1, e2 = domain.frame()
    V = domain.vertices
    n = len(V)
    bnd_pts = []
    for i in range(n):
        a, b = V[i], V[(i + 1) % n]
        L = math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b)))
        m = max(2, int(math.ceil(L / target_h)))
        # geodesic subdivision stays on the straight gnomonic edge
        ts = np.arange(m) / m
        axis = np.cross(a, b)
        axis /= np.linalg.norm(axis)
        for t in ts:
            c, s = math.cos(t * L), math.sin(t * L)
            perp = np.cross(axis, a)
            bnd_pts.append(c * a + s * perp)
    bnd_pts = np.asarray(bnd_pts)
    nb = len(bnd_pts)

    def to_xy(pts):
        z = pts @ center
        return np.stack([pts @ e1 / z, pts @ e2 / z], axis=-1)

    xy_b = to_xy(bnd_pts)
    lo, hi = xy_b.min(axis=0), xy_b.max(axis=0)
    hx = target_h
    hy = hx * math.sqrt(3.0) / 2.0
    rows = int(math.ceil((hi[1] - lo[1]) / hy)) + 1
    pts = []
    for r in range(rows + 1):
        y = lo[1] + r * hy
        x0 = lo[0] + (0.5 * hx if r % 2 else 0.0)
        cols = int(math.ceil((hi[0] - x0) / hx)) + 1
        for c in range(cols + 1):
            pts.append((x0 + c * hx, y))
    pts = np.asarray(pts)

    def seg_dist(p, a, b):
        ab = b - a
        tt = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
        proj = a + np.outer(tt, ab)
        return np.linalg.norm(p - proj, axis=1)

    inside = np.array([_pt_in_poly(xy_b, q) for q in pts])
    dmin = np.full(len(pts), np.inf)
    for i in range(nb):
        dmin = np.minimum(dmin, seg_dist(pts, xy_b[i], xy_b[(i + 1) % nb]))
    keep = pts[inside & (dmin > 0.45 * target_h)]
    all_xy = np.vstack([xy_b, keep])
    tri = Delaunay(all_xy)
    cent = all_xy[tri.simplices].mean(axis=1)
    good = np.array([_pt_in_poly(xy_b, c) for c in cent])
    simplices = tri.simplices[good]

    used = np.unique(simplices)
    if len(used) < len(all_xy):
        remap = -np.ones(len(all_xy), dtype=int)
        remap[used] = np.arange(len(used))
        simplices = remap[simplices]
        all_xy = all_xy[used]
        if np.any(remap[:nb] < 0):
            raise MeshError("a polygon boundary point dropped out of the triangulation")
    verts3 = center[None, :] + all_xy[:, 0:1] * e1[None, :] + all_xy[:, 1:2] * e2[None, :]
    verts3 /= np.linalg.norm(verts3, axis=1)[:, None]
    mesh = SurfaceMesh(verts3, simplices)
    for i in range(nb):
        a, b = i, (i + 1) % nb
        if (min(a, b), max(a, b)) not in mesh._edge_count:
            raise MeshError("polygon boundary is not conforming in the triangulation")
    expected = np.zeros(mesh.n_vertices, dtype=bool)
    expected[:nb] = True
    if not np.array_equal(expected, mesh.boundary_flags):
        raise MeshError("unexpected boundary vertices in polygon mesh")
    return mesh


def _pt_in_poly(xy_poly, pt) -> bool:
    x, y = pt
    inside = False
    npts = len(xy_poly)
    for i in range(npts):
        x1, y1 = xy_poly[i]
        x2, y2 = xy_poly[(i + 1) % npts]
        if (y1 > y) != (y2 > y):
            if x1 + (y - y1) * (x2 - x1) / (y2 - y1) > x:
                inside = not inside
    return inside


def save_mesh(mesh: SurfaceMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices} {len(mesh.triangles)}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"{t[0]} {t[1]} {t[2]}\n")
        fh.write(" ".join("1" if b else "0" for b in mesh.boundary_flags) + "\n")


def load_mesh(path) -> SurfaceMesh:
    with open(path) as fh:
        nv, nt = (int(x) for x in fh.readline().split())
        verts = np.array([[float(x) for x in fh.readline().split()] for _ in range(nv)])
        tris = np.array([[int(x) for x in fh.readline().split()] for _ in range(nt)])
        flags = np.array([c == "1" for c in fh.readline().split()])
    return SurfaceMesh(verts, tris, boundary_flags=flags)


# ---------------------------------------------------------------------------
# weighted assembly


def _p_weight(qe: np.ndarray, p: float) -> np.ndarray:
    if p == 2.0:
        return np.ones_like(qe)
    w = np.zeros_like(qe)
    pos = qe > 0.0
    w[pos] = qe[pos] ** ((p - 2.0) / 2.0)
    return w


def element_gradients(mesh, values: np.ndarray):
    """Per-element constant gradient of a P1 field (2D meshes and cone grids)."""
    vt = values[mesh.triangles]
    return np.einsum("tld,tl->td", mesh.grads, vt)


def assemble_weighted(mesh, params: PParams, beta: float, omega, *,
                      eps: float = 0.0, with_mass: bool = True, measure=None):
    """Frozen-weight stiffness and mass matrices (CSR, all nodes).

    The element weight is (beta^2 wbar^2 + |grad w|^2 + eps^2)^((p-2)/2)
    with wbar the vertex average; elements where the unregularized weight
    base is exactly zero contribute nothing (the degenerate-limit flux).
    Mass uses the exact P1 pairing scaled by the same one-point weight.
    ``measure`` overrides the mesh's per-element measure density.
    """
    p = params.p
    if measure is None:
        measure = mesh.measure
    values = omega.values if hasattr(omega, "values") else np.asarray(omega, float)
    if mesh.dim == 1:
        wbar = 0.5 * (values[:-1] + values[1:])
        grad = np.diff(values) / mesh.h_elems
        qe = beta * beta * wbar * wbar + grad * grad + eps * eps
        w = _p_weight(qe, p) * measure
        n = mesh.n_vertices
        ks = w / mesh.h_elems
        i = np.arange(n - 1)
        rows = np.concatenate([i, i + 1, i, i + 1])
        cols = np.concatenate([i, i + 1, i + 1, i])
        vals = np.concatenate([ks, ks, -ks, -ks])
        A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        if not with_mass:
            return A, None
        ms = w * mesh.h_elems / 6.0
        mvals = np.concatenate([2 * ms, 2 * ms, ms, ms])
        M = sp.coo_matrix((mvals, (rows, cols)), shape=(n, n)).tocsr()
        return A, M

    tris = mesh.triangles
    vt = values[tris]
    wbar = vt.mean(axis=1)
    G = element_gradients(mesh, values)
    qe = beta * beta * wbar * wbar + np.einsum("td,td->t", G, G) + eps * eps
    w = _p_weight(qe, p) * measure * mesh.areas
    S = np.einsum("tid,tjd->tij", mesh.grads, mesh.grads) * w[:, None, None]
    n = mesh.n_vertices
    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    A = sp.coo_matrix((S.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    if not with_mass:
        return A, None
    block = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Mloc = w[:, None, None] * block[None, :, :]
    M = sp.coo_matrix((Mloc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    return A, M


def _unweighted_forms(mesh):
    flat = PParams(2.0, 2 if mesh.dim == 1 else 3)
    ones = np.zeros(mesh.n_vertices)
    return assemble_weighted(mesh, flat, 1.0, ones + 1.0, eps=0.0)


def _dual_solver(mesh):
    """Cached factorization of the interior H1-type Gram matrix."""
    if getattr(mesh, "_dual", None) is None:
        K0, M0 = _unweighted_forms(mesh)
        interior = ~mesh.boundary_flags
        G = (K0 + M0)[interior][:, interior].tocsc()
        mesh._dual = (splu(G), interior)
    return mesh._dual


def evaluate_residual(target, params: PParams, beta: float, omega=None, *,
                      eps: float = 0.0) -> float:
    """Discrete dual norm of the weak residual of the eigen equation.

    ``target`` is a ColatGrid, a DiscreteField, or a mesh (then ``omega``
    supplies the nodal values).  The residual functional
    R(v) = a_w(omega, v) - (p-1)beta(beta-beta0) m_w(omega, v) is assembled
    against interior hat functions and measured in the norm induced by the
    inverse of the unweighted (stiffness + mass) Gram matrix.  With eps = 0
    the value scales exactly like lambda^(p-1) under omega -> lambda*omega.
    """
    if isinstance(target, ColatGrid):
        mesh = ArcMesh.from_colat_grid(target)
        values = target.values
    elif isinstance(target, DiscreteField):
        mesh, values = target.mesh, target.values
    else:
        mesh = target
        values = omega.values if hasattr(omega, "values") else np.asarray(omega, float)
    A, M = assemble_weighted(mesh, params, beta, values, eps=eps)
    lam = (params.p - 1.0) * beta * (beta - params.beta0)
    R = A @ values - lam * (M @ values)
    lu, interior = _dual_solver(mesh)
    Ri = R[interior]
    z = lu.solve(Ri)
    return float(math.sqrt(max(Ri @ z, 0.0)))


def residual_pairings(mesh, params: PParams, beta: float, values, *,
                      eps: float = 0.0) -> np.ndarray:
    """Raw weak-residual pairings against every interior hat (signed)."""
    A, M = assemble_weighted(mesh, params, beta, values, eps=eps)
    lam = (params.p - 1.0) * beta * (beta - params.beta0)
    R = A @ values - lam * (M @ values)
    return R[~mesh.boundary_flags]


# ---------------------------------------------------------------------------
# eigen solves


def frozen_eigen_mu(mesh, params: PParams, beta: float, omega_frozen, *,
                    eps: float = 0.0, tol: float = 1e-12, max_iter: int = 400):
    """Principal eigenpair of the frozen-weight pencil by inverse iteration.

    Returns (mu, field) with the eigenvector sign-fixed positive and scaled
    so the integral of |v| over the domain equals 1.
    """
    A, M = assemble_weighted(mesh, params, beta, omega_frozen, eps=eps)
    interior = ~mesh.boundary_flags
    Ai = A[interior][:, interior].tocsc()
    Mi = M[interior][:, interior].tocsr()
    lu = splu(Ai)
    x = np.ones(int(interior.sum()))
    x /= math.sqrt(x @ (Mi @ x))
    mu_prev = math.inf
    for _ in range(max_iter):
        z = lu.solve(Mi @ x)
        mu = (z @ (Ai @ z)) / (z @ (Mi @ z))
        z /= math.sqrt(z @ (Mi @ z))
        if z @ x < 0.0:
            z = -z
        delta = float(np.max(np.abs(z - x)))
        x = z
        if delta < tol and abs(mu - mu_prev) < tol * max(1.0, abs(mu)):
            break
        mu_prev = mu
    else:
        raise EigenIterError(f"inverse iteration stagnated (last change {delta:.3g})")
    full = np.zeros(mesh.n_vertices)
    full[interior] = x if x.sum() >= 0.0 else -x
    field = DiscreteField(mesh, full)
    return float(mu), field.scaled(1.0 / field.integral_abs())


def picard_eigen(mesh, params: PParams, beta: float, *, eps: float,
                 start=None, tol: float = 1e-9, max_iter: int = 60,
                 damping: float = 0.6):
    """Fixed point of frozen_eigen_mu: returns (mu, field, iterations, clips)."""
    v = np.asarray(start, float).copy() if start is not None else None
    if v is None:
        v = np.ones(mesh.n_vertices)
        v[mesh.boundary_flags] = 0.0
        v /= DiscreteField(mesh, v).integral_abs()
    clips = 0
    prev_change = math.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        mu, new = frozen_eigen_mu(mesh, params, beta, v, eps=eps)
        if params.p == 2.0:
            # weight exponent (p-2)/2 vanishes: the frozen solve is exact
            return mu, new, it, clips
        nv = new.values
        neg = nv < 0.0
        if np.any(neg):
            clips += int(neg.sum())
            nv = np.where(neg, 0.0, nv)
        mixed = (1.0 - damping) * v + damping * nv
        field = DiscreteField(mesh, mixed)
        mixed = field.values / field.integral_abs()
        change = float(np.max(np.abs(mixed - v)))
        v = mixed
        if change < tol:
            return mu, DiscreteField(mesh, v), it, clips
        # roundoff plateau: mu is variational, its error is O(change^2)
        stalled = stalled + 1 if change > 0.7 * prev_change else 0
        if stalled >= 4 and change < 1e-7:
            return mu, DiscreteField(mesh, v), it, clips
        prev_change = change
    raise PicardError(f"frozen-weight fixed point stalled (last change {change:.3g})")


def solve_nonlinear(mesh, params: PParams, branch, *, tol: float = 1e-8,
                    eps0: float = 1e-3, picard_tol: float = None,
                    max_picard: int = 60, damping: float = 0.6,
                    bracket=None, n_scan: int = 14) -> Eigenpair:
    """Exponent and eigenfunction on a mesh via the mu1(beta) root-find.

    The weight regularization is mesh-coupled (eps = eps0 * h).  The outer
    scalar equation mu1(beta) = (p-1)*beta*(beta-beta0) is bracketed on the
    branch's magnitude window and solved with Brent's method; every mu1
    evaluation is a damped Picard fixed point warm-started from the previous
    one.
    """
    branch = Branch(branch)
    sgn = branch.sign
    eps = eps0 * mesh.h()
    if picard_tol is None:
        picard_tol = max(1e-11, 0.01 * tol)
    state = {"v": None, "iters": 0, "clips": 0, "field": None, "mu": None}

    def mu1(mag: float) -> float:
        beta = sgn * mag
        mu, field, its, clips = picard_eigen(
            mesh, params, beta, eps=eps, start=state["v"], tol=picard_tol,
            max_iter=max_picard, damping=damping)
        state.update(v=field.values, iters=state["iters"] + its,
                     clips=state["clips"] + clips, field=field, mu=mu)
        return mu

    def g(mag: float) -> float:
        beta = sgn * mag
        return mu1(mag) - (params.p - 1.0) * beta * (beta - params.beta0)

    if bracket is None:
        lo = _branch_magnitude_floor(params, branch)
        mags = np.geomspace(lo, 50.0, n_scan)
    else:
        mags = np.geomspace(bracket[0], bracket[1], max(6, n_scan // 2))
    gs = []
    hit = None
    for k, m in enumerate(mags):
        gs.append(g(m))
        if k > 0 and gs[-2] > 0.0 >= gs[-1]:
            hit = k
            break
    if hit is None:
        raise BracketFailure(
            f"mu1(beta) never crossed the reaction parabola on |beta| in "
            f"[{mags[0]:.3g}, {mags[-1]:.3g}] ({branch.value})")
    mag = brentq(g, float(mags[hit - 1]), float(mags[hit]), xtol=tol,
                 rtol=4 * np.finfo(float).eps)
    g(mag)  # leave state at the root
    field = state["field"]
    resid = evaluate_residual(mesh, params, sgn * mag, field, eps=0.0)
    return Eigenpair(beta=sgn * mag, omega=field, branch=branch,
                     residual_norm=resid, iterations=state["iters"])


# ---------------------------------------------------------------------------
# linearization


def assemble_linearized(mesh, params: PParams, values, *, eps: float = 0.0,
                        measure=None):
    """Newton coefficients of the p-Laplacian around a frozen field.

    Per element, with G the gradient and g2e = |G|^2 + eps^2,

        B = g2e^((p-4)/2) * ((p-2) G G^T + g2e I),

    the exact Jacobian of the regularized flux.  Returns the assembled sparse
    operator and the per-element B matrices; B G = (p-1)|G|^(p-2) G at
    eps = 0, so the operator applied to a discrete p-harmonic field vanishes
    up to (p-1) times its residual.
    """
    if mesh.dim != 2:
        raise MeshError("linearization is implemented for triangle meshes")
    p = params.p
    if measure is None:
        measure = mesh.measure
    values = values.values if hasattr(values, "values") else np.asarray(values, float)
    G = element_gradients(mesh, values)
    g2 = np.einsum("td,td->t", G, G)
    g2e = g2 + eps * eps
    d = G.shape[1]
    B = np.zeros((len(G), d, d))
    pos = g2e > 0.0
    fac = np.zeros_like(g2e)
    fac[pos] = g2e[pos] ** ((p - 4.0) / 2.0)
    outer = np.einsum("ti,tj->tij", G, G)
    eye = np.eye(d)[None, :, :]
    B[pos] = fac[pos, None, None] * ((p - 2.0) * outer[pos] + g2e[pos, None, None] * eye)
    w = measure * mesh.areas
    S = np.einsum("tid,tde,tje->tij", mesh.grads, B, mesh.grads) * w[:, None, None]
    tris = mesh.triangles
    n = mesh.n_vertices
    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    J = sp.coo_matrix((S.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    return J, B
