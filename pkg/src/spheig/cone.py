"""Truncated-cone p-harmonic solves and deformation diagnostics.

Working coordinates are (s, theta) with s = ln r.  In them the cone problem
becomes an isotropic weighted p-Laplacian on the rectangle
[ln a, ln b] x [0, alpha] with measure density

    m(s, theta) = e^{(N-p) s} * sin(theta)^{N-2},

planar cones from arcs (N = 2) and axisymmetric cones from caps (N = 3)
sharing one code path.  Physical gradients recover a factor e^{-s}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .errors import (ConeSolveError, ConfigError, ContractionFailure,
                     FitError, MonotonicityViolation, NondegeneracyFailure,
                     PositivityError)
from .fields import Branch, ColatGrid
from .fem_sphere import assemble_linearized, assemble_weighted
from .geometry import DomainKind, PParams, SphericalDomain
from .ode_axisym import solve_beta
from .parallel import pmap as _pmap


@dataclass(frozen=True)
class ConeDomain:
    """Truncated cone over a section: radii in (a, b), 0 < a < b."""

    section: SphericalDomain
    a: float
    b: float

    def __post_init__(self):
        if self.section.kind == DomainKind.POLYGON:
            raise ConfigError("cone solves use the meridian reduction: "
                              "sections must be arcs or caps")
        if not (0.0 < self.a < self.b):
            raise ConfigError(f"need 0 < a < b, got a={self.a}, b={self.b}")


class ConeGrid:
    """Structured triangulation of [ln a, ln b] x [0, alpha].

    Exposes the same per-element arrays as a surface mesh (triangles, areas,
    grads) so the weighted assembly routines apply unchanged; the measure
    density depends on p and is supplied per solve.
    """

    dim = 2

    def __init__(self, cone: ConeDomain, n_s: int, n_t: int):
        if n_s < 4 or n_t < 4:
            raise ConfigError("cone grid needs at least 4 intervals each way")
        self.cone = cone
        self.s_nodes = np.linspace(math.log(cone.a), math.log(cone.b), n_s + 1)
        self.theta_nodes = np.linspace(0.0, cone.section.alpha, n_t + 1)
        self.n_s, self.n_t = n_s, n_t
        self.n_vertices = (n_s + 1) * (n_t + 1)
        S, T = np.meshgrid(self.s_nodes, self.theta_nodes, indexing="ij")
        self.node_s = S.reshape(-1)
        self.node_theta = T.reshape(-1)

        idx = np.arange(self.n_vertices).reshape(n_s + 1, n_t + 1)
        v00 = idx[:-1, :-1].reshape(-1)
        v10 = idx[1:, :-1].reshape(-1)
        v11 = idx[1:, 1:].reshape(-1)
        v01 = idx[:-1, 1:].reshape(-1)
        self.triangles = np.concatenate([
            np.stack([v00, v10, v11], axis=1),
            np.stack([v00, v11, v01], axis=1)])
        P = np.stack([self.node_s, self.node_theta], axis=1)
        e1 = P[self.triangles[:, 1]] - P[self.triangles[:, 0]]
        e2 = P[self.triangles[:, 2]] - P[self.triangles[:, 0]]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.areas = 0.5 * np.abs(det)
        g = np.empty((len(self.triangles), 3, 2))
        for loc, (i, j) in enumerate(((1, 2), (2, 0), (0, 1))):
            edge = P[self.triangles[:, j]] - P[self.triangles[:, i]]
            g[:, loc, 0] = -edge[:, 1] / det
            g[:, loc, 1] = edge[:, 0] / det
        self.grads = g
        self.measure = np.ones(len(self.triangles))
        self._centroid_s = P[self.triangles].mean(axis=1)[:, 0]
        self._centroid_t = P[self.triangles].mean(axis=1)[:, 1]

        ii = idx  # boundary masks by grid line
        self.inner_mask = np.zeros(self.n_vertices, dtype=bool)
        self.inner_mask[ii[0, :]] = True
        self.outer_mask = np.zeros(self.n_vertices, dtype=bool)
        self.outer_mask[ii[-1, :]] = True
        lateral = np.zeros(self.n_vertices, dtype=bool)
        lateral[ii[:, -1]] = True
        if cone.section.kind == DomainKind.ARC:
            lateral[ii[:, 0]] = True
        self.lateral_mask = lateral
        self.boundary_flags = self.inner_mask | self.outer_mask | lateral
        self._index = idx
        self._lu_cache = {}

    def h(self) -> float:
        return float(max(self.s_nodes[1] - self.s_nodes[0],
                         self.theta_nodes[1] - self.theta_nodes[0]))

    def measure_for(self, params: PParams) -> np.ndarray:
        m = np.exp((params.dim_N - params.p) * self._centroid_s)
        if params.dim_N > 2:
            m = m * np.sin(self._centroid_t) ** (params.dim_N - 2)
        return m

    def node_r(self) -> np.ndarray:
        return np.exp(self.node_s)

    def lateral_distance(self) -> np.ndarray:
        """Physical distance from each node to the lateral cone boundary."""
        alpha = self.cone.section.alpha
        if self.cone.section.kind == DomainKind.ARC:
            psi = np.minimum(self.node_theta, alpha - self.node_theta)
        else:
            psi = alpha - self.node_theta
        return np.exp(self.node_s) * np.sin(np.minimum(psi, 0.5 * math.pi))

    def as_matrix(self, values: np.ndarray) -> np.ndarray:
        return values.reshape(self.n_s + 1, self.n_t + 1)


@dataclass
class ConeField:
    """Nodal values of a p-harmonic field on a cone grid."""

    grid: ConeGrid
    values: np.ndarray
    outer_zero: bool
    inner_data: np.ndarray

    def matrix(self) -> np.ndarray:
        return self.grid.as_matrix(self.values)

    def ray_values(self, theta0: float):
        j = int(np.argmin(np.abs(self.grid.theta_nodes - theta0)))
        return np.exp(self.grid.s_nodes), self.matrix()[:, j]


def separable_lift(grid: ConeGrid, beta: float, profile) -> np.ndarray:
    """Nodal values of r^{-beta} * profile(theta) on the grid."""
    prof = _as_profile(grid, profile)
    return np.exp(-beta * grid.node_s) * prof[None, :].repeat(
        grid.n_s + 1, axis=0).reshape(-1)


def _as_profile(grid: ConeGrid, data) -> np.ndarray:
    if isinstance(data, ColatGrid):
        return data.interp(grid.theta_nodes)
    if callable(data):
        return np.asarray([float(data(t)) for t in grid.theta_nodes])
    arr = np.asarray(data, dtype=float)
    if arr.shape != grid.theta_nodes.shape:
        raise ConfigError("profile length does not match the angular grid")
    return arr


def _dirichlet_solve(grid: ConeGrid, params: PParams, fixed_mask, fixed_vals,
                     *, eps: float, start=None, tol: float = 1e-11,
                     max_picard: int = 120, damping: float = 0.7,
                     newton: bool = True) -> np.ndarray:
    """Weighted p-Laplace solve with Dirichlet data on fixed_mask nodes.

    Damped Picard on frozen weights, then (for p != 2) a guarded Newton
    polish; the best Picard iterate is kept when Newton fails to improve.
    """
    measure = grid.measure_for(params)
    free = ~fixed_mask

    def linear_solve(weights_from):
        A, _ = assemble_weighted(grid, params, 0.0, weights_from, eps=eps,
                                 with_mass=False, measure=measure)
        Aff = A[free][:, free].tocsc()
        rhs = -(A[free][:, fixed_mask] @ fixed_vals[fixed_mask])
        out = fixed_vals.copy()
        out[free] = splu(Aff).solve(rhs)
        return out, A

    v = np.asarray(start, float).copy() if start is not None else fixed_vals.copy()
    if params.p != 2.0 and start is None:
        # warm start from the p = 2 field of the same data
        flat = PParams(2.0, params.dim_N)
        A2, _ = assemble_weighted(grid, flat, 0.0, fixed_vals, eps=0.0,
                                  with_mass=False, measure=grid.measure_for(flat))
        v = fixed_vals.copy()
        v[free] = splu(A2[free][:, free].tocsc()).solve(
            -(A2[free][:, fixed_mask] @ fixed_vals[fixed_mask]))

    prev_change = math.inf
    stalled = 0
    for _ in range(max_picard):
        new, A = linear_solve(v)
        if not np.all(np.isfinite(new)):
            raise ConeSolveError("cone Picard iteration produced non-finite values")
        if params.p == 2.0:
            return new
        mixed = (1.0 - damping) * v + damping * new
        change = float(np.max(np.abs(mixed - v)))
        v = mixed
        scale = max(1.0, float(np.max(np.abs(v))))
        if change < tol * scale:
            break
        stalled = stalled + 1 if change > 0.7 * prev_change else 0
        if stalled >= 5 and change < 1e-7 * scale:
            break
        prev_change = change
    else:
        raise ConeSolveError(
            f"cone Picard iteration did not settle (last change {change:.3g})")

    if not newton:
        return v

    def residual_norm(u):
        A, _ = assemble_weighted(grid, params, 0.0, u, eps=eps,
                                 with_mass=False, measure=measure)
        return float(np.max(np.abs((A @ u)[free]))), A

    best, (best_res, A) = v.copy(), residual_norm(v)
    u = v.copy()
    for _ in range(8):
        J, _ = assemble_linearized(grid, params, u, eps=eps, measure=measure)
        R = (A @ u)
        d = np.zeros_like(u)
        try:
            d[free] = splu(J[free][:, free].tocsc()).solve(-R[free])
        except RuntimeError:
            break
        stepped = False
        for shrink in (1.0, 0.5, 0.25, 0.125):
            cand = u + shrink * d
            res, Ac = residual_norm(cand)
            if res < best_res:
                u, best_res, A = cand, res, Ac
                best = cand
                stepped = True
                break
        if not stepped or best_res < 1e-13 * max(1.0, float(np.max(np.abs(u)))):
            break
    return best


def solve_truncated(cone: ConeDomain, params: PParams, inner_data, *,
                    outer_zero: bool = True, n_t: int = 48, n_s: int = None,
                    tol: float = 1e-11, eps0: float = 1e-3,
                    start=None) -> ConeField:
    """p-harmonic field matching inner_data on r = a, zero on the lateral
    boundary (and on r = b when outer_zero).

    ``inner_data`` is a profile over theta: an array on the angular nodes, a
    callable, or a ColatGrid (interpolated).  It must be nonnegative and
    vanish at the lateral corners.  Internally the data is scaled to unit
    maximum (the equation is homogeneous) so the regularization eps0*h acts
    on a normalized field.
    """
    grid = _default_grid(cone, n_t, n_s)
    return _solve_on_grid(grid, params, inner_data, outer_zero=outer_zero,
                          tol=tol, eps0=eps0, start=start)


def _default_grid(cone: ConeDomain, n_t: int, n_s) -> ConeGrid:
    if n_s is None:
        span = math.log(cone.b / cone.a)
        n_s = max(8, int(math.ceil(span * n_t / cone.section.alpha)))
    return ConeGrid(cone, n_s, n_t)


def _solve_on_grid(grid: ConeGrid, params: PParams, inner_data, *,
                   outer_zero: bool = True, tol: float = 1e-11,
                   eps0: float = 1e-3, start=None) -> ConeField:
    data = _as_profile(grid, inner_data)
    if np.any(data < -1e-12):
        raise ConfigError("inner boundary data must be nonnegative")
    corner_tol = 1e-9 * max(1.0, float(np.max(np.abs(data))))
    if abs(data[-1]) > corner_tol or (
            grid.cone.section.kind == DomainKind.ARC and abs(data[0]) > corner_tol):
        raise ConfigError("inner boundary data must vanish at the lateral corners")
    scale = float(np.max(np.abs(data)))
    if scale == 0.0:
        return ConeField(grid, np.zeros(grid.n_vertices), outer_zero, data)
    fixed = grid.inner_mask | grid.lateral_mask
    if outer_zero:
        fixed = fixed | grid.outer_mask
    fixed_vals = np.zeros(grid.n_vertices)
    fixed_vals[grid._index[0, :]] = data / scale
    fixed_vals[grid.lateral_mask] = 0.0
    start_vals = None if start is None else np.asarray(start, float) / scale
    vals = _dirichlet_solve(grid, params, fixed, fixed_vals,
                            eps=eps0 * grid.h(), start=start_vals, tol=tol)
    return ConeField(grid, vals * scale, outer_zero, data)


def decay_fit(field: ConeField, theta0: float):
    """Radial decay exponent along the ray theta = theta0.

    Least-squares slope of ln u against ln r over the middle third of the
    log-radius span (both truncation layers excluded); returns
    (beta_fit, (r_lo, r_hi)).
    """
    r, u = field.ray_values(theta0)
    s = np.log(r)
    lo = s[0] + (s[-1] - s[0]) / 3.0
    hi = s[0] + 2.0 * (s[-1] - s[0]) / 3.0
    win = (s >= lo - 1e-12) & (s <= hi + 1e-12)
    if np.any(u[win] <= 0.0):
        raise FitError("nonpositive samples along the fit ray")
    slope = np.polyfit(s[win], np.log(u[win]), 1)[0]
    return float(-slope), (float(math.exp(lo)), float(math.exp(hi)))


# ---------------------------------------------------------------------------
# deformation family


@dataclass
class TauFamily:
    """Monotone p-harmonic interpolation between the cones of two profiles.

    fields[k] solves the cone problem with inner data
    a^{-beta} (tau_k * omega + (1 - tau_k) * omega'), omega' rescaled so
    sup(omega'/omega) = 1; delta1 = inf(omega'/omega).  M and m hold, per
    consecutive tau pair and per radial grid line, the running sup/inf (from
    the outer end) of the finite-difference quotient (dv/dtau)/v.
    """

    grid: ConeGrid
    taus: np.ndarray
    fields: list
    delta1: float
    beta: float
    omega: np.ndarray
    omega_prime: np.ndarray
    params: PParams
    M: np.ndarray = field(repr=False, default=None)
    m: np.ndarray = field(repr=False, default=None)
    quotients: np.ndarray = field(repr=False, default=None)

    def osc(self) -> np.ndarray:
        """Worst per-pair oscillation M_k(t) - m_k(t) per radial grid line.

        Each tau pair's quotient settles to its own constant, so the spread
        is taken within pairs before maximizing across them.
        """
        return (self.M - self.m).max(axis=0)


def deformation_family(cone: ConeDomain, params: PParams, omega, omega_prime,
                       tau_grid, *, beta: float, n_t: int = 48, n_s: int = None,
                       tol: float = 1e-11, mono_tol: float = 1e-8) -> TauFamily:
    """Solve the boundary-data interpolation family and its tau diagnostics.

    omega and omega_prime are angular profiles, positive on interior angular
    nodes; omega_prime is rescaled so sup(omega'/omega) = 1.  Monotonicity in
    tau is verified nodewise.
    """
    taus = np.asarray(tau_grid, dtype=float)
    if taus.ndim != 1 or len(taus) < 2 or np.any(np.diff(taus) <= 0):
        raise ConfigError("tau grid must be increasing with >= 2 entries")
    if abs(taus[0]) > 1e-14 or abs(taus[-1] - 1.0) > 1e-14:
        raise ConfigError("tau grid must span [0, 1]")
    grid = _default_grid(cone, n_t, n_s)
    w = _as_profile(grid, omega)
    wp = _as_profile(grid, omega_prime)
    interior = ~(grid.lateral_mask[grid._index[0, :]])
    if grid.cone.section.kind == DomainKind.CAP:
        interior[-1] = False
    else:
        interior[0] = interior[-1] = False
    if np.any(w[interior] <= 0.0) or np.any(wp[interior] <= 0.0):
        raise PositivityError("profiles must be positive on interior angular nodes")
    ratio = wp[interior] / w[interior]
    wp = wp / ratio.max()
    delta1 = float(ratio.min() / ratio.max())

    amb = grid.cone.a ** (-beta)

    def run(tau):
        data = amb * (tau * w + (1.0 - tau) * wp)
        # free outer end: the truncated Dirichlet cap would force all tau
        # fields together near r = b and drown the quotients in noise there
        return _solve_on_grid(grid, params, data, outer_zero=False, tol=tol)

    fields = _pmap(run, list(taus))
    scale = float(np.max(np.abs(fields[-1].values)))
    for k in range(1, len(taus)):
        drop = float(np.min(fields[k].values - fields[k - 1].values))
        if drop < -mono_tol * scale:
            raise MonotonicityViolation(
                f"field decreased by {-drop:.3g} between tau={taus[k-1]:.3f} "
                f"and tau={taus[k]:.3f} (allowed {mono_tol * scale:.3g})")

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
        # M(t) / m(t) are extrema over the cone beyond radius t
        M[k] = np.maximum.accumulate(row_max[::-1])[::-1]
        m[k] = np.minimum.accumulate(row_min[::-1])[::-1]
    return TauFamily(grid, taus, fields, delta1, beta, w, wp, params, M, m,
                     quots)


def tau_lipschitz_check(family: TauFamily, *, tol: float = 1e-8) -> dict:
    """Nodewise difference-quotient bounds between consecutive tau fields.

    Checks 0 <= (v' - v)/(tau' - tau) <= (1/delta1 - 1) * v' up to a
    tolerance scaled by the field magnitude.
    """
    cap = 1.0 / family.delta1 - 1.0
    scale = float(np.max(np.abs(family.fields[-1].values)))
    slack_lo = math.inf
    slack_hi = math.inf
    for k in range(len(family.taus) - 1):
        va = family.fields[k].values
        vb = family.fields[k + 1].values
        dq = (vb - va) / (family.taus[k + 1] - family.taus[k])
        slack_lo = min(slack_lo, float(dq.min()))
        slack_hi = min(slack_hi, float((cap * vb - dq).min()))
    allowed = tol * scale * max(1.0, cap)
    return {
        "lower_slack": slack_lo,
        "upper_slack": slack_hi,
        "allowed": allowed,
        "passed": slack_lo >= -allowed and slack_hi >= -allowed,
    }


def sandwich_check(family: TauFamily, tau_index: int, *, u_omega=None,
                   u_omega_prime=None, phi=None, psi=None,
                   tol: float = None) -> dict:
    """Five-way ordering u_omega' <= v_phi <= v_tau <= v_psi <= u_omega.

    phi and psi default to the angular envelopes sup{omega', t* omega} and
    inf{(t*/delta1) omega', omega} for tau* = (1 - delta1) tau + delta1; the
    corresponding cone fields, and the two pure-profile fields when not
    supplied, are solved on the family's grid with the same a^{-beta}
    scaling and outer condition.  Violations are reported relative to the
    max of u_omega.
    """
    grid = family.grid
    params = family.params
    amb = grid.cone.a ** (-family.beta)
    tstar = (1.0 - family.delta1) * family.taus[tau_index] + family.delta1
    if phi is None:
        phi = np.maximum(family.omega_prime, tstar * family.omega)
    if psi is None:
        psi = np.minimum((tstar / family.delta1) * family.omega_prime,
                         family.omega)
    if u_omega is None:
        u_omega = _solve_on_grid(grid, params, amb * family.omega,
                                 outer_zero=False)
    if u_omega_prime is None:
        u_omega_prime = _solve_on_grid(grid, params, amb * family.omega_prime,
                                       outer_zero=False)
    if u_omega.grid is not grid or u_omega_prime.grid is not grid:
        raise ConfigError("comparison fields must share the family grid")
    v_phi = _solve_on_grid(grid, params, amb * _as_profile(grid, phi),
                           outer_zero=False)
    v_psi = _solve_on_grid(grid, params, amb * _as_profile(grid, psi),
                           outer_zero=False)
    v_tau = family.fields[tau_index]
    scale = float(np.max(np.abs(u_omega.values)))
    links = {
        "u_omega_prime<=v_phi": float((u_omega_prime.values - v_phi.values).max()),
        "v_phi<=v_tau": float((v_phi.values - v_tau.values).max()),
        "v_tau<=v_psi": float((v_tau.values - v_psi.values).max()),
        "v_psi<=u_omega": float((v_psi.values - u_omega.values).max()),
    }
    rel = {k: v / scale for k, v in links.items()}
    if tol is None:
        tol = 10.0 * grid.h() ** 2
    worst = max(rel.values())
    return {"violations": rel, "max_violation": worst, "tol": tol,
            "passed": worst <= tol}


def _interior_theta_mask(grid: ConeGrid, interior_frac: float):
    alpha = grid.cone.section.alpha
    if grid.cone.section.kind == DomainKind.ARC:
        mask = (grid.theta_nodes >= interior_frac * alpha) & \
               (grid.theta_nodes <= (1.0 - interior_frac) * alpha)
        sigma_default = 0.5 * alpha
    else:
        mask = grid.theta_nodes <= (1.0 - interior_frac) * alpha
        sigma_default = 0.0
    return mask, sigma_default


def _estimate_c_hat(family: TauFamily, sigma0: float, tmask, span: float,
                    min_shells: int):
    """Empirical two-sided Harnack constant of the tau difference fields.

    Each consecutive difference v_{k+1} - v_k is a positive solution
    vanishing on the lateral boundary, so on every sphere in the radial
    window its interior values are comparable to the value at the reference
    angle sigma0; the largest one-sided ratio observed is the constant.
    Comparing per sphere keeps the estimate free of radial decay.  Rows at
    solver noise are skipped; the first row carries the raw data and is
    excluded.  Returns (c_hat, k_step) with k_step the grid-aligned number
    of radial steps per shell of ratio >= c_hat, or (None, None) when a
    band value degenerates or fewer than min_shells shells fit the window.
    """
    grid = family.grid
    ds = grid.s_nodes[1] - grid.s_nodes[0]
    j_ref = int(np.argmin(np.abs(grid.theta_nodes - sigma0)))
    qscale = np.nanmax(np.abs(family.quotients))
    if not np.isfinite(qscale) or qscale <= 1e-6:
        # proportional profiles: the difference vanishes identically
        return math.exp(ds), 1
    n_rows = min(grid.n_s, int(round(span / ds))) + 1
    c_req = 1.0
    for k in range(len(family.taus) - 1):
        dm = grid.as_matrix(family.fields[k + 1].values
                            - family.fields[k].values)[:n_rows]
        floor = 1e-9 * float(dm.max())
        if floor <= 0.0:
            continue
        for i in range(1, n_rows):
            row = dm[i][tmask]
            ref = dm[i, j_ref]
            if row.max() <= floor:
                continue
            if ref <= floor or row.min() <= floor:
                return None, None
            c_req = max(c_req, row.max() / ref, ref / row.min())
    k_step = max(1, int(math.ceil(math.log(c_req) / ds - 1e-12)))
    if int(span / (k_step * ds)) < min_shells:
        return None, None
    return c_req, k_step


def contraction_check(family: TauFamily, *, tol: float = 0.05,
                      interior_frac: float = 0.2, radial_cap: float = 0.25,
                      sigma0: float = None, min_shells: int = 4) -> dict:
    """Empirical Harnack ratio and geometric contraction of the oscillation.

    c_hat_est is the smallest grid-aligned shell ratio e^{k ds} such that on
    every shell [t, c t] (within the radial window, one shell in from r = a)
    and for every consecutive tau pair, the interior difference quotients
    (dv/dtau)/v are within a factor c of the quotient at the reference point
    (c t, sigma0); sigma0 defaults to the section incenter.  theta_fit is the
    fitted per-shell decay factor of osc(t) over shells t_j = a c^j; it must
    not exceed (c^2 - 1)/(c^2 + 1) + tol, and osc must be non-increasing.
    The report includes c_hat estimates for shifted reference points.
    """
    grid = family.grid
    ds = grid.s_nodes[1] - grid.s_nodes[0]
    span = grid.s_nodes[-1] - grid.s_nodes[0] + math.log(radial_cap)
    tmask, sigma_default = _interior_theta_mask(grid, interior_frac)
    if sigma0 is None:
        sigma0 = sigma_default
    qscale = float(np.nanmax(np.abs(family.quotients)))
    if not np.isfinite(qscale) or qscale <= 1e-6:
        # proportional profiles: the family is constant in tau to solver
        # resolution and the oscillation is pure noise
        c = math.exp(ds)
        bound = (c * c - 1.0) / (c * c + 1.0)
        return {"c_hat_est": c, "theta_fit": 0.0, "bound": bound, "tol": tol,
                "osc": [], "shell_radii": [], "sigma0": sigma0,
                "c_hat_sensitivity": {"sigma_minus": c, "sigma_plus": c},
                "degenerate": True, "passed": True}
    c_hat, k_hat = _estimate_c_hat(family, sigma0, tmask, span, min_shells)
    if c_hat is None:
        raise ContractionFailure(
            "no shell ratio admits a two-sided Harnack comparison with at "
            f"least {min_shells} shells; widen b/a")

    osc = family.osc()
    n_shell = int(span / (k_hat * ds))
    anchors = np.arange(n_shell + 1) * k_hat
    shell_ratio = math.exp(k_hat * ds)
    osc_j = osc[anchors]
    if np.any(np.diff(osc_j) > 1e-12 * max(1.0, osc_j[0])):
        raise ContractionFailure("oscillation increased across shells")
    floor = 1e-12 * max(1.0, abs(osc_j[0]))
    live = osc_j > floor
    if live.sum() < 3:
        theta_fit = 0.0
    else:
        js = np.arange(len(osc_j))[live]
        slope = np.polyfit(js, np.log(osc_j[live]), 1)[0]
        theta_fit = float(math.exp(slope))
    bound = (c_hat * c_hat - 1.0) / (c_hat * c_hat + 1.0)
    if theta_fit > bound + tol:
        raise ContractionFailure(
            f"oscillation decay factor {theta_fit:.4f} exceeds the shell "
            f"bound {bound:.4f} (+{tol})")

    half_width = 0.25 * grid.cone.section.inradius()
    sens = {}
    for tag, shift in (("sigma_minus", -half_width), ("sigma_plus", half_width)):
        alt_c, _ = _estimate_c_hat(family, sigma0 + shift, tmask, span, min_shells)
        sens[tag] = alt_c
    return {"c_hat_est": c_hat, "theta_fit": theta_fit, "bound": bound,
            "tol": tol, "osc": [float(x) for x in osc_j],
            "shell_ratio": shell_ratio,
            "shell_radii": [float(grid.cone.a * shell_ratio ** j)
                            for j in range(len(osc_j))],
            "sigma0": sigma0, "c_hat_sensitivity": sens, "passed": True}


def nondegeneracy_check(field: ConeField, kappa: float, *,
                        max_ratio: float = 50.0,
                        r_window: tuple = (4.0, 0.25)) -> dict:
    """Band B = |grad u| * dist / u on the near-lateral strip.

    Nodes with dist(y, lateral boundary) <= kappa |y|, u > 0 and radius in
    [r_window[0]*a, r_window[1]*b] enter; the max/min ratio of B above
    ``max_ratio`` (or an empty strip) raises NondegeneracyFailure.
    The gradient is the area-weighted average of element gradients, with the
    e^{-s} factor converting to physical length.
    """
    grid = field.grid
    tris = grid.triangles
    eg = np.einsum("tld,tl->td", grid.grads, field.values[tris])
    num = np.zeros((grid.n_vertices, 2))
    den = np.zeros(grid.n_vertices)
    wt = grid.areas
    for loc in range(3):
        np.add.at(num, tris[:, loc], eg * wt[:, None])
        np.add.at(den, tris[:, loc], wt)
    node_grad = num / den[:, None]
    gmag = np.exp(-grid.node_s) * np.linalg.norm(node_grad, axis=1)

    r = grid.node_r()
    dist = grid.lateral_distance()
    strip = (dist <= kappa * r) & (field.values > 0.0) & \
            (r >= r_window[0] * grid.cone.a) & (r <= r_window[1] * grid.cone.b) & \
            ~grid.boundary_flags
    if not np.any(strip):
        raise NondegeneracyFailure("no interior nodes in the lateral strip; "
                                   "increase kappa or the grid resolution")
    B = gmag[strip] * dist[strip] / field.values[strip]
    bmin, bmax = float(B.min()), float(B.max())
    if bmin <= 0.0 or bmax / bmin > max_ratio:
        raise NondegeneracyFailure(
            f"band ratio {bmax / max(bmin, 1e-300):.3g} outside (0, {max_ratio}]")
    return {"n_nodes": int(strip.sum()), "band_min": bmin, "band_max": bmax,
            "ratio": bmax / bmin, "kappa": kappa}


# ---------------------------------------------------------------------------
# inner/outer diagnostic pair


def diagnostic_pair(domain: SphericalDomain, params: PParams, *, n_t: int = 48,
                    margin: float = None, tol: float = 1e-10):
    """Distinct positive profiles for the deformation diagnostics.

    omega comes from the inner approximation (solved on the shrunken domain,
    extended by zero up to the boundary), omega' from the outer approximation
    (restricted to the domain, clamped to zero at the lateral corners); both
    are evaluated on the angular nodes of an n_t cone grid.  The separation
    margin defaults to half an angular cell so padding never lands on an
    interior node.  Returns (theta_nodes, omega, omega_prime, beta) with beta
    the exponent of the domain itself.
    """
    if domain.kind == DomainKind.POLYGON:
        raise ConfigError("diagnostic pairs use the meridian reduction")
    alpha = domain.alpha
    dtheta = alpha / n_t
    if margin is None:
        margin = 0.5 * dtheta
    theta = np.linspace(0.0, alpha, n_t + 1)
    base = solve_beta(params, domain, Branch.SINGULAR, tol=tol)

    if domain.kind == DomainKind.ARC:
        dom_in = SphericalDomain.arc(alpha - 2.0 * margin)
        dom_out = SphericalDomain.arc(alpha + 2.0 * margin)
        pair_in = solve_beta(params, dom_in, Branch.SINGULAR, tol=tol)
        pair_out = solve_beta(params, dom_out, Branch.SINGULAR, tol=tol)
        w = pair_in.omega.interp(theta - margin)
        wp = pair_out.omega.interp(theta + margin)
    else:
        dom_in = SphericalDomain.cap(alpha - margin, domain.dim_N)
        dom_out = SphericalDomain.cap(alpha + margin, domain.dim_N)
        pair_in = solve_beta(params, dom_in, Branch.SINGULAR, tol=tol)
        pair_out = solve_beta(params, dom_out, Branch.SINGULAR, tol=tol)
        w = pair_in.omega.interp(theta)
        wp = pair_out.omega.interp(theta)
    w = np.clip(w, 0.0, None)
    wp = np.clip(wp, 0.0, None)
    wp[-1] = 0.0
    if domain.kind == DomainKind.ARC:
        wp[0] = 0.0
    return theta, w, wp, base.beta


def write_cone_report(path, family: TauFamily, contraction: dict,
                      beta_fit: float = None) -> None:
    """CSV: per-shell oscillation data plus the scalar diagnostics."""
    osc = contraction["osc"]
    radii = contraction["shell_radii"]
    with open(path, "w") as fh:
        fh.write("# delta1,%.12g\n" % family.delta1)
        fh.write("# c_hat_est,%.12g\n" % contraction["c_hat_est"])
        fh.write("# theta_fit,%.12g\n" % contraction["theta_fit"])
        fh.write("# bound,%.12g\n" % contraction["bound"])
        if beta_fit is not None:
            fh.write("# beta_fit,%.12g\n" % beta_fit)
        fh.write("shell,r,osc\n")
        for j, (r, o) in enumerate(zip(radii, osc)):
            fh.write("%d,%.12g,%.12g\n" % (j, r, o))
