"""Inequality and identity checks for the spherical eigenproblem.

Everything here is a property the solvers must satisfy regardless of domain:
ordered sub/supersolution envelopes between two comparable eigenfunctions,
the scalar monotonicity inequality behind the degenerate gradient weight,
energy bounds tying the full quadratic form to the p-norm, residual
homogeneity, and the ellipticity envelope of the Newton linearization.
run_suite bundles them into a deterministic, seedable report.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MeshError, PositivityError, RangeError
from .fields import Branch, ColatGrid, DiscreteField, Eigenpair
from .fem_sphere import (ArcMesh, assemble_linearized, assemble_weighted,
                         cap_mesh, element_gradients, evaluate_residual,
                         residual_pairings, solve_nonlinear)
from .geometry import PParams, SphericalDomain
from .ode_axisym import solve_beta

__all__ = [
    "SubSuperPair", "build_sub_super", "convexity_bound_check",
    "subsolution_sign_check", "power_subsolution_check",
    "vector_inequality_check", "energy_identity_check", "homogeneity_check",
    "ellipticity_check", "sup_ratio", "run_suite",
]


# ---------------------------------------------------------------------------
# sub/supersolution envelopes


def _values_of(obj) -> np.ndarray:
    return np.asarray(obj.values if hasattr(obj, "values") else obj, float)


@dataclass
class SubSuperPair:
    """Envelope pair between two ordered positive profiles.

    phi_t = sup{omega', t*omega} and psi_t = inf{(t/delta1)*omega', omega}
    satisfy omega' <= phi_t <= psi_t <= omega nodewise whenever
    delta1 = min(omega'/omega) and t lies in (delta1, 1);
    theta_t = (t - delta1)/(1 - delta1) is the convex weight for which the
    pair brackets theta_t*omega + (1 - theta_t)*omega'.
    """

    t: float
    theta_t: float
    delta1: float
    phi_t: np.ndarray
    psi_t: np.ndarray


def build_sub_super(omega, omega_prime, t: float, *,
                    interior=None) -> SubSuperPair:
    """Nodewise max/min envelopes for the deformation argument.

    ``interior`` masks the nodes on which both profiles are positive and the
    ratio is taken; by default every node where omega > 0.  The envelopes are
    still formed on all nodes (both vanish together on the boundary).
    """
    w = _values_of(omega)
    wp = _values_of(omega_prime)
    if interior is None:
        interior = w > 0.0
    if np.any(wp[interior] <= 0.0) or np.any(w[interior] <= 0.0):
        raise PositivityError("profiles must be positive on interior nodes")
    if np.any(wp[interior] > w[interior] * (1.0 + 1e-12)):
        raise PositivityError("omega' must not exceed omega nodewise")
    delta1 = float(np.min(wp[interior] / w[interior]))
    if not delta1 < t < 1.0:
        raise RangeError(f"t = {t} outside the admissible range "
                         f"({delta1:.6g}, 1)")
    phi = np.maximum(wp, t * w)
    psi = np.minimum((t / delta1) * wp, w)
    theta_t = (t - delta1) / (1.0 - delta1)
    return SubSuperPair(t=float(t), theta_t=theta_t, delta1=delta1,
                        phi_t=phi, psi_t=psi)


def convexity_bound_check(pair: SubSuperPair, omega, omega_prime) -> dict:
    """phi_t <= theta_t*omega + (1-theta_t)*omega' <= psi_t, nodewise.

    Both are exact scalar facts, so the only slack allowed is a few ulps of
    the node values.
    """
    w = _values_of(omega)
    wp = _values_of(omega_prime)
    mix = pair.theta_t * w + (1.0 - pair.theta_t) * wp
    rounding = 32.0 * np.finfo(float).eps * float(np.max(np.abs(w)))
    low = float(np.max(pair.phi_t - mix))
    high = float(np.max(mix - pair.psi_t))
    worst = max(low, high)
    return {"worst_violation": worst, "allowed": rounding,
            "ordering": float(np.max(pair.phi_t - pair.psi_t)),
            "passed": worst <= rounding}


def _target_mesh_values(target, omega):
    if isinstance(target, ColatGrid):
        return ArcMesh.from_colat_grid(target), target.values
    if isinstance(target, DiscreteField):
        return target.mesh, target.values
    return target, _values_of(omega)


def subsolution_sign_check(target, params: PParams, beta: float, omega=None,
                           *, kind: str = "sub", tol: float = None,
                           exclude=None) -> dict:
    """Sign of the weak residual pairings against interior hat functions.

    ``kind`` 'sub' demands every pairing <= tol, 'super' demands >= -tol.
    ``exclude`` is an optional global-node mask removed from the assertion
    (e.g. a band around the switch interface of a max/min envelope, where
    the distributional residual concentrates); its own worst pairing is
    reported separately.
    """
    if kind not in ("sub", "super"):
        raise RangeError("kind must be 'sub' or 'super'")
    mesh, values = _target_mesh_values(target, omega)
    if tol is None:
        tol = 10.0 * mesh.h() ** 2
    R = residual_pairings(mesh, params, beta, values)
    interior_ids = np.where(~mesh.boundary_flags)[0]
    signed = R if kind == "sub" else -R
    keep = np.ones(len(signed), dtype=bool)
    excluded_worst = 0.0
    if exclude is not None:
        keep = ~np.asarray(exclude, bool)[interior_ids]
        if not keep.all():
            excluded_worst = float(signed[~keep].max())
    worst = float(signed[keep].max()) if keep.any() else 0.0
    node = int(interior_ids[keep][int(np.argmax(signed[keep]))]) \
        if keep.any() else -1
    return {"kind": kind, "worst": worst, "worst_node": node, "tol": tol,
            "excluded_worst": excluded_worst, "passed": worst <= tol}


def power_subsolution_check(target, params: PParams, beta_prime: float,
                            theta: float, omega=None, *,
                            weak_tol: float = None) -> dict:
    """The power omega'^theta is a subsolution at exponent theta*beta_prime.

    Evaluates the closed-form elementwise factor

        -theta^(p-2) * (beta'^2 w^2 + |grad w|^2)^((p-2)/2)
          * ((beta - beta') w^2 + (p-1) theta (theta-1) |grad w|^2)

    which is a product of nonnegative quantities with a leading minus sign,
    so it must be <= 0 at every element exactly; then checks the weak
    residual sign of the interpolated power on the same mesh.
    """
    if theta <= 1.0 or beta_prime <= 0.0:
        raise RangeError("need theta > 1 and beta_prime > 0")
    mesh, values = _target_mesh_values(target, omega)
    p = params.p
    beta = theta * beta_prime
    if mesh.dim == 1:
        wbar = 0.5 * (values[:-1] + values[1:])
        grad2 = (np.diff(values) / mesh.h_elems) ** 2
    else:
        wbar = values[mesh.triangles].mean(axis=1)
        G = element_gradients(mesh, values)
        grad2 = np.einsum("td,td->t", G, G)
    qprime = beta_prime ** 2 * wbar ** 2 + grad2
    weight = np.zeros_like(qprime)
    pos = qprime > 0.0
    weight[pos] = qprime[pos] ** ((p - 2.0) / 2.0)
    factor = -(theta ** (p - 2.0)) * weight * (
        (beta - beta_prime) * wbar ** 2
        + (p - 1.0) * theta * (theta - 1.0) * grad2)
    closed_worst = float(factor.max())
    eta = np.sign(values) * np.abs(values) ** theta
    weak = subsolution_sign_check(mesh, params, beta, eta, kind="sub",
                                  tol=weak_tol)
    return {"closed_form_worst": closed_worst,
            "closed_form_passed": closed_worst <= 0.0,
            "weak": weak,
            "passed": closed_worst <= 0.0 and weak["passed"]}


# ---------------------------------------------------------------------------
# scalar vector inequality


def vector_inequality_check(params: PParams, trials: int, *,
                            seed: int = 0) -> dict:
    """Monotonicity gap of the regularized p-flux map, randomized.

    For gamma >= 0 and vectors A, B of dimension N-1,

        <(gamma+|B|^2)^((p-2)/2) B - (gamma+|A|^2)^((p-2)/2) A, B - A>
            >= (p-1) |B-A|^2 (gamma + 1 + |B|^2 + |A|^2)^((p-2)/2)

    holds for 1 < p < 2.  Draws log-uniform magnitudes across four decades,
    includes gamma = 0 and B = A slices, and reports the worst margin
    relative to the right-hand side scale.
    """
    p = params.p
    if not 1.0 < p < 2.0:
        raise RangeError("the flux monotonicity bound needs 1 < p < 2")
    if trials < 1:
        raise RangeError("trials must be >= 1")
    d = params.dim_N - 1
    rng = np.random.default_rng(seed)
    scale_a = 10.0 ** rng.uniform(-2.0, 2.0, size=trials)
    scale_b = 10.0 ** rng.uniform(-2.0, 2.0, size=trials)
    A = rng.standard_normal((trials, d)) * scale_a[:, None]
    B = rng.standard_normal((trials, d)) * scale_b[:, None]
    gamma = 10.0 ** rng.uniform(-2.0, 2.0, size=trials)
    gamma[rng.random(trials) < 0.1] = 0.0
    same = rng.random(trials) < 0.02
    B[same] = A[same]

    a2 = np.einsum("td,td->t", A, A)
    b2 = np.einsum("td,td->t", B, B)
    fa = np.zeros(trials)
    fb = np.zeros(trials)
    base_a = gamma + a2
    base_b = gamma + b2
    pos_a = base_a > 0.0
    pos_b = base_b > 0.0
    fa[pos_a] = base_a[pos_a] ** ((p - 2.0) / 2.0)
    fb[pos_b] = base_b[pos_b] ** ((p - 2.0) / 2.0)
    diff = B - A
    lhs = np.einsum("td,td->t", fb[:, None] * B - fa[:, None] * A, diff)
    d2 = np.einsum("td,td->t", diff, diff)
    rhs = (p - 1.0) * d2 * (gamma + 1.0 + a2 + b2) ** ((p - 2.0) / 2.0)
    slack = 1e-10 * (rhs + np.abs(lhs) + 1e-300)
    margin = lhs - rhs
    violations = int(np.sum(margin < -slack))
    worst = float(np.min(margin / (rhs + 1e-300)))
    return {"trials": trials, "violations": violations,
            "worst_rel_margin": worst, "passed": violations == 0}


# ---------------------------------------------------------------------------
# energy, homogeneity, ellipticity


def _p_integral(mesh, values: np.ndarray, p: float) -> float:
    """One-point (element-mean) quadrature of |v|^p against the measure."""
    if mesh.dim == 1:
        vbar = 0.5 * np.abs(values[:-1] + values[1:])
        return float(np.sum(mesh.measure * mesh.h_elems * vbar ** p))
    vbar = np.abs(values[mesh.triangles].mean(axis=1))
    return float(np.sum(mesh.measure * mesh.areas * vbar ** p))


def energy_identity_check(eigenpair: Eigenpair, params: PParams, *,
                          tol: float = None) -> dict:
    """Weak energy identity and the full-form p-norm bound.

    The identity int q^((p-2)/2)|grad w|^2 = (p-1) beta (beta - beta0)
    int q^((p-2)/2) w^2 is evaluated with the solver's own quadrature and
    must hold to the solve tolerance.  On the singular branch the combined
    form int q^(p/2), which equals the identity's left side plus beta^2
    times its right-side mass, is additionally bounded by

        (beta (p beta - (p-1) beta0))^(p/2) * int |w|^p     (p >= 2)
        beta^(p-1) (p beta - (p-1) beta0)   * int |w|^p     (1 < p < 2)

    up to a discretization slack of order h^2 (the bound is tight at p = 2).
    """
    mesh, values = _target_mesh_values(eigenpair.omega, None)
    beta = eigenpair.beta
    p = params.p
    K, M = assemble_weighted(mesh, params, beta, values, eps=0.0)
    lhs = float(values @ (K @ values))
    mass = float(values @ (M @ values))
    lam = (p - 1.0) * beta * (beta - params.beta0)
    rhs = lam * mass
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    if tol is None:
        tol = max(1e-8, 10.0 * eigenpair.residual_norm)
    report = {"identity_lhs": lhs, "identity_rhs": rhs,
              "identity_rel_err": rel, "tol": tol,
              "bound_checked": False, "passed": rel <= tol}
    if beta > 0.0 and p * beta - (p - 1.0) * params.beta0 > 0.0:
        qint = lhs + beta * beta * mass
        pint = _p_integral(mesh, values, p)
        if p >= 2.0:
            const = (beta * (p * beta - (p - 1.0) * params.beta0)) ** (p / 2.0)
        else:
            const = beta ** (p - 1.0) * (p * beta - (p - 1.0) * params.beta0)
        bound_slack = (const * pint - qint) / max(const * pint, 1e-300)
        bound_tol = max(tol, 10.0 * mesh.h() ** 2)
        report.update(bound_checked=True, bound_lhs=qint,
                      bound_rhs=const * pint, bound_rel_slack=bound_slack,
                      bound_tol=bound_tol)
        report["passed"] = report["passed"] and bound_slack >= -bound_tol
    return report


def homogeneity_check(eigenpair: Eigenpair, params: PParams, lam: float, *,
                      tol: float = 1e-10) -> dict:
    """residual(lam * w) = lam^(p-1) residual(w) for the unregularized form.

    The residual is evaluated at an exponent shifted off the eigenvalue so
    both sides are far from rounding noise; the scaling factor is exact for
    the eps = 0 assembly, so failure indicates an assembly bug.
    """
    if lam <= 0.0:
        raise RangeError("lam must be positive")
    mesh, values = _target_mesh_values(eigenpair.omega, None)
    beta = eigenpair.beta * 1.25 + 0.5 * math.copysign(1.0, eigenpair.beta)
    r1 = evaluate_residual(mesh, params, beta, values)
    r2 = evaluate_residual(mesh, params, beta, lam * values)
    expected = lam ** (params.p - 1.0)
    factor = r2 / r1 if r1 > 0.0 else float("nan")
    rel = abs(factor - expected) / expected
    return {"lam": lam, "factor": factor, "expected": expected,
            "rel_err": rel, "passed": rel <= tol}


def ellipticity_check(mesh, params: PParams, values, *, seed: int = 0,
                      eps: float = 0.0, tol: float = 1e-9) -> dict:
    """Two-sided bounds on the Newton coefficient matrices, randomized.

    For every element with gradient G and g2 = |G|^2 + eps^2 > 0 the matrix
    B = g2^((p-4)/2) ((p-2) G G^T + g2 I) must satisfy

        min{1, p-1} g2^((p-2)/2) |xi|^2 <= xi^T B xi
                                        <= max{1, p-1} g2^((p-2)/2) |xi|^2

    for one random direction xi per element.
    """
    values = _values_of(values)
    _, B = assemble_linearized(mesh, params, values, eps=eps)
    G = element_gradients(mesh, values)
    g2 = np.einsum("td,td->t", G, G) + eps * eps
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(G.shape)
    xi2 = np.einsum("td,td->t", xi, xi)
    quad = np.einsum("td,tde,te->t", xi, B, xi)
    pos = g2 > 0.0
    p = params.p
    ref = np.zeros_like(g2)
    ref[pos] = g2[pos] ** ((p - 2.0) / 2.0) * xi2[pos]
    lo = min(1.0, p - 1.0)
    hi = max(1.0, p - 1.0)
    under = lo * ref[pos] - quad[pos]
    over = quad[pos] - hi * ref[pos]
    allowed = tol * np.maximum(ref[pos], 1e-300)
    violations = int(np.sum(under > allowed) + np.sum(over > allowed))
    worst = float(np.max(np.maximum(under, over) / np.maximum(ref[pos], 1e-300)))
    return {"n_elements": int(pos.sum()), "violations": violations,
            "worst_rel": worst, "passed": violations == 0}


def sup_ratio(eigenpair: Eigenpair, params: PParams) -> float:
    """||w||_inf / ||w||_Lp, the shape constant that must stay bounded."""
    mesh, values = _target_mesh_values(eigenpair.omega, None)
    pint = _p_integral(mesh, values, params.p)
    return float(np.max(np.abs(values)) / pint ** (1.0 / params.p))


# ---------------------------------------------------------------------------
# bundled suite


def _suite_line(results: list, check: str, passed: bool, slack: float,
                detail: str = "") -> None:
    results.append({"check": check, "passed": bool(passed),
                    "slack": float(slack), "detail": detail})


def run_suite(*, seed: int = 0, trials: int = 10000) -> list:
    """Deterministic verification sweep; returns one record per check.

    Each record carries the check id, pass/fail, the worst observed slack
    (signed so that positive means violation), and a short detail string.
    """
    results = []

    for p in (1.1, 1.5, 1.9):
        for dim in (2, 3):
            rep = vector_inequality_check(PParams(p, dim), trials,
                                          seed=seed + int(100 * p) + dim)
            _suite_line(results, f"vector-inequality-p{p}-N{dim}",
                        rep["passed"], -rep["worst_rel_margin"],
                        f"{rep['violations']} violations in {trials} trials")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(5, 40))
        w = rng.uniform(0.2, 2.0, size=n)
        ratio = rng.uniform(0.05, 1.0)
        wp = w * rng.uniform(ratio, 1.0, size=n)
        d1 = float(np.min(wp / w))
        if d1 >= 1.0 - 1e-9:
            continue
        t = rng.uniform(d1 + 1e-6, 1.0 - 1e-6)
        pair = build_sub_super(w, wp, t)
        rep = convexity_bound_check(pair, w, wp)
        worst = max(worst, rep["worst_violation"] - rep["allowed"],
                    rep["ordering"] - rep["allowed"])
    _suite_line(results, "convex-combination-bound", worst <= 0.0, worst,
                "1000 random ordered profiles")

    params = PParams(2.5, 2)
    arc = SphericalDomain.arc(0.5 * math.pi)
    pair_s = solve_beta(params, arc, Branch.SINGULAR, tol=1e-10)
    # the trajectory can overshoot a hair below zero at the far endpoint
    w = np.clip(pair_s.omega.values, 0.0, None)
    w /= np.max(w)
    wp = w ** 1.3
    env = build_sub_super(w, wp, t=0.7,
                          interior=(pair_s.omega.nodes > 0)
                          & (pair_s.omega.nodes < arc.alpha))
    rep = convexity_bound_check(env, w, wp)
    _suite_line(results, "sub-super-order", rep["passed"],
                rep["worst_violation"] - rep["allowed"],
                f"delta1={env.delta1:.4f} on the quarter arc")

    rep = power_subsolution_check(pair_s.omega, params, pair_s.beta, 1.5)
    _suite_line(results, "power-subsolution", rep["passed"],
                max(rep["closed_form_worst"],
                    rep["weak"]["worst"] - rep["weak"]["tol"]),
                f"weak worst {rep['weak']['worst']:.3e}")

    nodes = np.linspace(0.0, 0.5 * math.pi, 801)
    hemi = ColatGrid(0.5 * math.pi, nodes, np.cos(nodes), -np.sin(nodes), 3)
    hemi_pair = Eigenpair(2.0, hemi, Branch.SINGULAR, 1e-9, 0)
    rep = energy_identity_check(hemi_pair, PParams(2.0, 3), tol=2e-6)
    _suite_line(results, "energy-identity-hemisphere", rep["passed"],
                rep["identity_rel_err"],
                f"bound slack {rep.get('bound_rel_slack', 0.0):.3e}")

    mesh = ArcMesh.uniform(arc.alpha, 240)
    fem_pair = solve_nonlinear(mesh, params, Branch.SINGULAR, tol=1e-10)
    rep = energy_identity_check(fem_pair, params)
    _suite_line(results, "energy-identity-arc-p2.5", rep["passed"],
                rep["identity_rel_err"],
                f"bound slack {rep.get('bound_rel_slack', 0.0):.3e}")

    worst = 0.0
    for lam in (2.0, 0.37, 11.0):
        rep = homogeneity_check(fem_pair, params, lam)
        worst = max(worst, rep["rel_err"])
    _suite_line(results, "residual-homogeneity", worst <= 1e-10, worst,
                "lam in {2, 0.37, 11} on the arc eigenfunction")

    cap = cap_mesh(0.4 * math.pi, 14)
    zval = cap.vertices[:, 2]
    bump = np.where(cap.boundary_flags, 0.0,
                    (zval - zval[cap.boundary_flags].max()))
    worst = 0.0
    ok = True
    for p in (1.5, 3.0):
        rep = ellipticity_check(cap, PParams(p, 3), bump, seed=seed + int(p))
        ok = ok and rep["passed"]
        worst = max(worst, rep["worst_rel"])
    _suite_line(results, "newton-ellipticity", ok, worst,
                "random directions on a cap field, p in {1.5, 3}")

    r1 = sup_ratio(fem_pair, params)
    mesh2 = mesh.refine()
    fem_pair2 = solve_nonlinear(mesh2, params, Branch.SINGULAR, tol=1e-10)
    r2 = sup_ratio(fem_pair2, params)
    drift = abs(r2 - r1) / r1
    _suite_line(results, "sup-norm-ratio-trend", drift < 0.10, drift,
                f"ratio {r1:.6f} -> {r2:.6f} under refinement")

    return results
