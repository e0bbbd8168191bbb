"""Colatitude ODE reduction and shooting solver for arcs and caps.

An axisymmetric eigenfunction w(theta) of the spherical problem satisfies

    -(sin(theta)^(2-N) * (sin(theta)^(N-2) * q^((p-2)/2) * w')' )
        = (p-1)*beta*(beta-beta0) * q^((p-2)/2) * w,      q = beta^2 w^2 + w'^2,

on (0, alpha), with no sin factors for N = 2 (arcs).  Expanding the flux
derivative gives an explicit second-order form whose denominator
(p-1) w'^2 + beta^2 w^2 never vanishes on nontrivial trajectories, so the
integration is smooth for every p > 1.  The exponent is found by matching the
trajectory's first zero to alpha.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import BracketFailure, DegenerateWeight, IntegratorError, MonotonicityViolation
from .fields import Branch, ColatGrid, Eigenpair
from .geometry import DomainKind, PParams, SphericalDomain

# magnitude window scanned for |beta| before bisection
BETA_MAG_MIN = 1e-3
BETA_MAG_MAX = 50.0


def series_start(params: PParams, beta: float, theta0: float):
    """Regular pole expansion w = 1 + c2*theta^2 + O(theta^4) for caps."""
    lam = (params.p - 1.0) * beta * (beta - params.beta0)
    c2 = -lam / (2.0 * (params.dim_N - 1))
    return 1.0 + c2 * theta0 * theta0, 2.0 * c2 * theta0


def ode_rhs(params: PParams, beta: float, theta: float, omega: float,
            omega_prime: float, eps: float = 0.0):
    """Right-hand side (w', w'') of the explicit colatitude ODE.

    ``eps`` regularizes the weight (q -> q + eps^2).  With eps = 0 a
    simultaneous zero of w and w' leaves the weight q^((p-2)/2) undefined and
    DegenerateWeight is raised; trajectories of interest never reach it.
    """
    p, n = params.p, params.dim_N
    lam = (p - 1.0) * beta * (beta - params.beta0)
    qe = beta * beta * omega * omega + omega_prime * omega_prime + eps * eps
    den = (p - 1.0) * omega_prime * omega_prime + beta * beta * omega * omega + eps * eps
    if den == 0.0:
        raise DegenerateWeight("q = 0 on the trajectory; pass eps > 0")
    num = -(p - 2.0) * beta * beta * omega * omega_prime * omega_prime - lam * qe * omega
    if n > 2:
        num -= (n - 2.0) * (math.cos(theta) / math.sin(theta)) * qe * omega_prime
    return omega_prime, num / den


@dataclass
class ShootResult:
    first_zero: float          # theta of the first downward zero, inf if none
    endpoint_value: float      # w(alpha)
    trajectory: ColatGrid
    regularization_max: float  # max of eps^2/(q + eps^2) along the trajectory
    n_rhs_evals: int


def _initial_state(params: PParams, beta: float, theta_start: float):
    if params.dim_N == 2:
        return 0.0, (0.0, 1.0)
    w, wp = series_start(params, beta, theta_start)
    return theta_start, (w, wp)


def _integration_end(params: PParams, alpha: float) -> float:
    pad = max(0.02 * alpha, 1e-9)
    end = alpha + pad
    if params.dim_N > 2:
        # keep clear of the coordinate singularity at theta = pi
        end = min(end, alpha + 0.5 * (math.pi - alpha))
    return end


def _rk4_path(params, beta, alpha, end, theta_s, y0, eps, n_steps):
    """Fixed-step classical RK4 with endpoint hit at alpha and zero refinement."""
    evals = [0]

    def f(t, y):
        evals[0] += 1
        return ode_rhs(params, beta, t, y[0], y[1], eps)

    def rk4_step(t, y, h):
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, (y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]))
        k3 = f(t + 0.5 * h, (y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]))
        k4 = f(t + h, (y[0] + h * k3[0], y[1] + h * k3[1]))
        return (y[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                y[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))

    def integrate(t0, y, t1, m):
        h = (t1 - t0) / m
        ts = [t0]
        ys = [y]
        for i in range(m):
            y = rk4_step(t0 + i * h, y, h)
            ts.append(t0 + (i + 1) * h)
            ys.append(y)
            if not (math.isfinite(y[0]) and math.isfinite(y[1])):
                raise IntegratorError(f"rk4 blew up near theta = {ts[-1]:.6g}")
        return ts, ys

    n1 = max(8, int(round(n_steps * (alpha - theta_s) / (end - theta_s))))
    n2 = max(4, n_steps - n1)
    ts1, ys1 = integrate(theta_s, y0, alpha, n1)
    ts2, ys2 = integrate(alpha, ys1[-1], end, n2)
    ts = np.array(ts1 + ts2[1:])
    ws = np.array([y[0] for y in ys1] + [y[0] for y in ys2[1:]])
    wps = np.array([y[1] for y in ys1] + [y[1] for y in ys2[1:]])

    first_zero = math.inf
    hit = np.nonzero((ws[:-1] > 0.0) & (ws[1:] <= 0.0))[0]
    if hit.size:
        i = hit[0]
        lo, hi = ts[i], ts[i + 1]
        y_lo = (ws[i], wps[i])
        # bisect inside the step, re-integrating from the stored state
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            _, ys_mid = integrate(ts[i], y_lo, mid, 8)
            if ys_mid[-1][0] > 0.0:
                lo = mid
            else:
                hi = mid
        first_zero = 0.5 * (lo + hi)
    return ts, ws, wps, first_zero, ys1[-1][0], evals[0]


def shoot(params: PParams, beta: float, alpha: float, *, method: str = "dop853",
          rtol: float = 1e-11, atol: float = 1e-14, eps: float = 1e-10,
          n_nodes: int = 513, theta_start: float = 1e-6,
          n_steps: int = 4096) -> ShootResult:
    """Integrate the colatitude ODE from the pole (caps) or endpoint (arcs).

    Caps start at ``theta_start`` from the second-order pole series; arcs
    start at 0 with w = 0, w' = 1.  Two independent integrators are
    available: scipy's adaptive DOP853 (``method='dop853'``) and a fixed-step
    classical RK4 written here (``method='rk4'``), so results can be
    cross-checked without shared machinery.

    Returns
    -------
    ShootResult
        First downward zero (inf when the trajectory stays positive up to a
        small padding past alpha), the value at alpha, the trajectory sampled
        on ``n_nodes`` uniform nodes of [0, alpha], and the worst weight
        regularization activation eps^2/(q + eps^2) seen along the way.
    """
    if beta == 0.0:
        raise ValueError("beta = 0 does not separate")
    theta_s, y0 = _initial_state(params, beta, theta_start)
    end = _integration_end(params, alpha)
    grid = np.linspace(0.0, alpha, n_nodes)

    if method == "rk4":
        ts, ws, wps, first_zero, w_alpha, nev = _rk4_path(
            params, beta, alpha, end, theta_s, y0, eps, n_steps)
        vals = np.interp(grid, ts, ws)
        ders = np.interp(grid, ts, wps)
        qs = beta * beta * ws * ws + wps * wps
    elif method == "dop853":
        nev_holder = [0]

        def fun(t, y):
            nev_holder[0] += 1
            w, wp = ode_rhs(params, beta, t, y[0], y[1], eps)
            return [w, wp]

        def zero_event(t, y):
            return y[0]

        zero_event.direction = -1.0
        sol = solve_ivp(fun, (theta_s, end), y0, method="DOP853", rtol=rtol,
                        atol=atol, dense_output=True, events=[zero_event])
        if not sol.success:
            raise IntegratorError(f"DOP853 failed near theta = {sol.t[-1]:.6g}: {sol.message}")
        events = sol.t_events[0]
        first_zero = float(events[0]) if events.size else math.inf
        dense_grid = np.clip(grid, theta_s, sol.t[-1])
        dense = sol.sol(dense_grid)
        vals, ders = dense[0].copy(), dense[1].copy()
        w_alpha = float(sol.sol(min(alpha, sol.t[-1]))[0])
        sample = sol.sol(np.linspace(theta_s, sol.t[-1], 1024))
        qs = beta * beta * sample[0] ** 2 + sample[1] ** 2
        nev = nev_holder[0]
    else:
        raise ValueError(f"unknown method {method!r}")

    if params.dim_N > 2:
        vals[0], ders[0] = 1.0, 0.0  # exact pole limit
    reg = float(np.max(eps * eps / (qs + eps * eps))) if eps > 0.0 else 0.0
    traj = ColatGrid(alpha, grid, vals, ders, params.dim_N)
    return ShootResult(first_zero, float(w_alpha), traj, reg, nev)


def _branch_magnitude_floor(params: PParams, branch: Branch) -> float:
    """Smallest |beta| worth scanning: where the reaction factor can be positive."""
    thresh = params.beta0 * (params.p - 1.0) / params.p
    if branch is Branch.SINGULAR:
        return max(BETA_MAG_MIN, thresh * (1.0 + 1e-12)) if thresh > 0.0 else BETA_MAG_MIN
    return max(BETA_MAG_MIN, -thresh * (1.0 + 1e-12)) if thresh < 0.0 else BETA_MAG_MIN


def solve_beta(params: PParams, domain: SphericalDomain, branch, *,
               tol: float = 1e-10, method: str = "dop853", rtol: float = 1e-11,
               atol: float = 1e-14, n_scan: int = 40, bracket=None,
               n_nodes: int = 513, n_steps: int = 4096) -> Eigenpair:
    """Find the branch exponent of an arc or cap by first-zero shooting.

    Scans |beta| geometrically over ``bracket`` (default: the admissible
    magnitude window), checks that the finite first zeros decrease strictly
    as |beta| grows, then drives the sign-sensitive mismatch
    ``w(alpha)`` / ``-(alpha - first_zero)`` to zero with Brent's method.

    Returns an Eigenpair whose profile is normalized to unit integral of
    |w| over the domain; residual_norm is |first_zero - alpha| of the final
    trajectory.
    """
    branch = Branch(branch)
    if domain.kind not in (DomainKind.ARC, DomainKind.CAP):
        raise ValueError("shooting handles arcs and caps only")
    if domain.dim_N != params.dim_N:
        raise ValueError("domain and parameter dimensions disagree")
    alpha = domain.alpha
    sgn = branch.sign
    shots = [0]

    def fire(mag: float, loose: bool = False) -> ShootResult:
        shots[0] += 1
        if method == "rk4":
            steps = max(512, n_steps // 8) if loose else n_steps
            return shoot(params, sgn * mag, alpha, method="rk4",
                         n_nodes=9, n_steps=steps)
        r = 1e-6 if loose else rtol
        a = 1e-9 if loose else atol
        return shoot(params, sgn * mag, alpha, method="dop853",
                     rtol=r, atol=a, n_nodes=9)

    if bracket is None:
        lo = _branch_magnitude_floor(params, branch)
        mags = np.geomspace(lo, BETA_MAG_MAX, n_scan)
    else:
        mags = np.geomspace(bracket[0], bracket[1], max(8, n_scan // 2))

    zeros = np.array([fire(m, loose=True).first_zero for m in mags])
    finite = np.isfinite(zeros)
    if np.any(finite):
        zf = zeros[finite]
        if np.any(np.diff(zf) > 1e-6 * np.maximum(1.0, zf[:-1])):
            pairs = list(zip((sgn * mags[finite]).tolist(), zf.tolist()))
            raise MonotonicityViolation(
                f"first zero not decreasing in |beta|; scan pairs: {pairs}")
    idx = np.nonzero(finite & (zeros <= alpha))[0]
    if idx.size == 0:
        raise BracketFailure(
            f"no first zero at or before alpha = {alpha:.6g} for |beta| in "
            f"[{mags[0]:.3g}, {mags[-1]:.3g}] ({branch.value} branch)")
    i = int(idx[0])
    if i == 0:
        raise BracketFailure(
            f"first zero already inside alpha at the smallest scanned |beta| = {mags[0]:.3g}")

    def mismatch(mag: float) -> float:
        res = fire(mag)
        if res.first_zero < alpha:
            return -(alpha - res.first_zero)
        return res.endpoint_value

    lo_m, hi_m = float(mags[i - 1]), float(mags[i])
    f_lo, f_hi = mismatch(lo_m), mismatch(hi_m)
    widen = 0
    while f_lo * f_hi > 0.0 and widen < 4:
        # loose scan placed the bracket one cell off; widen geometrically
        lo_m *= 0.8
        hi_m *= 1.25
        f_lo, f_hi = mismatch(lo_m), mismatch(hi_m)
        widen += 1
    if f_lo * f_hi > 0.0:
        raise BracketFailure("sign change lost when refining the scan bracket")
    mag_star = brentq(mismatch, lo_m, hi_m, xtol=tol, rtol=4 * np.finfo(float).eps)

    final = shoot(params, sgn * mag_star, alpha, method=method, rtol=rtol,
                  atol=atol, n_nodes=n_nodes, n_steps=n_steps)
    traj = final.trajectory
    norm = traj.integral_abs()
    traj = traj.scaled(1.0 / norm)
    resid = abs(final.first_zero - alpha) if math.isfinite(final.first_zero) \
        else abs(final.endpoint_value) / np.max(np.abs(traj.values))
    return Eigenpair(beta=sgn * mag_star, omega=traj, branch=branch,
                     residual_norm=resid, iterations=shots[0])


def first_zero_at(params: PParams, domain: SphericalDomain, beta: float,
                  **kwargs) -> float:
    """First zero of the shooting trajectory at a prescribed beta."""
    return shoot(params, beta, domain.alpha, **kwargs).first_zero
