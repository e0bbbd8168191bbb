"""Inner/outer domain approximation of exponents and quotient diagnostics.

The exponent of a domain is bracketed by solving on a family of slightly
shrunken (inner) and slightly expanded (outer) domains: shrinking raises the
exponent magnitude, expanding lowers it, and both sequences converge to the
exponent of the limit domain.  Extrapolated limits of the two one-sided
sequences and their gap quantify how well the bracket has closed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, MonotonicityViolation, NegativeGap,
                     PositivityError)
from .fields import Branch, ColatGrid, DiscreteField, Eigenpair
from .fem_sphere import ArcMesh, cap_mesh, polygon_mesh, solve_nonlinear
from .geometry import (Direction, DomainFamily, DomainKind, PParams,
                       SphericalDomain)
from .ode_axisym import solve_beta
from .parallel import pmap as _pmap


def solve_domain(domain: SphericalDomain, params: PParams, branch, *,
                 solver: str = "auto", tol: float = 1e-9,
                 mesh_h: float = 0.04) -> Eigenpair:
    """Exponent/eigenfunction on one domain, dispatched by kind.

    ``solver`` is "auto" (shooting for arcs and caps, finite elements for
    polygons), "ode", or "fem"; "fem" on an arc or cap builds the matching
    1D or polar mesh at resolution ``mesh_h``.
    """
    branch = Branch(branch)
    if solver not in ("auto", "ode", "fem"):
        raise ConfigError(f"unknown solver {solver!r}")
    if solver == "auto":
        solver = "fem" if domain.kind == DomainKind.POLYGON else "ode"
    if solver == "ode":
        if domain.kind == DomainKind.POLYGON:
            raise ConfigError("shooting applies only to arcs and caps")
        return solve_beta(params, domain, branch, tol=tol)
    if domain.kind == DomainKind.ARC:
        mesh = ArcMesh.uniform(domain.alpha, max(8, math.ceil(domain.alpha / mesh_h)))
    elif domain.kind == DomainKind.CAP:
        if domain.dim_N != 3:
            raise ConfigError("surface meshes exist for S^2 caps only")
        mesh = cap_mesh(domain.alpha, max(4, math.ceil(domain.alpha / mesh_h)))
    else:
        mesh = polygon_mesh(domain, mesh_h)
    return solve_nonlinear(mesh, params, branch, tol=min(tol, 1e-8))


@dataclass(frozen=True)
class BracketResult:
    """One- or two-sided exponent bracket over a shrink/expand family."""

    steps: tuple
    beta_inner: tuple
    beta_outer: tuple
    beta_in_limit: float | None
    beta_out_limit: float | None
    gap: float | None
    residual_inner: tuple = ()
    residual_outer: tuple = ()
    err_in: float = 0.0
    err_out: float = 0.0

    def merged_with(self, other: "BracketResult", tol: float) -> "BracketResult":
        if self.steps != other.steps:
            raise ConfigError("cannot merge brackets over different step lists")
        inner, outer = (self, other) if self.beta_inner else (other, self)
        gap = abs(inner.beta_in_limit) - abs(outer.beta_out_limit)
        # limits come from extrapolation, so a crossing within the combined
        # error bars is noise, not a discretization failure
        allow = tol + inner.err_in + outer.err_out
        if gap < -allow:
            raise NegativeGap(
                f"outer exponent magnitude exceeds inner by {-gap:.3g} (tol {allow:.3g})")
        return BracketResult(self.steps, inner.beta_inner, outer.beta_outer,
                             inner.beta_in_limit, outer.beta_out_limit, gap,
                             inner.residual_inner, outer.residual_outer,
                             inner.err_in, outer.err_out)


def _aitken_pass(b):
    """One sweep of ratio-fitted Richardson: removes the leading power term.

    Entry k uses the (k-2, k-1, k) triplet; entries whose increments do not
    look geometric are passed through unchanged.
    """
    out = []
    for k in range(2, len(b)):
        d1 = b[k - 1] - b[k]
        d2 = b[k - 2] - b[k - 1]
        if d1 != 0.0 and math.isfinite(d2 / d1) and d2 / d1 > 1.05:
            out.append(b[k] - d1 / (d2 / d1 - 1.0))
        else:
            out.append(b[k])
    return out


def _extrapolate(betas, steps):
    """Limit of a sequence beta_k = L + C*step_k^q (+ higher-order terms).

    Cascaded Aitken sweeps peel off up to two power-law terms; the error bar
    is the last increment of the final accelerated sequence.  Sequences that
    never look geometric fall back to the last value plus last increment.
    """
    b = list(betas)
    if len(b) < 3:
        return b[-1], abs(b[-1] - b[-2]) if len(b) > 1 else 0.0
    acc = _aitken_pass(b)
    if acc[-1] == b[-1]:
        return b[-1], abs(b[-1] - b[-2])
    if len(acc) >= 3:
        acc2 = _aitken_pass(acc)
        if len(acc2) >= 2 and abs(acc2[-1] - acc2[-2]) < abs(acc[-1] - acc[-2]):
            return acc2[-1], max(abs(acc2[-1] - acc2[-2]), 1e-15)
    if len(acc) >= 2:
        return acc[-1], max(abs(acc[-1] - acc[-2]), 1e-15)
    return acc[-1], abs(b[-1] - b[-2])


def _family_exponents(domain, params, branch, steps, direction, tol, mesh_h):
    branch = Branch(branch)
    fam = DomainFamily(domain, direction, tuple(steps))
    doms = fam.domains()

    def run(d):
        return solve_domain(d, params, branch, tol=tol, mesh_h=mesh_h)

    pairs = _pmap(run, doms)
    betas = [p.beta for p in pairs]
    resid = [p.residual_norm for p in pairs]
    slack = 10.0 * tol + (0.0 if domain.kind != DomainKind.POLYGON else 0.5 * mesh_h ** 2)
    mags = [abs(b) for b in betas]
    for k in range(1, len(mags)):
        drift = mags[k] - mags[k - 1]
        bad = drift > slack if direction == Direction.INNER else drift < -slack
        if bad:
            word = "increase" if direction == Direction.INNER else "decrease"
            raise MonotonicityViolation(
                f"|beta| must not {word} along the {direction.value} family: "
                f"step k={k} moved by {drift:.3g} (allowed {slack:.3g})")
    return betas, resid, pairs


def approximate_from_inside(domain, params, branch, steps, *, tol: float = 1e-9,
                            mesh_h: float = 0.04) -> BracketResult:
    """Exponents of a shrinking family exhausting the domain from inside.

    The exponent magnitudes are non-increasing along the family (they sit
    above the target from the smaller domains) and extrapolate to the
    domain's exponent.
    """
    betas, resid, _ = _family_exponents(domain, params, branch, steps,
                                        Direction.INNER, tol, mesh_h)
    limit, err = _extrapolate(betas, list(steps))
    return BracketResult(tuple(steps), tuple(betas), (), limit, None, None,
                         residual_inner=tuple(resid), err_in=err)


def approximate_from_outside(domain, params, branch, steps, *, tol: float = 1e-9,
                             mesh_h: float = 0.04) -> BracketResult:
    """Exponents of an expanding family enclosing the domain from outside."""
    betas, resid, _ = _family_exponents(domain, params, branch, steps,
                                        Direction.OUTER, tol, mesh_h)
    limit, err = _extrapolate(betas, list(steps))
    return BracketResult(tuple(steps), (), tuple(betas), None, limit, None,
                         residual_outer=tuple(resid), err_out=err)


def exponent_bracket(domain, params, branch, steps, *, tol: float = 1e-9,
                     mesh_h: float = 0.04, gap_tol: float = None) -> BracketResult:
    """Two-sided bracket: gap = |inner limit| - |outer limit| must be >= -tol.

    A clearly negative gap means the shrunken domains produced smaller
    exponent magnitudes than the expanded ones, which only discretization
    failure can cause; that raises NegativeGap.
    """
    inner = approximate_from_inside(domain, params, branch, steps, tol=tol, mesh_h=mesh_h)
    outer = approximate_from_outside(domain, params, branch, steps, tol=tol, mesh_h=mesh_h)
    if gap_tol is None:
        gap_tol = 100.0 * tol + (0.0 if domain.kind != DomainKind.POLYGON else mesh_h ** 2)
    return inner.merged_with(outer, gap_tol)


def write_bracket_report(result: BracketResult, path) -> None:
    """CSV report: one row per family step plus the extrapolated tail row."""
    def fmt(x):
        return "" if x is None else f"{x:.12g}"

    with open(path, "w") as fh:
        fh.write("k,delta,beta_inner,beta_outer,residual_inner,residual_outer,gap\n")
        for k, d in enumerate(result.steps):
            bi = result.beta_inner[k] if result.beta_inner else None
            bo = result.beta_outer[k] if result.beta_outer else None
            ri = result.residual_inner[k] if result.residual_inner else None
            ro = result.residual_outer[k] if result.residual_outer else None
            fh.write(f"{k},{fmt(d)},{fmt(bi)},{fmt(bo)},{fmt(ri)},{fmt(ro)},\n")
        fh.write(f"limit,,{fmt(result.beta_in_limit)},{fmt(result.beta_out_limit)}"
                 f",,,{fmt(result.gap)}\n")


# ---------------------------------------------------------------------------
# quotient diagnostics


@dataclass(frozen=True)
class QuotientDiagnostic:
    """Comparability of two positive eigenfunction candidates.

    osc_log_ratio is sup minus inf of ln(omega/omega') over interior nodes
    after rescaling so sup(omega'/omega) = 1; zero means the fields are
    proportional.  The Holder fit regresses the upper envelope of pairwise
    log-quotient differences against pair distance.
    """

    osc_log_ratio: float
    holder_constant: float
    holder_exponent: float
    comparability_constant: float


def _interior_values(field):
    if isinstance(field, ColatGrid):
        inside = np.ones(len(field.nodes), dtype=bool)
        inside[-1] = False
        if field.dim_N == 2:
            inside[0] = False
        pos = field.nodes[inside]
        return field.values[inside], pos.reshape(-1, 1)
    if isinstance(field, DiscreteField):
        inside = ~field.mesh.boundary_flags
        return field.values[inside], field.mesh.vertices[inside]
    raise ConfigError("expected a ColatGrid or DiscreteField")


def proportionality_diagnostic(omega, omega_prime, *, max_points: int = 400,
                               n_bins: int = 12) -> QuotientDiagnostic:
    """Oscillation and Holder fit of the log quotient of two positive fields.

    Both fields must live on the same grid or mesh and be positive on its
    interior nodes.  The result is invariant under independent positive
    rescaling of either input.
    """
    va, pa = _interior_values(omega)
    vb, pb = _interior_values(omega_prime)
    if va.shape != vb.shape or not np.allclose(pa, pb):
        raise ConfigError("fields live on different node sets")
    if np.any(va <= 0.0) or np.any(vb <= 0.0):
        raise PositivityError("quotient diagnostic needs positive interior values")
    lnq = np.log(va) - np.log(vb)
    lnq -= lnq.min()  # rescale omega_prime so sup(omega'/omega) = 1
    osc = float(lnq.max())

    if len(va) > max_points:
        rng = np.random.default_rng(0)
        sel = rng.choice(len(va), size=max_points, replace=False)
        sel.sort()
        lnq_s, pos_s = lnq[sel], pa[sel]
    else:
        lnq_s, pos_s = lnq, pa
    if pos_s.shape[1] == 1:
        dist = np.abs(pos_s[:, None, 0] - pos_s[None, :, 0])
    else:
        dist = np.linalg.norm(pos_s[:, None, :] - pos_s[None, :, :], axis=-1)
    iu = np.triu_indices(len(lnq_s), k=1)
    d = dist[iu]
    dq = np.abs(lnq_s[:, None] - lnq_s[None, :])[iu]
    keep = d > 0.0
    d, dq = d[keep], dq[keep]
    if len(d) == 0 or dq.max() < 1e-13:
        return QuotientDiagnostic(osc, 0.0, 0.0, math.exp(osc))
    edges = np.geomspace(d.min(), d.max() * (1 + 1e-12), n_bins + 1)
    which = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, n_bins - 1)
    xs, ys = [], []
    for b in range(n_bins):
        m = which == b
        if not np.any(m):
            continue
        env = dq[m].max()
        if env <= 0.0:
            continue
        xs.append(0.5 * (math.log(edges[b]) + math.log(edges[b + 1])))
        ys.append(math.log(env))
    if len(xs) < 2:
        return QuotientDiagnostic(osc, float(dq.max()), 0.0, math.exp(osc))
    slope, intercept = np.polyfit(xs, ys, 1)
    return QuotientDiagnostic(osc, float(math.exp(intercept)), float(slope),
                              float(math.exp(osc)))
